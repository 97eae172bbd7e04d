#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpml/errors.hpp"

namespace cpml {
class Rng;
}

namespace cpml::field {

// Largest 24-bit prime; products of two residues stay far below 2^64.
inline constexpr std::uint64_t kDefaultPrime = 15485863;

struct FieldElement {
  std::uint32_t value = 0;

  friend constexpr bool operator==(FieldElement, FieldElement) = default;
};

// Arithmetic in Z_p for a prime 3 <= p < 2^32. Every result is reduced to
// [0, p). Signed integers are embedded two's-complement style: x >= 0 maps to
// x and x < 0 maps to p + x.
class FieldParams {
 public:
  explicit FieldParams(std::uint64_t p = kDefaultPrime);

  [[nodiscard]] std::uint64_t p() const noexcept { return p_; }
  // (p - 1) / 2, the largest magnitude representable by the signed embedding.
  [[nodiscard]] std::int64_t half() const noexcept { return static_cast<std::int64_t>((p_ - 1) / 2); }
  // How many products of reduced residues can be summed in a uint64_t
  // accumulator before it must be reduced.
  [[nodiscard]] std::size_t lazy_limit() const noexcept { return lazy_limit_; }

  [[nodiscard]] FieldElement add(FieldElement a, FieldElement b) const noexcept {
    std::uint64_t s = std::uint64_t{a.value} + b.value;
    return {static_cast<std::uint32_t>(s >= p_ ? s - p_ : s)};
  }
  [[nodiscard]] FieldElement sub(FieldElement a, FieldElement b) const noexcept {
    return {static_cast<std::uint32_t>(a.value >= b.value ? a.value - b.value
                                                          : a.value + p_ - b.value)};
  }
  [[nodiscard]] FieldElement neg(FieldElement a) const noexcept {
    return {static_cast<std::uint32_t>(a.value == 0 ? 0 : p_ - a.value)};
  }
  [[nodiscard]] FieldElement mul(FieldElement a, FieldElement b) const noexcept {
    return {static_cast<std::uint32_t>(std::uint64_t{a.value} * b.value % p_)};
  }
  [[nodiscard]] FieldElement inv(FieldElement a) const;
  [[nodiscard]] FieldElement pow(FieldElement base, std::uint64_t exponent) const noexcept;

  [[nodiscard]] FieldElement reduce(std::uint64_t x) const noexcept {
    return {static_cast<std::uint32_t>(x % p_)};
  }
  // Reduces any signed integer mod p (no range check).
  [[nodiscard]] FieldElement from_int(std::int64_t x) const noexcept;

  // Throws OutOfRange if |x| > (p - 1) / 2.
  [[nodiscard]] FieldElement embed_signed(std::int64_t x) const;
  // Symmetric representative in [-(p - 1) / 2, (p - 1) / 2].
  [[nodiscard]] std::int64_t unembed_signed(FieldElement v) const noexcept {
    return v.value <= static_cast<std::uint64_t>(half()) ? std::int64_t{v.value}
                                                         : std::int64_t{v.value} - static_cast<std::int64_t>(p_);
  }

  friend bool operator==(const FieldParams& a, const FieldParams& b) noexcept { return a.p_ == b.p_; }

 private:
  std::uint64_t p_;
  std::size_t lazy_limit_;
};

bool is_prime(std::uint64_t n) noexcept;

// Dense row-major matrix of residues.
class FieldMatrix {
 public:
  FieldMatrix() = default;
  FieldMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  FieldMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> data);

  static FieldMatrix identity(std::size_t n);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  std::uint32_t& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  std::uint32_t operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] FieldElement at(std::size_t r, std::size_t c) const;

  [[nodiscard]] std::span<std::uint32_t> data() noexcept { return data_; }
  [[nodiscard]] std::span<const std::uint32_t> data() const noexcept { return data_; }
  [[nodiscard]] std::span<const std::uint32_t> row(std::size_t r) const noexcept {
    return std::span<const std::uint32_t>(data_).subspan(r * cols_, cols_);
  }

  // Rows [first, first + count) as a new matrix.
  [[nodiscard]] FieldMatrix row_block(std::size_t first, std::size_t count) const;
  [[nodiscard]] FieldMatrix column(std::size_t c) const;
  [[nodiscard]] FieldMatrix transpose() const;

  friend bool operator==(const FieldMatrix&, const FieldMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> data_;
};

FieldMatrix matmul(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f);
// a^T * b without materializing the transpose.
FieldMatrix matmul_tn(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f);
FieldMatrix hadamard(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f);
FieldMatrix add(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f);
FieldMatrix sub(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f);
FieldMatrix scale(const FieldMatrix& a, FieldElement c, const FieldParams& f);
// acc += c * a
void axpy(FieldMatrix& acc, FieldElement c, const FieldMatrix& a, const FieldParams& f);

FieldMatrix uniform_matrix(std::size_t rows, std::size_t cols, const FieldParams& f, Rng& rng);

FieldMatrix embed_matrix(std::span<const std::int64_t> values, std::size_t rows, std::size_t cols,
                         const FieldParams& f);
std::vector<std::int64_t> unembed_matrix(const FieldMatrix& m, const FieldParams& f);

// Determinant of a square matrix by Gaussian elimination over F_p.
FieldElement determinant(FieldMatrix m, const FieldParams& f);

// Field multiplications performed by the calling thread so far. Kernels add
// their exact product counts in bulk, which makes per-worker load measurable.
std::uint64_t thread_mul_count() noexcept;
void add_thread_mul_count(std::uint64_t n) noexcept;

class MulCountScope {
 public:
  MulCountScope() noexcept : start_(thread_mul_count()) {}
  [[nodiscard]] std::uint64_t elapsed() const noexcept { return thread_mul_count() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace cpml::field
