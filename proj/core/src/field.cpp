#include "cpml/field.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <utility>

#include "cpml/rng.hpp"

namespace cpml::field {

namespace {

thread_local std::uint64_t tl_mul_count = 0;

void require_same_shape(const FieldMatrix& a, const FieldMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

bool is_prime(std::uint64_t n) noexcept {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  for (std::uint64_t d = 3; d * d <= n; d += 2) {
    if (n % d == 0) return false;
  }
  return true;
}

FieldParams::FieldParams(std::uint64_t p) : p_(p) {
  if (p < 3 || p >= (std::uint64_t{1} << 32)) {
    throw InvalidParameter("field modulus must satisfy 3 <= p < 2^32, got " + std::to_string(p));
  }
  if (!is_prime(p)) throw InvalidParameter("field modulus " + std::to_string(p) + " is not prime");
  const std::uint64_t pm1 = p - 1;
  const std::uint64_t headroom = std::numeric_limits<std::uint64_t>::max() - pm1;
  lazy_limit_ = static_cast<std::size_t>(headroom / (pm1 * pm1));
  if (lazy_limit_ == 0) lazy_limit_ = 1;
}

FieldElement FieldParams::inv(FieldElement a) const {
  if (a.value == 0) throw ZeroInverse("0 has no inverse mod " + std::to_string(p_));
  // Extended Euclid on (a, p).
  std::int64_t old_r = a.value, r = static_cast<std::int64_t>(p_);
  std::int64_t old_s = 1, s = 0;
  while (r != 0) {
    const std::int64_t q = old_r / r;
    old_r = std::exchange(r, old_r - q * r);
    old_s = std::exchange(s, old_s - q * s);
  }
  return from_int(old_s);
}

FieldElement FieldParams::pow(FieldElement base, std::uint64_t exponent) const noexcept {
  FieldElement result{1};
  while (exponent > 0) {
    if (exponent & 1) result = mul(result, base);
    base = mul(base, base);
    exponent >>= 1;
  }
  return result;
}

FieldElement FieldParams::from_int(std::int64_t x) const noexcept {
  const auto p = static_cast<std::int64_t>(p_);
  std::int64_t r = x % p;
  if (r < 0) r += p;
  return {static_cast<std::uint32_t>(r)};
}

FieldElement FieldParams::embed_signed(std::int64_t x) const {
  if (x > half() || x < -half()) {
    throw OutOfRange("|" + std::to_string(x) + "| exceeds (p-1)/2 = " + std::to_string(half()));
  }
  return {static_cast<std::uint32_t>(x >= 0 ? x : static_cast<std::int64_t>(p_) + x)};
}

FieldMatrix::FieldMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint32_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionMismatch("matrix data length " + std::to_string(data_.size()) + " != " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  }
}

FieldMatrix FieldMatrix::identity(std::size_t n) {
  FieldMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

FieldElement FieldMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw OutOfRange("matrix index out of bounds");
  return {(*this)(r, c)};
}

FieldMatrix FieldMatrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw OutOfRange("row block exceeds matrix");
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols_);
  return FieldMatrix(count, cols_,
                     std::vector<std::uint32_t>(begin, begin + static_cast<std::ptrdiff_t>(count * cols_)));
}

FieldMatrix FieldMatrix::column(std::size_t c) const {
  if (c >= cols_) throw OutOfRange("column index out of bounds");
  FieldMatrix out(rows_, 1);
  for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
  return out;
}

FieldMatrix FieldMatrix::transpose() const {
  FieldMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

FieldMatrix matmul(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  const std::uint64_t p = f.p();
  const std::size_t limit = f.lazy_limit();
  FieldMatrix out(n, m);
  std::vector<std::uint64_t> acc(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0);
    std::size_t pending = 0;
    for (std::size_t k = 0; k < inner; ++k) {
      const std::uint64_t aik = a(i, k);
      if (aik == 0) continue;
      const std::uint32_t* brow = b.data().data() + k * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += aik * brow[j];
      if (++pending == limit) {
        for (auto& v : acc) v %= p;
        pending = 0;
      }
    }
    for (std::size_t j = 0; j < m; ++j) out(i, j) = static_cast<std::uint32_t>(acc[j] % p);
  }
  add_thread_mul_count(static_cast<std::uint64_t>(n) * inner * m);
  return out;
}

FieldMatrix matmul_tn(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("matmul_tn: (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            ")^T * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t rows = a.rows(), n = a.cols(), m = b.cols();
  const std::uint64_t p = f.p();
  const std::size_t limit = f.lazy_limit();
  std::vector<std::uint64_t> acc(n * m, 0);
  std::size_t pending = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint32_t* arow = a.data().data() + i * n;
    const std::uint32_t* brow = b.data().data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t aik = arow[k];
      if (aik == 0) continue;
      std::uint64_t* dst = acc.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aik * brow[j];
    }
    if (++pending == limit) {
      for (auto& v : acc) v %= p;
      pending = 0;
    }
  }
  FieldMatrix out(n, m);
  for (std::size_t idx = 0; idx < acc.size(); ++idx) out.data()[idx] = static_cast<std::uint32_t>(acc[idx] % p);
  add_thread_mul_count(static_cast<std::uint64_t>(rows) * n * m);
  return out;
}

FieldMatrix hadamard(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f) {
  require_same_shape(a, b, "hadamard");
  FieldMatrix out(a.rows(), a.cols());
  const std::uint64_t p = f.p();
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = static_cast<std::uint32_t>(std::uint64_t{a.data()[i]} * b.data()[i] % p);
  add_thread_mul_count(a.size());
  return out;
}

FieldMatrix add(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f) {
  require_same_shape(a, b, "add");
  FieldMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = f.add({a.data()[i]}, {b.data()[i]}).value;
  return out;
}

FieldMatrix sub(const FieldMatrix& a, const FieldMatrix& b, const FieldParams& f) {
  require_same_shape(a, b, "sub");
  FieldMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = f.sub({a.data()[i]}, {b.data()[i]}).value;
  return out;
}

FieldMatrix scale(const FieldMatrix& a, FieldElement c, const FieldParams& f) {
  FieldMatrix out(a.rows(), a.cols());
  const std::uint64_t p = f.p();
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = static_cast<std::uint32_t>(std::uint64_t{a.data()[i]} * c.value % p);
  add_thread_mul_count(a.size());
  return out;
}

void axpy(FieldMatrix& acc, FieldElement c, const FieldMatrix& a, const FieldParams& f) {
  require_same_shape(acc, a, "axpy");
  const std::uint64_t p = f.p();
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc.data()[i] = static_cast<std::uint32_t>((acc.data()[i] + std::uint64_t{a.data()[i]} * c.value) % p);
  }
  add_thread_mul_count(a.size());
}

FieldMatrix uniform_matrix(std::size_t rows, std::size_t cols, const FieldParams& f, Rng& rng) {
  FieldMatrix out(rows, cols);
  for (auto& v : out.data()) v = static_cast<std::uint32_t>(rng.uniform_below(f.p()));
  return out;
}

FieldMatrix embed_matrix(std::span<const std::int64_t> values, std::size_t rows, std::size_t cols,
                         const FieldParams& f) {
  if (values.size() != rows * cols) throw DimensionMismatch("embed_matrix: value count mismatch");
  FieldMatrix out(rows, cols);
  for (std::size_t i = 0; i < values.size(); ++i) out.data()[i] = f.embed_signed(values[i]).value;
  return out;
}

std::vector<std::int64_t> unembed_matrix(const FieldMatrix& m, const FieldParams& f) {
  std::vector<std::int64_t> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = f.unembed_signed({m.data()[i]});
  return out;
}

FieldElement determinant(FieldMatrix m, const FieldParams& f) {
  if (m.rows() != m.cols()) throw DimensionMismatch("determinant of non-square matrix");
  const std::size_t n = m.rows();
  FieldElement det{1};
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && m(pivot, col) == 0) ++pivot;
    if (pivot == n) return {0};
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(pivot, c), m(col, c));
      det = f.neg(det);
    }
    const FieldElement diag{m(col, col)};
    det = f.mul(det, diag);
    const FieldElement diag_inv = f.inv(diag);
    for (std::size_t r = col + 1; r < n; ++r) {
      const FieldElement factor = f.mul({m(r, col)}, diag_inv);
      if (factor.value == 0) continue;
      for (std::size_t c = col; c < n; ++c) {
        m(r, c) = f.sub({m(r, c)}, f.mul(factor, {m(col, c)})).value;
      }
    }
  }
  return det;
}

std::uint64_t thread_mul_count() noexcept { return tl_mul_count; }
void add_thread_mul_count(std::uint64_t n) noexcept { tl_mul_count += n; }

}  // namespace cpml::field
