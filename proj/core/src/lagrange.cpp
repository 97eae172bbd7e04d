#include "cpml/lagrange.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace cpml::lagrange {

std::size_t recovery_threshold(std::size_t K, std::size_t T, std::size_t r) noexcept {
  return (2 * r + 1) * (K + T - 1) + 1;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays exact at every step.
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) return std::numeric_limits<std::uint64_t>::max();
    result = result * factor / i;
  }
  return result;
}

EncodingSetup make_setup(std::size_t K, std::size_t T, std::size_t N, std::size_t r, const FieldParams& f) {
  if (K == 0) throw InvalidParameter("K must be at least 1");
  const std::size_t threshold = recovery_threshold(K, T, r);
  if (N < threshold) {
    throw InsufficientWorkers("N = " + std::to_string(N) + " < (2r+1)(K+T-1)+1 = " + std::to_string(threshold));
  }
  if (K + T + N > f.p()) {
    throw FieldTooSmall("K + T + N = " + std::to_string(K + T + N) + " exceeds p = " + std::to_string(f.p()));
  }
  EncodingSetup s{K, T, N, r, f, {}, {}, FieldMatrix(K + T, N)};
  for (std::size_t i = 0; i < K + T; ++i) s.betas.push_back(f.reduce(i + 1));
  for (std::size_t j = 0; j < N; ++j) s.alphas.push_back(f.reduce(K + T + j + 1));

  const std::size_t n = K + T;
  std::vector<FieldElement> denom_inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    FieldElement d{1};
    for (std::size_t l = 0; l < n; ++l)
      if (l != i) d = f.mul(d, f.sub(s.betas[i], s.betas[l]));
    denom_inv[i] = f.inv(d);
  }
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      FieldElement num{1};
      for (std::size_t l = 0; l < n; ++l)
        if (l != i) num = f.mul(num, f.sub(s.alphas[j], s.betas[l]));
      s.U(i, j) = f.mul(num, denom_inv[i]).value;
    }
  }
  return s;
}

std::vector<FieldMatrix> draw_masks(std::size_t T, std::size_t rows, std::size_t cols, const FieldParams& f,
                                    Rng& rng) {
  std::vector<FieldMatrix> masks;
  masks.reserve(T);
  for (std::size_t t = 0; t < T; ++t) masks.push_back(field::uniform_matrix(rows, cols, f, rng));
  return masks;
}

FieldMatrix pad_rows(const FieldMatrix& m, std::size_t K) {
  const std::size_t padded = (m.rows() + K - 1) / K * K;
  if (padded == m.rows()) return m;
  FieldMatrix out(padded, m.cols());
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

namespace {

template <typename Share, typename MakeShare>
std::vector<Share> encode_blocks(std::span<const FieldMatrix> blocks, const EncodingSetup& setup,
                                 std::span<const FieldMatrix> masks, MakeShare make) {
  if (masks.size() != setup.T) {
    throw DimensionMismatch("expected " + std::to_string(setup.T) + " masks, got " + std::to_string(masks.size()));
  }
  const std::size_t rows = blocks.front().rows(), cols = blocks.front().cols();
  for (const auto& z : masks) {
    if (z.rows() != rows || z.cols() != cols) throw DimensionMismatch("mask shape differs from data block");
  }
  std::vector<Share> shares;
  shares.reserve(setup.N);
  for (std::size_t i = 0; i < setup.N; ++i) {
    FieldMatrix acc(rows, cols);
    for (std::size_t k = 0; k < setup.K; ++k) {
      field::axpy(acc, {setup.U(k, i)}, blocks[blocks.size() == 1 ? 0 : k], setup.field);
    }
    for (std::size_t t = 0; t < setup.T; ++t) field::axpy(acc, {setup.U(setup.K + t, i)}, masks[t], setup.field);
    shares.push_back(make(i, std::move(acc)));
  }
  return shares;
}

}  // namespace

std::vector<CodedDatasetShare> encode_dataset(const FieldMatrix& Xbar, const EncodingSetup& setup,
                                              std::span<const FieldMatrix> Z) {
  if (Xbar.rows() % setup.K != 0) {
    throw DimensionMismatch("K = " + std::to_string(setup.K) + " does not divide m = " + std::to_string(Xbar.rows()));
  }
  const std::size_t block = Xbar.rows() / setup.K;
  std::vector<FieldMatrix> blocks;
  blocks.reserve(setup.K);
  for (std::size_t k = 0; k < setup.K; ++k) blocks.push_back(Xbar.row_block(k * block, block));
  if (setup.K == 1 && blocks.empty()) blocks.emplace_back(0, Xbar.cols());
  return encode_blocks<CodedDatasetShare>(blocks, setup, Z, [](std::size_t i, FieldMatrix&& m) {
    return CodedDatasetShare{i, std::move(m)};
  });
}

std::vector<CodedWeightShare> encode_weights(const FieldMatrix& Wbar, const EncodingSetup& setup,
                                             std::span<const FieldMatrix> V, std::uint32_t round) {
  // v(beta_k) = Wbar for every k in [K]: one block repeated.
  return encode_blocks<CodedWeightShare>(std::span<const FieldMatrix>(&Wbar, 1), setup, V,
                                         [round](std::size_t i, FieldMatrix&& m) {
                                           return CodedWeightShare{i, round, std::move(m)};
                                         });
}

Interpolant::Interpolant(std::vector<FieldElement> xs, std::vector<FieldMatrix> ys, const FieldParams& f)
    : xs_(std::move(xs)), ys_(std::move(ys)), field_(f) {
  if (xs_.empty() || xs_.size() != ys_.size()) throw NotEnoughPoints("interpolant needs matching, non-empty nodes");
  for (const auto& y : ys_) {
    if (y.rows() != ys_.front().rows() || y.cols() != ys_.front().cols())
      throw DimensionMismatch("interpolation values differ in shape");
  }
  const std::size_t n = xs_.size();
  weights_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    FieldElement d{1};
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      if (xs_[j] == xs_[k]) {
        throw DuplicateEvaluationPoint("evaluation point " + std::to_string(xs_[j].value) + " repeats");
      }
      d = field_.mul(d, field_.sub(xs_[j], xs_[k]));
    }
    weights_[j] = field_.inv(d);
  }
}

std::vector<FieldElement> Interpolant::basis_at(FieldElement z) const {
  const std::size_t n = xs_.size();
  std::vector<FieldElement> basis(n, FieldElement{0});
  for (std::size_t j = 0; j < n; ++j) {
    if (xs_[j] == z) {
      basis[j] = {1};
      return basis;
    }
  }
  FieldElement full{1};
  for (const auto& x : xs_) full = field_.mul(full, field_.sub(z, x));
  for (std::size_t j = 0; j < n; ++j) {
    basis[j] = field_.mul(field_.mul(full, weights_[j]), field_.inv(field_.sub(z, xs_[j])));
  }
  return basis;
}

FieldMatrix Interpolant::evaluate(FieldElement z) const {
  const auto basis = basis_at(z);
  FieldMatrix out(ys_.front().rows(), ys_.front().cols());
  for (std::size_t j = 0; j < ys_.size(); ++j) {
    if (basis[j].value != 0) field::axpy(out, basis[j], ys_[j], field_);
  }
  return out;
}

std::vector<FieldMatrix> Interpolant::coefficients() const {
  const std::size_t n = xs_.size();
  // master(z) = prod_k (z - x_k), coefficients lowest degree first.
  std::vector<FieldElement> master(n + 1, FieldElement{0});
  master[0] = {1};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = k + 1; t > 0; --t) {
      master[t] = field_.sub(master[t - 1], field_.mul(xs_[k], master[t]));
    }
    master[0] = field_.neg(field_.mul(xs_[k], master[0]));
  }
  std::vector<FieldMatrix> coeffs(n, FieldMatrix(ys_.front().rows(), ys_.front().cols()));
  std::vector<FieldElement> quotient(n);
  for (std::size_t j = 0; j < n; ++j) {
    // master(z) / (z - x_j) by synthetic division from the top.
    FieldElement carry{0};
    for (std::size_t t = n; t > 0; --t) {
      carry = field_.add(master[t], field_.mul(carry, xs_[j]));
      quotient[t - 1] = carry;
    }
    for (std::size_t t = 0; t < n; ++t) {
      const FieldElement c = field_.mul(quotient[t], weights_[j]);
      if (c.value != 0) field::axpy(coeffs[t], c, ys_[j], field_);
    }
  }
  return coeffs;
}

Interpolant interpolate(std::span<const std::pair<FieldElement, FieldMatrix>> points, std::size_t degree_bound,
                        const FieldParams& f) {
  if (points.size() < degree_bound + 1) {
    throw NotEnoughPoints("need " + std::to_string(degree_bound + 1) + " points, got " + std::to_string(points.size()));
  }
  std::vector<FieldElement> xs;
  std::vector<FieldMatrix> ys;
  for (std::size_t i = 0; i <= degree_bound; ++i) {
    xs.push_back(points[i].first);
    ys.push_back(points[i].second);
  }
  return Interpolant(std::move(xs), std::move(ys), f);
}

namespace {

std::vector<FieldElement> responder_points(std::span<const WorkerResult> results, const EncodingSetup& setup) {
  const std::size_t needed = setup.threshold();
  if (results.size() < needed) {
    throw NotEnoughResults("have " + std::to_string(results.size()) + " results, recovery threshold is " +
                           std::to_string(needed));
  }
  std::vector<FieldElement> xs;
  xs.reserve(needed);
  for (std::size_t i = 0; i < needed; ++i) {
    if (results[i].worker >= setup.N) throw OutOfRange("worker index " + std::to_string(results[i].worker));
    xs.push_back(setup.alphas[results[i].worker]);
  }
  return xs;
}

}  // namespace

std::vector<FieldMatrix> decode_blocks(std::span<const WorkerResult> results, const EncodingSetup& setup) {
  auto xs = responder_points(results, setup);
  std::vector<FieldMatrix> ys;
  ys.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ys.push_back(results[i].value);
  const Interpolant h(std::move(xs), std::move(ys), setup.field);
  std::vector<FieldMatrix> blocks;
  blocks.reserve(setup.K);
  for (std::size_t k = 0; k < setup.K; ++k) blocks.push_back(h.evaluate(setup.betas[k]));
  return blocks;
}

FieldMatrix decode_gradient(std::span<const WorkerResult> results, const EncodingSetup& setup) {
  auto xs = responder_points(results, setup);
  const std::size_t n = xs.size();
  const FieldParams& f = setup.field;
  std::vector<FieldMatrix> ys;
  ys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ys.push_back(results[i].value);
  const Interpolant h(std::move(xs), std::move(ys), f);
  // sum_k h(beta_k) = sum_j (sum_k l_j(beta_k)) h(alpha_j).
  std::vector<FieldElement> lambda(n, FieldElement{0});
  for (std::size_t k = 0; k < setup.K; ++k) {
    const auto basis = h.basis_at(setup.betas[k]);
    for (std::size_t j = 0; j < n; ++j) lambda[j] = f.add(lambda[j], basis[j]);
  }
  FieldMatrix out(results.front().value.rows(), results.front().value.cols());
  for (std::size_t j = 0; j < n; ++j) field::axpy(out, lambda[j], results[j].value, f);
  return out;
}

bool submatrix_invertible(const FieldMatrix& rows, std::span<const std::size_t> subset, const FieldParams& f) {
  const std::size_t t = rows.rows();
  FieldMatrix sub(t, subset.size());
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < subset.size(); ++c) sub(i, c) = rows(i, subset[c]);
  return field::determinant(std::move(sub), f).value != 0;
}

PrivacyReport check_privacy_structure(const EncodingSetup& setup, std::uint64_t seed) {
  const std::size_t T = setup.T, N = setup.N;
  FieldMatrix bottom(T, N);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < N; ++j) bottom(i, j) = setup.U(setup.K + i, j);
  return check_square_submatrices(bottom, setup.field, seed);
}

PrivacyReport check_square_submatrices(const FieldMatrix& rows, const FieldParams& f, std::uint64_t seed) {
  PrivacyReport report;
  const std::size_t T = rows.rows(), N = rows.cols();
  if (T == 0) return report;
  if (T > N) throw DimensionMismatch("more rows than columns in the privacy check");

  auto check = [&](const std::vector<std::size_t>& subset) {
    ++report.subsets_checked;
    if (!submatrix_invertible(rows, subset, f)) report.singular_subsets.push_back(subset);
  };

  if (binomial(N, T) <= 10'000) {
    std::vector<std::size_t> subset(T);
    std::iota(subset.begin(), subset.end(), 0);
    while (true) {
      check(subset);
      std::size_t i = T;
      while (i > 0 && subset[i - 1] == N - T + i - 1) --i;
      if (i == 0) break;
      ++subset[i - 1];
      for (std::size_t k = i; k < T; ++k) subset[k] = subset[k - 1] + 1;
    }
  } else {
    report.exhaustive = false;
    Rng rng(seed, 0x505249);
    std::vector<std::size_t> pool(N);
    for (int draw = 0; draw < 1000; ++draw) {
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t k = 0; k < T; ++k) std::swap(pool[k], pool[k + rng.uniform_below(N - k)]);
      std::vector<std::size_t> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(T));
      std::sort(subset.begin(), subset.end());
      check(subset);
    }
  }
  return report;
}

}  // namespace cpml::lagrange
