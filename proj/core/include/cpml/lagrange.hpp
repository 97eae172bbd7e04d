#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cpml/field.hpp"
#include "cpml/rng.hpp"

namespace cpml::lagrange {

using field::FieldElement;
using field::FieldMatrix;
using field::FieldParams;

// Workers needed to decode: (2r + 1)(K + T - 1) + 1.
std::size_t recovery_threshold(std::size_t K, std::size_t T, std::size_t r) noexcept;

// Evaluation points and the encoding matrix shared by dataset encoding,
// weight encoding and decoding. betas are 1..K+T, alphas are K+T+1..K+T+N.
struct EncodingSetup {
  std::size_t K = 0;  // dataset partitions
  std::size_t T = 0;  // privacy threshold
  std::size_t N = 0;  // workers
  std::size_t r = 0;  // sigmoid polynomial degree
  FieldParams field{};
  std::vector<FieldElement> betas;   // K + T
  std::vector<FieldElement> alphas;  // N
  // U(i, j) = prod_{l != i} (alpha_j - beta_l) / (beta_i - beta_l), (K+T) x N.
  FieldMatrix U;

  [[nodiscard]] std::size_t threshold() const noexcept { return recovery_threshold(K, T, r); }
  // Degree bound of h(z) = f(u(z), v(z)).
  [[nodiscard]] std::size_t decode_degree() const noexcept { return threshold() - 1; }
};

// Throws InsufficientWorkers when N is below the recovery threshold and
// FieldTooSmall when K + T + N > p.
EncodingSetup make_setup(std::size_t K, std::size_t T, std::size_t N, std::size_t r, const FieldParams& f);

struct CodedDatasetShare {
  std::size_t worker = 0;
  FieldMatrix Xtilde;  // (m/K) x d
};

struct CodedWeightShare {
  std::size_t worker = 0;
  std::uint32_t round = 0;
  FieldMatrix Wtilde;  // d x r
};

// T uniformly random matrices of the given shape (the Z or V masks).
std::vector<FieldMatrix> draw_masks(std::size_t T, std::size_t rows, std::size_t cols, const FieldParams& f,
                                    Rng& rng);

// Appends zero rows so that K divides the row count.
FieldMatrix pad_rows(const FieldMatrix& m, std::size_t K);

// Share i = (Xbar_1, ..., Xbar_K, Z_1, ..., Z_T) * U[:, i]. Requires K | m.
std::vector<CodedDatasetShare> encode_dataset(const FieldMatrix& Xbar, const EncodingSetup& setup,
                                              std::span<const FieldMatrix> Z);

// Share i = (Wbar, ..., Wbar, V_1, ..., V_T) * U[:, i]. Masks must be fresh per round.
std::vector<CodedWeightShare> encode_weights(const FieldMatrix& Wbar, const EncodingSetup& setup,
                                             std::span<const FieldMatrix> V, std::uint32_t round = 0);

// Unique polynomial of degree <= degree_bound through the given points,
// evaluated entrywise over matrix values.
class Interpolant {
 public:
  Interpolant(std::vector<FieldElement> xs, std::vector<FieldMatrix> ys, const FieldParams& f);

  [[nodiscard]] std::size_t degree_bound() const noexcept { return xs_.size() - 1; }
  // Lagrange basis values l_j(z) for every interpolation node.
  [[nodiscard]] std::vector<FieldElement> basis_at(FieldElement z) const;
  [[nodiscard]] FieldMatrix evaluate(FieldElement z) const;
  // Monomial coefficients, lowest degree first; entry t is a matrix of the
  // coefficient of z^t for every entry.
  [[nodiscard]] std::vector<FieldMatrix> coefficients() const;

 private:
  std::vector<FieldElement> xs_;
  std::vector<FieldMatrix> ys_;
  std::vector<FieldElement> weights_;  // barycentric weights 1 / prod_{k != j} (x_j - x_k)
  FieldParams field_;
};

// Uses the first degree_bound + 1 points. Throws NotEnoughPoints and
// DuplicateEvaluationPoint.
Interpolant interpolate(std::span<const std::pair<FieldElement, FieldMatrix>> points, std::size_t degree_bound,
                        const FieldParams& f);

struct WorkerResult {
  std::size_t worker = 0;  // index in [0, N)
  FieldMatrix value;       // f(Xtilde_i, Wtilde_i), d x 1
};

// Interpolates h from the first threshold results and returns
// sum_k h(beta_k). Throws NotEnoughResults, DuplicateEvaluationPoint.
FieldMatrix decode_gradient(std::span<const WorkerResult> results, const EncodingSetup& setup);
// The individual h(beta_k), k in [K].
std::vector<FieldMatrix> decode_blocks(std::span<const WorkerResult> results, const EncodingSetup& setup);

struct PrivacyReport {
  bool exhaustive = true;
  std::size_t subsets_checked = 0;
  std::vector<std::vector<std::size_t>> singular_subsets;

  [[nodiscard]] bool ok() const noexcept { return singular_subsets.empty(); }
};

// Every T x T submatrix of the bottom T rows of U must be invertible: then
// any T shares are a bijective image of the masks. Exhaustive when
// C(N, T) <= 10^4, otherwise 10^3 uniformly sampled subsets.
PrivacyReport check_privacy_structure(const EncodingSetup& setup, std::uint64_t seed = 0);

// The same test on every T x T column subset of a T x N matrix, with the
// same exhaustive-or-sampled rule.
PrivacyReport check_square_submatrices(const FieldMatrix& rows, const FieldParams& f, std::uint64_t seed = 0);

// Shared by the coded and Shamir privacy checks: determinant test of the
// columns `subset` of `rows`.
bool submatrix_invertible(const FieldMatrix& rows, std::span<const std::size_t> subset, const FieldParams& f);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

}  // namespace cpml::lagrange
