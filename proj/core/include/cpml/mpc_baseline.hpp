#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpml/field.hpp"
#include "cpml/lagrange.hpp"
#include "cpml/rng.hpp"
#include "cpml/sigmoid_approx.hpp"

namespace cpml::mpc {

using field::FieldElement;
using field::FieldMatrix;
using field::FieldParams;

struct ShamirShare {
  std::size_t party = 0;    // index in [0, N)
  FieldElement eval_point;  // the party's evaluation point
  FieldMatrix value;        // P(eval_point), entrywise
};

struct MpcConfig {
  std::size_t N = 3;
  std::size_t T = 1;
  FieldParams field{};
  std::vector<FieldElement> points;  // 1..N unless set explicitly

  // Parties at points 1..N. Throws InsufficientParties unless T <= (N - 1) / 2.
  static MpcConfig make(std::size_t N, std::size_t T, const FieldParams& f);
  void validate() const;
};

// P(z) = secret + z R_1 + ... + z^T R_T with the given masks R_t, evaluated
// at every point. Throws DuplicateEvaluationPoint.
std::vector<ShamirShare> shamir_share_with_masks(const FieldMatrix& secret, std::span<const FieldMatrix> masks,
                                                 std::span<const FieldElement> points, const FieldParams& f);
// Same with T fresh uniform masks.
std::vector<ShamirShare> shamir_share(const FieldMatrix& secret, std::size_t T, std::span<const FieldElement> points,
                                      const FieldParams& f, Rng& rng);

// P(0) from the first degree + 1 shares. Throws NotEnoughShares and DuplicateEvaluationPoint.
FieldMatrix reconstruct(std::span<const ShamirShare> shares, std::size_t degree, const FieldParams& f);

// Lagrange constants lambda_i with P(0) = sum_i lambda_i P(x_i) for deg P < |xs|.
std::vector<FieldElement> zero_lagrange_weights(std::span<const FieldElement> xs, const FieldParams& f);

// Entrywise product of two degree-T sharings, reduced back to degree T by
// every party resharing its local product and recombining with the
// constants above. Throws InsufficientParties when N < 2T + 1.
std::vector<ShamirShare> share_mul(std::span<const ShamirShare> a, std::span<const ShamirShare> b,
                                   const MpcConfig& config, Rng& rng);

// Each party holds a share of every one of the K row blocks, so each stores
// as much data as the whole dataset.
struct MpcDatasetShares {
  std::size_t K = 1;
  std::size_t rows = 0;                         // unpadded row count
  std::vector<std::vector<ShamirShare>> blocks;  // [block][party]
};

MpcDatasetShares share_dataset(const FieldMatrix& Xbar, std::size_t K, const MpcConfig& config, Rng& rng);

struct MpcRoundStats {
  std::vector<std::uint64_t> party_mul_counts;  // field multiplications per party
  std::size_t reshare_layers = 0;               // degree reductions, one barrier each
  std::uint64_t bytes_exchanged = 0;            // encoded Reshare frames between parties
  double elapsed_ms = 0.0;
};

// The gradient Xbar^T gbar(Xbar, Wbar) computed jointly by N party threads
// exchanging Reshare frames, then opened from 2T + 1 output shares.
FieldMatrix mpc_gradient_round(const MpcDatasetShares& dataset, std::span<const ShamirShare> weight_shares,
                               const sigmoid_approx::QuantizedPoly& qpoly, const MpcConfig& config,
                               std::uint64_t seed, MpcRoundStats* stats = nullptr);

// Any T shares are a bijective image of the masks iff every T x T submatrix
// of the rows (x^1, ..., x^T) at the party points is invertible.
lagrange::PrivacyReport check_shamir_privacy(const MpcConfig& config, std::uint64_t seed = 0);

}  // namespace cpml::mpc
