#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "cpml/field.hpp"
#include "cpml/rng.hpp"

namespace cpml::quantize {

struct QuantizationConfig {
  field::FieldParams field{};
  int lx = 2;  // dataset scale exponent
  int lw = 4;  // weight scale exponent
  int r = 1;   // sigmoid polynomial degree = number of weight quantizations
  // Extra scale shared by every sigmoid coefficient. 0 keeps coefficient i at
  // 2^((r - i)(lx + lw)), which rounds the r = 1 slope to zero; a positive
  // value keeps more coefficient bits at the cost of overflow headroom.
  int coef_bits = 0;

  // Exponent l of the decoded gradient's fixed-point scale 2^l.
  [[nodiscard]] int decode_scale() const noexcept { return lx + r * (lx + lw) + coef_bits; }

  // Throws InvalidParameter on negative exponents.
  void validate() const;
};

struct QuantizedDataset {
  field::FieldMatrix Xbar;      // m x d, entries embed(Round(2^lx X))
  Eigen::MatrixXd dequantized;  // Round(2^lx X) / 2^lx, the real view of Xbar
  Eigen::VectorXd ytXbar;       // dequantized^T y, empty when no labels were given
};

struct QuantizedWeights {
  field::FieldMatrix Wbar;  // d x r, column j is an independent stochastic quantization
};

// Round half up: floor(x) when frac(x) < 0.5, floor(x) + 1 otherwise.
std::int64_t round_nearest(double x) noexcept;
// floor(x) + 1 with probability frac(x), floor(x) otherwise; E = x.
std::int64_t round_stochastic(double x, Rng& rng) noexcept;

// Throws OverflowRisk unless p >= 2^(lx+1) max|X_ij| + 1.
QuantizedDataset quantize_dataset(const Eigen::MatrixXd& X, const QuantizationConfig& cfg);
QuantizedDataset quantize_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const QuantizationConfig& cfg);

// Column j draws from rng.derive(j), so columns are independent and each
// column is reproducible on its own. Throws OverflowRisk when
// |2^lw w_i| + 1 > (p - 1) / 2.
QuantizedWeights quantize_weights(const Eigen::VectorXd& w, const QuantizationConfig& cfg, Rng& rng);

// 2^-l * unembed(v) with l = decode_scale().
Eigen::VectorXd dequantize_gradient(const field::FieldMatrix& v, const QuantizationConfig& cfg);

// Signed-integer view of a field matrix (row-major), and its real value at scale 2^-exponent.
Eigen::MatrixXd to_real(const field::FieldMatrix& m, int exponent, const field::FieldParams& f);

}  // namespace cpml::quantize
