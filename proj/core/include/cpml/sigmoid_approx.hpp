#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cpml/field.hpp"
#include "cpml/quantize.hpp"

namespace cpml::sigmoid_approx {

double sigmoid(double z) noexcept;

// ghat(z) = sum_i c[i] z^i, least-squares fit of the sigmoid on [-R, R].
struct PolyApprox {
  int r = 1;
  std::vector<double> c;
  double interval = 5.0;        // R
  std::size_t grid_size = 1001;
  double max_abs_error = 0.0;   // max |ghat - g| over the fit grid

  [[nodiscard]] double operator()(double z) const noexcept;
};

inline constexpr double kDefaultInterval = 5.0;
inline constexpr std::size_t kDefaultGridSize = 1001;

// Throws InvalidParameter for r < 1, R <= 0 or grid_size < r + 1, and
// SingularNormalEquations when the design matrix is rank deficient.
PolyApprox fit_sigmoid(int r, double interval = kDefaultInterval, std::size_t grid_size = kDefaultGridSize);

// ghat = identity; turns the pipeline into linear regression.
PolyApprox identity_approx();

// Coefficient i is stored at scale 2^s_i with s_i = (r - i)(lx + lw) + coef_bits,
// so every term of gbar lands on the common scale 2^(r (lx + lw) + coef_bits).
struct QuantizedPoly {
  int r = 1;
  std::vector<field::FieldElement> cbar;
  std::vector<int> scales;

  // cbar_i / 2^s_i, the coefficients the field pipeline actually applies.
  [[nodiscard]] std::vector<double> effective_coefficients(const field::FieldParams& f) const;
};

// Throws OverflowRisk if 2^s_i |c_i| + 1 > (p - 1) / 2, InvalidParameter on a degree mismatch.
QuantizedPoly quantize_coefficients(const PolyApprox& approx, const quantize::QuantizationConfig& cfg);

// Real-domain gbar: sum_i c_i prod_{j <= i} (Xbar wbar_j 2^-(lx+lw)), with
// Xbar_int and Wbar_int holding signed integers. Its expectation over the
// weight quantization is ghat(Xbar w) evaluated elementwise.
Eigen::VectorXd estimator_real(const Eigen::MatrixXd& Xbar_int, const Eigen::MatrixXd& Wbar_int,
                               std::span<const double> coefficients, const quantize::QuantizationConfig& cfg);
Eigen::VectorXd estimator_real(const Eigen::MatrixXd& Xbar_int, const Eigen::MatrixXd& Wbar_int,
                               const PolyApprox& approx, const quantize::QuantizationConfig& cfg);

// f(Xtilde, Wtilde) = Xtilde^T [sum_i cbar_i prod_{j <= i} (Xtilde wtilde_j)] over F_p.
// The same code runs on coded shares and on plaintext blocks.
field::FieldMatrix worker_gradient_fn(const field::FieldMatrix& Xtilde, const field::FieldMatrix& Wtilde,
                                      const QuantizedPoly& qpoly, const field::FieldParams& f);

}  // namespace cpml::sigmoid_approx
