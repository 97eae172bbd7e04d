#include "cpml/sigmoid_approx.hpp"

#include <cmath>
#include <string>

namespace cpml::sigmoid_approx {

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double PolyApprox::operator()(double z) const noexcept {
  double acc = 0.0;
  for (std::size_t i = c.size(); i > 0; --i) acc = acc * z + c[i - 1];
  return acc;
}

PolyApprox fit_sigmoid(int r, double interval, std::size_t grid_size) {
  if (r < 1) throw InvalidParameter("polynomial degree must be >= 1");
  if (!(interval > 0.0)) throw InvalidParameter("fit interval must be positive");
  const auto cols = static_cast<Eigen::Index>(r) + 1;
  if (grid_size < static_cast<std::size_t>(cols)) {
    throw InvalidParameter("grid of " + std::to_string(grid_size) + " points cannot fit degree " + std::to_string(r));
  }
  const auto rows = static_cast<Eigen::Index>(grid_size);
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd g(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double z = grid_size == 1 ? 0.0 : -interval + 2.0 * interval * static_cast<double>(i) / static_cast<double>(rows - 1);
    double power = 1.0;
    for (Eigen::Index k = 0; k < cols; ++k) {
      A(i, k) = power;
      power *= z;
    }
    g(i) = sigmoid(z);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < cols) throw SingularNormalEquations("design matrix has rank " + std::to_string(qr.rank()));
  const Eigen::VectorXd c = qr.solve(g);

  PolyApprox out;
  out.r = r;
  out.c.assign(c.data(), c.data() + c.size());
  out.interval = interval;
  out.grid_size = grid_size;
  out.max_abs_error = (A * c - g).cwiseAbs().maxCoeff();
  return out;
}

PolyApprox identity_approx() {
  PolyApprox out;
  out.r = 1;
  out.c = {0.0, 1.0};
  out.interval = 0.0;
  out.grid_size = 0;
  return out;
}

std::vector<double> QuantizedPoly::effective_coefficients(const field::FieldParams& f) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < cbar.size(); ++i) {
    out.push_back(std::ldexp(static_cast<double>(f.unembed_signed(cbar[i])), -scales[i]));
  }
  return out;
}

QuantizedPoly quantize_coefficients(const PolyApprox& approx, const quantize::QuantizationConfig& cfg) {
  if (approx.r != cfg.r || approx.c.size() != static_cast<std::size_t>(approx.r) + 1) {
    throw InvalidParameter("polynomial degree " + std::to_string(approx.r) + " does not match r = " +
                           std::to_string(cfg.r));
  }
  QuantizedPoly q;
  q.r = approx.r;
  const double limit = static_cast<double>(cfg.field.half());
  for (int i = 0; i <= approx.r; ++i) {
    const int s = (approx.r - i) * (cfg.lx + cfg.lw) + cfg.coef_bits;
    const double scaled = std::ldexp(approx.c[static_cast<std::size_t>(i)], s);
    if (!std::isfinite(scaled) || std::abs(scaled) + 1.0 > limit) {
      throw OverflowRisk("coefficient c_" + std::to_string(i) + " at scale 2^" + std::to_string(s) +
                         " exceeds the field range");
    }
    q.cbar.push_back(cfg.field.embed_signed(quantize::round_nearest(scaled)));
    q.scales.push_back(s);
  }
  return q;
}

Eigen::VectorXd estimator_real(const Eigen::MatrixXd& Xbar_int, const Eigen::MatrixXd& Wbar_int,
                               std::span<const double> coefficients, const quantize::QuantizationConfig& cfg) {
  const auto r = static_cast<Eigen::Index>(coefficients.size()) - 1;
  if (Wbar_int.cols() != r) {
    throw DimensionMismatch("Wbar has " + std::to_string(Wbar_int.cols()) + " columns, expected " + std::to_string(r));
  }
  if (Xbar_int.cols() != Wbar_int.rows()) throw DimensionMismatch("estimator_real: Xbar and Wbar disagree on d");
  const Eigen::MatrixXd Z = (Xbar_int * Wbar_int) * std::ldexp(1.0, -(cfg.lx + cfg.lw));
  Eigen::VectorXd product = Eigen::VectorXd::Ones(Xbar_int.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(Xbar_int.rows(), coefficients[0]);
  for (Eigen::Index i = 1; i <= r; ++i) {
    product = product.cwiseProduct(Z.col(i - 1));
    out += coefficients[static_cast<std::size_t>(i)] * product;
  }
  return out;
}

Eigen::VectorXd estimator_real(const Eigen::MatrixXd& Xbar_int, const Eigen::MatrixXd& Wbar_int,
                               const PolyApprox& approx, const quantize::QuantizationConfig& cfg) {
  return estimator_real(Xbar_int, Wbar_int, std::span<const double>(approx.c), cfg);
}

field::FieldMatrix worker_gradient_fn(const field::FieldMatrix& Xtilde, const field::FieldMatrix& Wtilde,
                                      const QuantizedPoly& qpoly, const field::FieldParams& f) {
  const auto r = static_cast<std::size_t>(qpoly.r);
  if (Wtilde.cols() != r || qpoly.cbar.size() != r + 1) {
    throw DimensionMismatch("weight share has " + std::to_string(Wtilde.cols()) + " columns for degree " +
                            std::to_string(r));
  }
  if (Xtilde.cols() != Wtilde.rows()) throw DimensionMismatch("dataset and weight shares disagree on d");
  const std::size_t rows = Xtilde.rows();
  const field::FieldMatrix Z = field::matmul(Xtilde, Wtilde, f);  // rows x r

  field::FieldMatrix gbar(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) gbar(i, 0) = qpoly.cbar[0].value;
  field::FieldMatrix product(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) product(i, 0) = 1;
  for (std::size_t term = 1; term <= r; ++term) {
    product = field::hadamard(product, Z.column(term - 1), f);
    field::axpy(gbar, qpoly.cbar[term], product, f);
  }
  return field::matmul_tn(Xtilde, gbar, f);
}

}  // namespace cpml::sigmoid_approx
