#include "cpml/quantize.hpp"

#include <cmath>
#include <string>

namespace cpml::quantize {

void QuantizationConfig::validate() const {
  if (lx < 0 || lw < 0 || r < 0 || coef_bits < 0) {
    throw InvalidParameter("quantization exponents must be non-negative (lx=" + std::to_string(lx) +
                           ", lw=" + std::to_string(lw) + ", r=" + std::to_string(r) + ")");
  }
}

std::int64_t round_nearest(double x) noexcept {
  const double fl = std::floor(x);
  const auto base = static_cast<std::int64_t>(fl);
  return x - fl < 0.5 ? base : base + 1;
}

std::int64_t round_stochastic(double x, Rng& rng) noexcept {
  const double fl = std::floor(x);
  const auto base = static_cast<std::int64_t>(fl);
  const double frac = x - fl;
  if (frac == 0.0) return base;
  return rng.uniform01() < frac ? base + 1 : base;
}

QuantizedDataset quantize_dataset(const Eigen::MatrixXd& X, const QuantizationConfig& cfg) {
  cfg.validate();
  const double max_abs = X.size() == 0 ? 0.0 : X.cwiseAbs().maxCoeff();
  const double needed = std::ldexp(max_abs, cfg.lx + 1) + 1.0;
  if (!std::isfinite(max_abs) || static_cast<double>(cfg.field.p()) < needed) {
    throw OverflowRisk("p = " + std::to_string(cfg.field.p()) + " < 2^(lx+1) max|X| + 1 = " +
                       std::to_string(needed));
  }
  const auto m = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());
  QuantizedDataset out;
  out.Xbar = field::FieldMatrix(m, d);
  out.dequantized.resize(X.rows(), X.cols());
  const double inv_scale = std::ldexp(1.0, -cfg.lx);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const std::int64_t q = round_nearest(std::ldexp(X(ii, jj), cfg.lx));
      out.Xbar(i, j) = cfg.field.embed_signed(q).value;
      out.dequantized(ii, jj) = static_cast<double>(q) * inv_scale;
    }
  }
  return out;
}

QuantizedDataset quantize_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const QuantizationConfig& cfg) {
  if (y.size() != X.rows()) {
    throw DimensionMismatch("labels: " + std::to_string(y.size()) + " for " + std::to_string(X.rows()) +
                            " rows");
  }
  QuantizedDataset out = quantize_dataset(X, cfg);
  out.ytXbar = out.dequantized.transpose() * y;
  return out;
}

QuantizedWeights quantize_weights(const Eigen::VectorXd& w, const QuantizationConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(w.size());
  const auto r = static_cast<std::size_t>(cfg.r);
  const double limit = static_cast<double>(cfg.field.half());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double scaled = std::ldexp(w(i), cfg.lw);
    if (!std::isfinite(scaled) || std::abs(scaled) + 1.0 > limit) {
      throw OverflowRisk("weight " + std::to_string(w(i)) + " exceeds the field range at lw=" +
                         std::to_string(cfg.lw));
    }
  }
  QuantizedWeights out{field::FieldMatrix(d, r)};
  for (std::size_t j = 0; j < r; ++j) {
    Rng column_rng = rng.derive(j);
    for (std::size_t i = 0; i < d; ++i) {
      const std::int64_t q = round_stochastic(std::ldexp(w(static_cast<Eigen::Index>(i)), cfg.lw), column_rng);
      out.Wbar(i, j) = cfg.field.embed_signed(q).value;
    }
  }
  return out;
}

Eigen::MatrixXd to_real(const field::FieldMatrix& m, int exponent, const field::FieldParams& f) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::ldexp(static_cast<double>(f.unembed_signed({m(i, j)})), -exponent);
  return out;
}

Eigen::VectorXd dequantize_gradient(const field::FieldMatrix& v, const QuantizationConfig& cfg) {
  if (v.cols() != 1) throw DimensionMismatch("dequantize_gradient expects a column vector");
  return to_real(v, cfg.decode_scale(), cfg.field).col(0);
}

}  // namespace cpml::quantize
