#include "cpml/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "cpml/errors.hpp"
#include "cpml/mpc_baseline.hpp"

namespace cpml::trainer {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void require_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, const char* op) {
  if (X.rows() != y.size() || X.cols() != w.size()) {
    throw DimensionMismatch(std::string(op) + ": X is " + std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                            ", y has " + std::to_string(y.size()) + ", w has " + std::to_string(w.size()));
  }
}

double sigmoid_clamped(double z) {
  return std::clamp(sigmoid_approx::sigmoid(z), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

void record(ModelState& state, const Dataset& train, const Dataset* test, const TrainConfig& cfg,
            IterationMetrics m) {
  m.iteration = state.t;
  m.cost = cfg.model == Model::logistic ? cost(train.X, train.y, state.w) : squared_loss(train.X, train.y, state.w);
  m.train_acc = evaluate_accuracy(train.X, train.y, state.w, cfg.model);
  m.test_acc = test != nullptr && test->rows() > 0 ? evaluate_accuracy(test->X, test->y, state.w, cfg.model) : 0.0;
  if (!cfg.record_timing) m.encode_ms = m.compute_ms = m.decode_ms = 0.0;
  state.history.push_back(m);
}

void check_wraparound(const Eigen::VectorXd& decoded, const field::FieldMatrix& Wbar, const Prepared& prep,
                      const TrainConfig& cfg) {
  const Eigen::MatrixXd Wint = quantize::to_real(Wbar, 0, cfg.quant.field);
  const auto coefs = prep.qpoly.effective_coefficients(cfg.quant.field);
  const Eigen::VectorXd shadow =
      prep.data.dequantized.transpose() * sigmoid_approx::estimator_real(*prep.Xbar_int, Wint, coefs, cfg.quant);
  const double scale = std::max(1.0, shadow.cwiseAbs().maxCoeff());
  const double err = (decoded - shadow).cwiseAbs().maxCoeff();
  if (err > 1e-6 * scale) {
    throw QuantizationOverflow("decoded gradient differs from the real-arithmetic shadow by " + std::to_string(err) +
                               "; the field wrapped around, use a larger p or smaller lx/lw");
  }
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "plain") return Mode::plain;
  if (name == "approx") return Mode::approx;
  if (name == "coded") return Mode::coded;
  if (name == "mpc") return Mode::mpc;
  throw InvalidParameter("unknown mode '" + name + "' (plain, approx, coded, mpc)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::plain: return "plain";
    case Mode::approx: return "approx";
    case Mode::coded: return "coded";
    case Mode::mpc: return "mpc";
  }
  return "coded";
}

Model parse_model(const std::string& name) {
  if (name == "logistic") return Model::logistic;
  if (name == "linear") return Model::linear;
  throw InvalidParameter("unknown model '" + name + "' (logistic, linear)");
}

std::string model_name(Model model) { return model == Model::logistic ? "logistic" : "linear"; }

std::string metrics_csv_row(const IterationMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.3f,%.3f,%.3f,%zu", m.iteration, m.cost, m.train_acc,
                m.test_acc, m.encode_ms, m.compute_ms, m.decode_ms, m.workers_used);
  return buf;
}

void TrainConfig::validate() const {
  quant.validate();
  if (K == 0) throw InvalidParameter("K must be at least 1");
  if (quant.r < 1) throw InvalidParameter("r must be at least 1");
  if (model == Model::linear && quant.r != 1) throw InvalidParameter("the linear model uses r = 1");
  if (eta && !(*eta >= 0.0)) throw InvalidParameter("eta must be non-negative");
  if (!eta && !(eta_scale > 0.0)) throw InvalidParameter("eta_scale must be positive");
  if (mode == Mode::coded) {
    const std::size_t threshold = lagrange::recovery_threshold(K, T, static_cast<std::size_t>(quant.r));
    if (N < threshold) {
      throw InsufficientWorkers("N = " + std::to_string(N) + " below the recovery threshold " +
                                std::to_string(threshold));
    }
  }
  if (mode == Mode::mpc && N < 2 * T + 1) {
    throw InsufficientParties("mpc mode needs N >= 2T + 1");
  }
}

double cost(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  require_rows(X, y, w, "cost");
  if (X.rows() == 0) return 0.0;
  const Eigen::VectorXd z = X * w;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double p = sigmoid_clamped(z(i));
    total += -y(i) * std::log(p) - (1.0 - y(i)) * std::log(1.0 - p);
  }
  return total / static_cast<double>(X.rows());
}

double squared_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  require_rows(X, y, w, "squared_loss");
  if (X.rows() == 0) return 0.0;
  return (X * w - y).squaredNorm() / (2.0 * static_cast<double>(X.rows()));
}

Eigen::VectorXd true_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  require_rows(X, y, w, "true_gradient");
  if (X.rows() == 0) return Eigen::VectorXd::Zero(X.cols());
  const Eigen::VectorXd g = (X * w).unaryExpr([](double z) { return sigmoid_approx::sigmoid(z); });
  return X.transpose() * (g - y) / static_cast<double>(X.rows());
}

double largest_eigenvalue_gram(const Eigen::MatrixXd& X, double tolerance) {
  if (X.size() == 0 || X.cwiseAbs().maxCoeff() == 0.0) throw InvalidParameter("power iteration on a zero matrix");
  Rng rng(0x5EED, 0);
  Eigen::VectorXd v(X.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.1 * rng.normal();
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd u = X.transpose() * (X * v);
    const double next = v.dot(u);
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    v = u / norm;
    if (it > 0 && std::abs(next - lambda) <= tolerance * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

double lipschitz_step_size(const Eigen::MatrixXd& X, Model model) {
  const double lambda = largest_eigenvalue_gram(X);
  const double L = model == Model::logistic ? lambda / 4.0 : lambda;
  return 1.0 / L;
}

double evaluate_accuracy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, Model model) {
  require_rows(X, y, w, "evaluate_accuracy");
  if (X.rows() == 0) return 0.0;
  const Eigen::VectorXd z = X * w;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const bool predict_one = model == Model::logistic ? sigmoid_approx::sigmoid(z(i)) >= 0.5 : z(i) >= 0.5;
    if (predict_one == (y(i) == 1.0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(X.rows());
}

Prepared prepare(const Dataset& train, const TrainConfig& cfg) {
  Prepared p;
  p.data = quantize::quantize_dataset(train.X, train.y, cfg.quant);
  p.approx = cfg.model == Model::linear ? sigmoid_approx::identity_approx()
                                        : sigmoid_approx::fit_sigmoid(cfg.quant.r, cfg.fit_interval, cfg.fit_grid);
  p.qpoly = sigmoid_approx::quantize_coefficients(p.approx, cfg.quant);
  p.m = train.rows();
  if (cfg.verify_no_wraparound) p.Xbar_int = quantize::to_real(p.data.Xbar, 0, cfg.quant.field);
  return p;
}

field::FieldMatrix direct_field_gradient(const field::FieldMatrix& Xbar, const field::FieldMatrix& Wbar,
                                         const sigmoid_approx::QuantizedPoly& qpoly, const field::FieldParams& f) {
  return sigmoid_approx::worker_gradient_fn(Xbar, Wbar, qpoly, f);
}

quantize::QuantizedWeights quantize_round_weights(const Eigen::VectorXd& w, const TrainConfig& cfg, std::size_t t) {
  Rng rng = Rng(cfg.seed, kWeightQuantStream).derive(t);
  try {
    return quantize::quantize_weights(w, cfg.quant, rng);
  } catch (const OverflowRisk& e) {
    throw QuantizationOverflow("round " + std::to_string(t) + ": " + e.what());
  }
}

void apply_update(ModelState& state, const field::FieldMatrix& decoded, const Prepared& prep, const TrainConfig& cfg) {
  const Eigen::VectorXd g = quantize::dequantize_gradient(decoded, cfg.quant);
  if (g.size() != state.w.size()) throw DimensionMismatch("decoded gradient has the wrong length");
  state.w -= (state.eta / static_cast<double>(prep.m)) * (g - prep.data.ytXbar);
  ++state.t;
}

CodedSession::CodedSession(const Prepared& prep, const TrainConfig& cfg) : prep_(prep), cfg_(cfg) {
  const auto& f = cfg_.quant.field;
  setup_ = lagrange::make_setup(cfg_.K, cfg_.T, cfg_.N, static_cast<std::size_t>(cfg_.quant.r), f);
  const field::FieldMatrix padded = lagrange::pad_rows(prep_.data.Xbar, cfg_.K);
  Rng mask_rng(cfg_.seed, kDatasetMaskStream);
  const auto Z = lagrange::draw_masks(cfg_.T, padded.rows() / cfg_.K, padded.cols(), f, mask_rng);
  const auto shares = lagrange::encode_dataset(padded, setup_, Z);
  runtime::ClusterConfig cc = cfg_.cluster;
  cc.N = cfg_.N;
  cluster_ = std::make_unique<runtime::Cluster>(cc, f);
  cluster_->distribute_shares(shares);
}

void CodedSession::round(ModelState& state, const Dataset& train, const Dataset* test) {
  const auto& f = cfg_.quant.field;
  const std::size_t t = state.t;
  IterationMetrics m;

  auto start = Clock::now();
  const auto Wbar = quantize_round_weights(state.w, cfg_, t).Wbar;
  Rng mask_rng = Rng(cfg_.seed, kWeightMaskStream).derive(t);
  const auto V = lagrange::draw_masks(cfg_.T, Wbar.rows(), Wbar.cols(), f, mask_rng);
  const auto shares = lagrange::encode_weights(Wbar, setup_, V, static_cast<std::uint32_t>(t));
  m.encode_ms = ms_since(start);

  start = Clock::now();
  runtime::RoundResult rr = cluster_->round_trip(static_cast<std::uint32_t>(t), shares, prep_.qpoly, setup_.threshold());
  m.compute_ms = ms_since(start);

  start = Clock::now();
  std::vector<lagrange::WorkerResult> results;
  std::vector<std::size_t> who;
  for (auto& r : rr.results) {
    who.push_back(r.worker);
    results.push_back({r.worker, std::move(r.payload)});
  }
  const field::FieldMatrix decoded = lagrange::decode_gradient(results, setup_);
  if (cfg_.verify_no_wraparound) check_wraparound(quantize::dequantize_gradient(decoded, cfg_.quant), Wbar, prep_, cfg_);
  apply_update(state, decoded, prep_, cfg_);
  m.decode_ms = ms_since(start);
  m.workers_used = results.size();
  responders_.push_back(std::move(who));
  record(state, train, test, cfg_, m);
}

ModelState train(const Dataset& train_set, const TrainConfig& cfg, const Dataset* test) {
  cfg.validate();
  train_set.validate();
  ModelState state;
  state.w = Eigen::VectorXd::Zero(train_set.X.cols());

  if (cfg.mode == Mode::plain) {
    const auto dequantized = quantize::quantize_dataset(train_set.X, cfg.quant).dequantized;
    state.eta = cfg.eta ? *cfg.eta : cfg.eta_scale * lipschitz_step_size(dequantized, cfg.model);
    const double m = static_cast<double>(train_set.rows());
    for (std::size_t j = 0; j < cfg.J; ++j) {
      const auto start = Clock::now();
      Eigen::VectorXd grad;
      if (cfg.model == Model::logistic) {
        grad = true_gradient(train_set.X, train_set.y, state.w);
      } else {
        grad = train_set.X.transpose() * (train_set.X * state.w - train_set.y) / m;
      }
      state.w -= state.eta * grad;
      ++state.t;
      IterationMetrics metrics;
      metrics.compute_ms = ms_since(start);
      record(state, train_set, test, cfg, metrics);
    }
    return state;
  }

  const Prepared prep = prepare(train_set, cfg);
  state.eta = cfg.eta ? *cfg.eta : cfg.eta_scale * lipschitz_step_size(prep.data.dequantized, cfg.model);
  const auto& f = cfg.quant.field;

  if (cfg.mode == Mode::coded) {
    if (cfg.J == 0) return state;
    CodedSession session(prep, cfg);
    for (std::size_t j = 0; j < cfg.J; ++j) session.round(state, train_set, test);
    return state;
  }

  if (cfg.mode == Mode::approx) {
    for (std::size_t j = 0; j < cfg.J; ++j) {
      IterationMetrics metrics;
      auto start = Clock::now();
      const auto Wbar = quantize_round_weights(state.w, cfg, state.t).Wbar;
      metrics.encode_ms = ms_since(start);
      start = Clock::now();
      const auto grad = direct_field_gradient(prep.data.Xbar, Wbar, prep.qpoly, f);
      metrics.compute_ms = ms_since(start);
      if (cfg.verify_no_wraparound) check_wraparound(quantize::dequantize_gradient(grad, cfg.quant), Wbar, prep, cfg);
      apply_update(state, grad, prep, cfg);
      record(state, train_set, test, cfg, metrics);
    }
    return state;
  }

  // mpc
  const auto mc = mpc::MpcConfig::make(cfg.N, cfg.T, f);
  Rng data_rng(cfg.seed, kMpcDatasetStream);
  const auto dataset_shares = mpc::share_dataset(prep.data.Xbar, cfg.K, mc, data_rng);
  for (std::size_t j = 0; j < cfg.J; ++j) {
    IterationMetrics metrics;
    const std::size_t t = state.t;
    auto start = Clock::now();
    const auto Wbar = quantize_round_weights(state.w, cfg, t).Wbar;
    Rng weight_rng = Rng(cfg.seed, kMpcWeightStream).derive(t);
    const auto weight_shares = mpc::shamir_share(Wbar, cfg.T, mc.points, f, weight_rng);
    metrics.encode_ms = ms_since(start);
    start = Clock::now();
    const std::uint64_t round_seed = Rng(cfg.seed, kMpcProtocolStream).derive(t)();
    const auto grad = mpc::mpc_gradient_round(dataset_shares, weight_shares, prep.qpoly, mc, round_seed);
    metrics.compute_ms = ms_since(start);
    if (cfg.verify_no_wraparound) check_wraparound(quantize::dequantize_gradient(grad, cfg.quant), Wbar, prep, cfg);
    apply_update(state, grad, prep, cfg);
    metrics.workers_used = cfg.N;
    record(state, train_set, test, cfg, metrics);
  }
  return state;
}

}  // namespace cpml::trainer
