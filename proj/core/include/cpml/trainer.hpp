#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpml/dataset.hpp"
#include "cpml/lagrange.hpp"
#include "cpml/quantize.hpp"
#include "cpml/runtime.hpp"
#include "cpml/sigmoid_approx.hpp"

namespace cpml::trainer {

using data::Dataset;

enum class Mode {
  plain,   // real-valued gradient descent on X
  approx,  // quantized data and weights, polynomial sigmoid, computed directly over F_p
  coded,   // the same computation through Lagrange-coded workers
  mpc,     // the same computation through Shamir-shared parties
};

enum class Model { logistic, linear };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);
Model parse_model(const std::string& name);
std::string model_name(Model model);

struct IterationMetrics {
  std::size_t iteration = 0;  // 1-based
  double cost = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double encode_ms = 0.0;
  double compute_ms = 0.0;
  double decode_ms = 0.0;
  std::size_t workers_used = 0;
};

inline constexpr const char* kMetricsCsvHeader =
    "iteration,cost,train_acc,test_acc,encode_ms,compute_ms,decode_ms,workers_used";
// One CSV row in the header's column order, without a trailing newline.
std::string metrics_csv_row(const IterationMetrics& m);

struct ModelState {
  Eigen::VectorXd w;
  std::size_t t = 0;
  double eta = 0.0;
  std::vector<IterationMetrics> history;  // history.size() == t
};

struct TrainConfig {
  std::size_t J = 25;
  Mode mode = Mode::coded;
  Model model = Model::logistic;
  quantize::QuantizationConfig quant{};  // quant.r is the polynomial degree
  std::size_t K = 1;
  std::size_t T = 1;
  std::size_t N = 7;
  std::uint64_t seed = 0;
  // Step size: eta when given, otherwise eta_scale / L.
  std::optional<double> eta;
  double eta_scale = 1.0;
  double fit_interval = sigmoid_approx::kDefaultInterval;
  std::size_t fit_grid = sigmoid_approx::kDefaultGridSize;
  runtime::ClusterConfig cluster{};  // cluster.N is overwritten with N
  // Compare every decoded gradient with a real-arithmetic shadow and throw
  // QuantizationOverflow on disagreement (field wraparound).
  bool verify_no_wraparound = false;
  // Zero the timing columns so identical runs give identical CSV bytes.
  bool record_timing = true;

  void validate() const;
};

// Cross entropy with predictions clamped to [1e-15, 1 - 1e-15].
double cost(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);
// (1 / 2m) ||X w - y||^2 for the linear model.
double squared_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);
// (1/m) X^T (g(X w) - y).
Eigen::VectorXd true_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

inline constexpr double kProbabilityClamp = 1e-15;

// Largest eigenvalue of X^T X by power iteration to the given relative tolerance.
double largest_eigenvalue_gram(const Eigen::MatrixXd& X, double tolerance = 1e-6);
// 1 / L with L = lambda_max(X^T X) / 4 (logistic) or lambda_max(X^T X) (linear).
double lipschitz_step_size(const Eigen::MatrixXd& X, Model model = Model::logistic);

// Fraction of samples with 1{g(x w) >= 1/2} == y (x w >= 1/2 for the linear model).
double evaluate_accuracy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                         Model model = Model::logistic);

// Everything a quantized training job fixes before its first round.
struct Prepared {
  quantize::QuantizedDataset data;
  sigmoid_approx::PolyApprox approx;
  sigmoid_approx::QuantizedPoly qpoly;
  std::size_t m = 0;  // true sample count (before padding)
  // Signed-integer view of Xbar, kept only when wraparound checks are on.
  std::optional<Eigen::MatrixXd> Xbar_int;
};

Prepared prepare(const Dataset& train, const TrainConfig& cfg);

// Field gradient Xbar^T gbar for one round without any coding, used by the
// approx mode and as the oracle for the coded and mpc modes.
field::FieldMatrix direct_field_gradient(const field::FieldMatrix& Xbar, const field::FieldMatrix& Wbar,
                                         const sigmoid_approx::QuantizedPoly& qpoly, const field::FieldParams& f);

// Streams for the per-round randomness; identical across modes so that
// approx, coded and mpc runs see the same quantized weights.
inline constexpr std::uint64_t kWeightQuantStream = 1;
inline constexpr std::uint64_t kDatasetMaskStream = 2;
inline constexpr std::uint64_t kWeightMaskStream = 3;
inline constexpr std::uint64_t kMpcDatasetStream = 4;
inline constexpr std::uint64_t kMpcWeightStream = 5;
inline constexpr std::uint64_t kMpcProtocolStream = 6;

// Stochastic quantization of w for round t, throwing QuantizationOverflow.
quantize::QuantizedWeights quantize_round_weights(const Eigen::VectorXd& w, const TrainConfig& cfg, std::size_t t);

// Live coded job state: the encoding setup and a cluster holding the dataset shares.
class CodedSession {
 public:
  CodedSession(const Prepared& prep, const TrainConfig& cfg);

  // One coded round: quantize, encode, broadcast, collect, decode, update.
  void round(ModelState& state, const Dataset& train, const Dataset* test);

  [[nodiscard]] const lagrange::EncodingSetup& setup() const noexcept { return setup_; }
  [[nodiscard]] runtime::Cluster& cluster() noexcept { return *cluster_; }
  // Worker indices whose results decoded each round so far.
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& responders() const noexcept { return responders_; }

 private:
  const Prepared& prep_;
  TrainConfig cfg_;
  lagrange::EncodingSetup setup_;
  std::unique_ptr<runtime::Cluster> cluster_;
  std::vector<std::vector<std::size_t>> responders_;
};

// w <- w - (eta / m) (gradient - Xhat^T y) given the decoded field gradient.
void apply_update(ModelState& state, const field::FieldMatrix& decoded, const Prepared& prep,
                  const TrainConfig& cfg);

// Runs J rounds of the configured mode starting from w = 0.
ModelState train(const Dataset& train, const TrainConfig& cfg, const Dataset* test = nullptr);

}  // namespace cpml::trainer
