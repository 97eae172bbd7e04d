#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpml/dataset.hpp"
#include "cpml/runtime.hpp"
#include "cpml/trainer.hpp"

namespace cpml::experiment {

struct ExperimentSpec {
  // data
  std::string dataset = "mnist";  // mnist | synthetic
  std::filesystem::path data_dir;  // empty: CPML_DATA_DIR
  int class_a = 3;
  int class_b = 7;
  std::optional<std::size_t> limit;
  bool duplicate_columns = false;
  std::size_t synthetic_train = 400;
  std::size_t synthetic_test = 200;
  std::size_t synthetic_d = 2;

  // training
  std::string mode = "coded";
  std::string model = "logistic";
  std::string preset;  // "", case1, case2
  std::size_t N = 7;
  std::size_t K = 1;
  std::size_t T = 1;
  int r = 1;
  std::uint64_t p = field::kDefaultPrime;
  int lx = 2;
  int lw = 4;
  int coef_bits = 0;
  std::optional<double> eta;
  double eta_scale = 1.0;
  std::size_t J = 25;
  std::uint64_t seed = 0;
  double fit_interval = sigmoid_approx::kDefaultInterval;
  bool verify_no_wraparound = false;

  // cluster
  std::string transport = "in_process";  // in_process | tcp
  std::vector<std::string> workers;       // tcp worker addresses
  std::string straggler = "none";         // none | fixed | uniform | heavy_tail
  double straggler_ms = 0.0;              // fixed delay, uniform upper bound, or Pareto scale
  std::vector<std::size_t> slow_set;
  std::optional<double> deadline_ms;

  // output
  std::filesystem::path output = "metrics.csv";
  std::filesystem::path manifest;  // empty: output with a .json extension
  bool record_timing = true;
};

// case1: K = floor((N - 1) / 3), T = 1. case2: K = T = floor((N + 2) / 6).
// Throws InvalidParameter on an unknown preset or a preset that leaves K = 0.
void apply_preset(ExperimentSpec& spec);

trainer::TrainConfig to_train_config(const ExperimentSpec& spec);

data::TrainTest load_data(const ExperimentSpec& spec);

// Trains, then writes the metrics CSV and a JSON manifest listing every
// parameter. Returns the final model state.
trainer::ModelState run(const ExperimentSpec& spec, std::ostream& log);

// The manifest as a JSON string (exposed for tests).
std::string manifest_json(const ExperimentSpec& spec, const data::TrainTest& data, const trainer::ModelState& state);

}  // namespace cpml::experiment
