#include "cpml/experiment.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "cpml/errors.hpp"

namespace cpml::experiment {

void apply_preset(ExperimentSpec& spec) {
  if (spec.preset.empty() || spec.preset == "none") return;
  if (spec.preset == "case1") {
    spec.K = (spec.N - 1) / 3;
    spec.T = 1;
  } else if (spec.preset == "case2") {
    spec.K = (spec.N + 2) / 6;
    spec.T = spec.K;
  } else {
    throw InvalidParameter("unknown preset '" + spec.preset + "' (case1, case2)");
  }
  if (spec.K == 0) throw InvalidParameter("preset " + spec.preset + " gives K = 0 for N = " + std::to_string(spec.N));
}

trainer::TrainConfig to_train_config(const ExperimentSpec& spec) {
  trainer::TrainConfig c;
  c.J = spec.J;
  c.mode = trainer::parse_mode(spec.mode);
  c.model = trainer::parse_model(spec.model);
  c.quant.field = field::FieldParams(spec.p);
  c.quant.lx = spec.lx;
  c.quant.lw = spec.lw;
  c.quant.r = spec.r;
  c.quant.coef_bits = spec.coef_bits;
  c.K = spec.K;
  c.T = spec.T;
  c.N = spec.N;
  c.seed = spec.seed;
  c.eta = spec.eta;
  c.eta_scale = spec.eta_scale;
  c.fit_interval = spec.fit_interval;
  c.verify_no_wraparound = spec.verify_no_wraparound;
  c.record_timing = spec.record_timing;

  auto& cl = c.cluster;
  cl.N = spec.N;
  if (spec.transport == "in_process" || spec.transport == "in-process") {
    cl.transport = runtime::ClusterConfig::TransportKind::in_process;
  } else if (spec.transport == "tcp") {
    cl.transport = runtime::ClusterConfig::TransportKind::tcp;
    cl.worker_addresses = spec.workers;
  } else {
    throw InvalidParameter("unknown transport '" + spec.transport + "' (in_process, tcp)");
  }
  cl.stragglers.kind = runtime::StragglerModel::parse_kind(spec.straggler);
  cl.stragglers.fixed_ms = spec.straggler_ms;
  cl.stragglers.uniform_max_ms = spec.straggler_ms;
  if (spec.straggler_ms > 0.0) cl.stragglers.pareto_scale_ms = spec.straggler_ms;
  cl.stragglers.slow_set = spec.slow_set;
  cl.stragglers.seed = spec.seed;
  if (spec.deadline_ms) {
    cl.deadline = std::chrono::milliseconds(static_cast<std::int64_t>(*spec.deadline_ms));
  }
  return c;
}

data::TrainTest load_data(const ExperimentSpec& spec) {
  if (spec.dataset == "synthetic") {
    data::SyntheticOptions o;
    o.m_train = spec.synthetic_train;
    o.m_test = spec.synthetic_test;
    o.d = spec.synthetic_d;
    o.seed = spec.seed;
    return data::synthetic_blobs(o);
  }
  if (spec.dataset != "mnist") throw InvalidParameter("unknown dataset '" + spec.dataset + "' (mnist, synthetic)");
  std::filesystem::path dir = spec.data_dir;
  if (dir.empty()) {
    auto env = data::data_dir_from_env();
    if (!env) throw FileNotFound("no MNIST directory: pass --data-dir or set CPML_DATA_DIR");
    dir = *env;
  }
  data::MnistOptions o;
  o.class_a = spec.class_a;
  o.class_b = spec.class_b;
  o.limit = spec.limit;
  o.duplicate_columns = spec.duplicate_columns;
  return data::load_mnist_binary(dir, o);
}

std::string manifest_json(const ExperimentSpec& spec, const data::TrainTest& data, const trainer::ModelState& state) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"source", spec.dataset},
                  {"data_dir", spec.data_dir.string()},
                  {"class_a", spec.class_a},
                  {"class_b", spec.class_b},
                  {"limit", spec.limit ? nlohmann::ordered_json(*spec.limit) : nlohmann::ordered_json(nullptr)},
                  {"duplicate_columns", spec.duplicate_columns},
                  {"synthetic_train", spec.synthetic_train},
                  {"synthetic_test", spec.synthetic_test},
                  {"synthetic_d", spec.synthetic_d},
                  {"m_train", data.train.rows()},
                  {"m_test", data.test.rows()},
                  {"d", data.train.cols()}};
  const std::size_t threshold = lagrange::recovery_threshold(spec.K, spec.T, static_cast<std::size_t>(spec.r));
  j["training"] = {{"mode", spec.mode},
                   {"model", spec.model},
                   {"preset", spec.preset},
                   {"N", spec.N},
                   {"K", spec.K},
                   {"T", spec.T},
                   {"r", spec.r},
                   {"p", spec.p},
                   {"lx", spec.lx},
                   {"lw", spec.lw},
                   {"coef_bits", spec.coef_bits},
                   {"eta", spec.eta ? nlohmann::ordered_json(*spec.eta) : nlohmann::ordered_json(nullptr)},
                   {"eta_scale", spec.eta_scale},
                   {"eta_used", state.eta},
                   {"J", spec.J},
                   {"seed", spec.seed},
                   {"fit_interval", spec.fit_interval},
                   {"verify_no_wraparound", spec.verify_no_wraparound},
                   {"recovery_threshold", threshold}};
  j["cluster"] = {{"transport", spec.transport},
                  {"workers", spec.workers},
                  {"straggler", spec.straggler},
                  {"straggler_ms", spec.straggler_ms},
                  {"slow_set", spec.slow_set},
                  {"deadline_ms", spec.deadline_ms ? nlohmann::ordered_json(*spec.deadline_ms)
                                                   : nlohmann::ordered_json(nullptr)}};
  nlohmann::ordered_json result = {{"iterations", state.t}};
  if (!state.history.empty()) {
    const auto& last = state.history.back();
    result["final_cost"] = last.cost;
    result["final_train_acc"] = last.train_acc;
    result["final_test_acc"] = last.test_acc;
  }
  j["result"] = result;
  j["output"] = {{"metrics_csv", spec.output.string()}, {"record_timing", spec.record_timing}};
  return j.dump(2) + "\n";
}

trainer::ModelState run(const ExperimentSpec& input, std::ostream& log) {
  ExperimentSpec spec = input;
  apply_preset(spec);
  const trainer::TrainConfig cfg = to_train_config(spec);
  const data::TrainTest data = load_data(spec);
  log << "dataset " << spec.dataset << ": " << data.train.rows() << " train / " << data.test.rows() << " test, d = "
      << data.train.cols() << "\n";
  log << "mode " << spec.mode << ", N = " << spec.N << ", K = " << spec.K << ", T = " << spec.T << ", r = " << spec.r
      << ", J = " << spec.J << "\n";

  const trainer::ModelState state = trainer::train(data.train, cfg, &data.test);

  if (!spec.output.parent_path().empty()) std::filesystem::create_directories(spec.output.parent_path());
  std::ofstream csv(spec.output, std::ios::binary);
  if (!csv) throw FileNotFound("cannot write " + spec.output.string());
  csv << trainer::kMetricsCsvHeader << "\n";
  for (const auto& m : state.history) csv << trainer::metrics_csv_row(m) << "\n";

  std::filesystem::path manifest = spec.manifest;
  if (manifest.empty()) manifest = std::filesystem::path(spec.output).replace_extension(".json");
  std::ofstream mf(manifest, std::ios::binary);
  if (!mf) throw FileNotFound("cannot write " + manifest.string());
  mf << manifest_json(spec, data, state);

  if (!state.history.empty()) {
    const auto& last = state.history.back();
    log << "final: cost " << last.cost << ", train acc " << last.train_acc << ", test acc " << last.test_acc << "\n";
  }
  log << "eta " << state.eta << "; wrote " << spec.output.string() << " and " << manifest.string() << "\n";
  return state;
}

}  // namespace cpml::experiment
