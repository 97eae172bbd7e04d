#include "cpml/verify.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "cpml/errors.hpp"
#include "cpml/field.hpp"
#include "cpml/lagrange.hpp"
#include "cpml/mpc_baseline.hpp"
#include "cpml/runtime.hpp"
#include "cpml/serialization.hpp"
#include "cpml/sigmoid_approx.hpp"
#include "cpml/wire.hpp"

namespace cpml::verify {

namespace {

using field::FieldMatrix;
using field::FieldParams;

struct Instance {
  std::size_t m, d, K, T, N;
  int r;
  FieldMatrix Xbar, Wbar;
  sigmoid_approx::QuantizedPoly qpoly;
  lagrange::EncodingSetup setup;
  std::vector<lagrange::WorkerResult> results;  // all N, in worker order
};

Instance random_instance(Rng& rng, const FieldParams& f) {
  Instance in;
  in.K = 1 + rng.uniform_below(4);
  in.T = rng.uniform_below(4);
  in.r = 1 + static_cast<int>(rng.uniform_below(2));
  in.m = in.K * (2 + rng.uniform_below(15));
  in.d = 2 + rng.uniform_below(15);
  const std::size_t threshold = lagrange::recovery_threshold(in.K, in.T, static_cast<std::size_t>(in.r));
  in.N = threshold + rng.uniform_below(4);
  in.Xbar = field::uniform_matrix(in.m, in.d, f, rng);
  in.Wbar = field::uniform_matrix(in.d, static_cast<std::size_t>(in.r), f, rng);
  in.qpoly.r = in.r;
  for (int i = 0; i <= in.r; ++i) in.qpoly.cbar.push_back({static_cast<std::uint32_t>(rng.uniform_below(f.p()))});
  in.setup = lagrange::make_setup(in.K, in.T, in.N, static_cast<std::size_t>(in.r), f);
  const auto Z = lagrange::draw_masks(in.T, in.m / in.K, in.d, f, rng);
  const auto V = lagrange::draw_masks(in.T, in.d, static_cast<std::size_t>(in.r), f, rng);
  const auto xs = lagrange::encode_dataset(in.Xbar, in.setup, Z);
  const auto ws = lagrange::encode_weights(in.Wbar, in.setup, V);
  for (std::size_t i = 0; i < in.N; ++i) {
    in.results.push_back({i, sigmoid_approx::worker_gradient_fn(xs[i].Xtilde, ws[i].Wtilde, in.qpoly, f)});
  }
  return in;
}

FieldMatrix direct_gradient(const Instance& in, const FieldParams& f) {
  const std::size_t rows = in.m / in.K;
  FieldMatrix acc(in.d, 1);
  for (std::size_t k = 0; k < in.K; ++k) {
    acc = field::add(acc, sigmoid_approx::worker_gradient_fn(in.Xbar.row_block(k * rows, rows), in.Wbar, in.qpoly, f), f);
  }
  return acc;
}

std::vector<lagrange::WorkerResult> random_subset(const Instance& in, std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(in.N);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) std::swap(order[i], order[i + rng.uniform_below(order.size() - i)]);
  std::vector<lagrange::WorkerResult> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(in.results[order[i]]);
  return out;
}

SuiteResult suite_decode(std::uint64_t seed, std::size_t instances, bool sharpness) {
  const FieldParams f;
  Rng rng(seed, sharpness ? 11 : 10);
  SuiteResult res{sharpness ? "threshold" : "decode-vs-direct", true, 0, ""};
  for (std::size_t n = 0; n < instances && res.passed; ++n) {
    const Instance in = random_instance(rng, f);
    const FieldMatrix expected = direct_gradient(in, f);
    const std::size_t threshold = in.setup.threshold();
    for (int s = 0; s < 5; ++s) {
      ++res.cases;
      if (sharpness) {
        const auto short_set = random_subset(in, threshold - 1, rng);
        bool refused = false;
        try {
          (void)lagrange::decode_gradient(short_set, in.setup);
        } catch (const NotEnoughResults&) {
          refused = true;
        }
        if (!refused) {
          res.passed = false;
          res.detail = "decode accepted threshold - 1 results";
          break;
        }
      }
      const auto subset = random_subset(in, threshold, rng);
      if (lagrange::decode_gradient(subset, in.setup) != expected) {
        res.passed = false;
        res.detail = "mismatch at K=" + std::to_string(in.K) + " T=" + std::to_string(in.T) + " r=" +
                     std::to_string(in.r) + " N=" + std::to_string(in.N);
        break;
      }
    }
  }
  return res;
}

SuiteResult suite_mds(std::uint64_t seed, std::size_t instances) {
  const FieldParams f;
  Rng rng(seed, 12);
  SuiteResult res{"mds", true, 0, ""};
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t K = 1 + rng.uniform_below(4), T = 1 + rng.uniform_below(3);
    const std::size_t r = 1 + rng.uniform_below(2);
    const std::size_t N = lagrange::recovery_threshold(K, T, r) + rng.uniform_below(4);
    const auto setup = lagrange::make_setup(K, T, N, r, f);
    const auto report = lagrange::check_privacy_structure(setup, seed + n);
    res.cases += report.subsets_checked;
    if (!report.ok()) {
      res.passed = false;
      res.detail = std::to_string(report.singular_subsets.size()) + " singular subsets";
      break;
    }
  }
  return res;
}

SuiteResult suite_shamir(std::uint64_t seed, std::size_t instances) {
  const FieldParams f;
  Rng rng(seed, 13);
  SuiteResult res{"shamir", true, 0, ""};
  for (std::size_t n = 0; n < instances && res.passed; ++n) {
    const std::size_t T = rng.uniform_below(4);
    const std::size_t N = 2 * T + 1 + rng.uniform_below(4);
    const auto cfg = mpc::MpcConfig::make(N, T, f);
    const FieldMatrix a = field::uniform_matrix(3, 2, f, rng), b = field::uniform_matrix(3, 2, f, rng);
    const auto sa = mpc::shamir_share(a, T, cfg.points, f, rng);
    const auto sb = mpc::shamir_share(b, T, cfg.points, f, rng);
    const auto prod = mpc::share_mul(sa, sb, cfg, rng);
    ++res.cases;
    std::vector<mpc::ShamirShare> tail(sa.end() - static_cast<std::ptrdiff_t>(T + 1), sa.end());
    if (mpc::reconstruct(tail, T, f) != a || mpc::reconstruct(prod, T, f) != field::hadamard(a, b, f) ||
        !mpc::check_shamir_privacy(cfg, seed).ok()) {
      res.passed = false;
      res.detail = "Shamir check failed at N=" + std::to_string(N) + " T=" + std::to_string(T);
    }
  }
  return res;
}

SuiteResult suite_cross_scheme(std::uint64_t seed, std::size_t instances) {
  const FieldParams f;
  Rng rng(seed, 14);
  SuiteResult res{"cross-scheme", true, 0, ""};
  for (std::size_t n = 0; n < instances && res.passed; ++n) {
    Instance in = random_instance(rng, f);
    const std::size_t T = std::min<std::size_t>(in.T, 2);
    const auto cfg = mpc::MpcConfig::make(2 * T + 1 + rng.uniform_below(3), T, f);
    const auto ds = mpc::share_dataset(in.Xbar, in.K, cfg, rng);
    const auto ws = mpc::shamir_share(in.Wbar, T, cfg.points, f, rng);
    const FieldMatrix via_mpc = mpc::mpc_gradient_round(ds, ws, in.qpoly, cfg, seed + n);
    const auto subset = random_subset(in, in.setup.threshold(), rng);
    ++res.cases;
    if (via_mpc != lagrange::decode_gradient(subset, in.setup)) {
      res.passed = false;
      res.detail = "MPC and coded gradients differ";
    }
  }
  return res;
}

SuiteResult suite_wire(std::uint64_t seed, std::size_t instances) {
  const FieldParams f;
  Rng rng(seed, 15);
  SuiteResult res{"wire", true, 0, ""};
  for (std::size_t n = 0; n < instances && res.passed; ++n) {
    const FieldMatrix a = field::uniform_matrix(1 + rng.uniform_below(9), 1 + rng.uniform_below(9), f, rng);
    const FieldMatrix b = field::uniform_matrix(1, 1 + rng.uniform_below(5), f, rng);
    const wire::Frame frame{wire::MessageKind::RoundWeights, static_cast<std::uint32_t>(rng()), {a, b}};
    const wire::Frame back = wire::decode_frame(wire::encode_frame(frame));
    ++res.cases;
    if (back.kind != frame.kind || back.round != frame.round || back.payload != frame.payload ||
        serialization::deserialize_matrix(serialization::serialize_matrix(a), f) != a) {
      res.passed = false;
      res.detail = "frame round trip changed the content";
    }
  }
  return res;
}

}  // namespace

std::vector<SuiteResult> run_all(std::uint64_t seed, std::size_t instances) {
  return {suite_decode(seed, instances, false), suite_decode(seed, instances, true), suite_mds(seed, instances),
          suite_shamir(seed, instances), suite_cross_scheme(seed, std::max<std::size_t>(1, instances / 4)),
          suite_wire(seed, instances)};
}

std::vector<OpCountRow> operation_counts(std::span<const std::size_t> Ks, std::size_t m, std::size_t d, int r,
                                         std::size_t T, std::size_t N, std::uint64_t seed) {
  const FieldParams f;
  std::vector<OpCountRow> rows;
  for (std::size_t K : Ks) {
    Rng rng(seed, K);
    const auto ru = static_cast<std::size_t>(r);
    const auto setup = lagrange::make_setup(K, T, N, ru, f);
    const FieldMatrix Xbar = lagrange::pad_rows(field::uniform_matrix(m, d, f, rng), K);
    const FieldMatrix Wbar = field::uniform_matrix(d, ru, f, rng);
    sigmoid_approx::QuantizedPoly q;
    q.r = r;
    for (int i = 0; i <= r; ++i) q.cbar.push_back({static_cast<std::uint32_t>(1 + rng.uniform_below(f.p() - 1))});

    runtime::ClusterConfig cc;
    cc.N = N;
    runtime::Cluster cluster(cc, f);
    cluster.distribute_shares(
        lagrange::encode_dataset(Xbar, setup, lagrange::draw_masks(T, Xbar.rows() / K, d, f, rng)));
    const auto rr = cluster.round_trip(0, lagrange::encode_weights(Wbar, setup, lagrange::draw_masks(T, d, ru, f, rng)),
                                       q, setup.threshold());
    double worker = 0.0;
    for (const auto& res : rr.results) worker += static_cast<double>(res.mul_count);
    worker /= static_cast<double>(rr.results.size());

    const auto mc = mpc::MpcConfig::make(N, T, f);
    mpc::MpcRoundStats stats;
    (void)mpc::mpc_gradient_round(mpc::share_dataset(Xbar, K, mc, rng), mpc::shamir_share(Wbar, T, mc.points, f, rng), q,
                                  mc, seed, &stats);
    double party = 0.0;
    for (auto c : stats.party_mul_counts) party += static_cast<double>(c);
    party /= static_cast<double>(stats.party_mul_counts.size());
    rows.push_back({K, N, setup.threshold(), worker, party});
  }
  return rows;
}

void print_op_table(std::ostream& out, std::span<const OpCountRow> rows) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%4s %4s %10s %16s %16s %12s %12s\n", "K", "N", "threshold", "worker_muls",
                "mpc_party_muls", "worker*K/ref", "mpc/ref");
  out << buf;
  if (rows.empty()) return;
  const double ref_w = rows.front().worker_muls * static_cast<double>(rows.front().K);
  const double ref_p = rows.front().mpc_party_muls;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%4zu %4zu %10zu %16.0f %16.0f %12.4f %12.4f\n", r.K, r.N, r.threshold,
                  r.worker_muls, r.mpc_party_muls, r.worker_muls * static_cast<double>(r.K) / ref_w,
                  r.mpc_party_muls / ref_p);
    out << buf;
  }
}

}  // namespace cpml::verify
