#include "cpml/mpc_baseline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <string>
#include <thread>

#include "cpml/errors.hpp"
#include "cpml/runtime.hpp"
#include "cpml/wire.hpp"

namespace cpml::mpc {

namespace {

void require_distinct(std::span<const FieldElement> points) {
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (points[i] == points[j]) {
        throw DuplicateEvaluationPoint("party point " + std::to_string(points[i].value) + " repeats");
      }
}

// One party's degree-T resharing of its local value: entry i goes to party i.
std::vector<FieldMatrix> reshare(const FieldMatrix& local, const MpcConfig& config, Rng& rng) {
  std::vector<FieldMatrix> masks;
  for (std::size_t t = 0; t < config.T; ++t) masks.push_back(field::uniform_matrix(local.rows(), local.cols(), config.field, rng));
  std::vector<FieldMatrix> out;
  for (auto& s : shamir_share_with_masks(local, masks, config.points, config.field)) out.push_back(std::move(s.value));
  return out;
}

// sum_i lambda_i * incoming_i: the recipient's degree-T share of the product.
FieldMatrix recombine(const std::vector<FieldMatrix>& incoming, std::span<const FieldElement> lambdas,
                      const FieldParams& f) {
  FieldMatrix acc(incoming.front().rows(), incoming.front().cols());
  for (std::size_t i = 0; i < incoming.size(); ++i) field::axpy(acc, lambdas[i], incoming[i], f);
  return acc;
}

void require_degree_reduction(const MpcConfig& config) {
  if (config.N < 2 * config.T + 1) {
    throw InsufficientParties("degree reduction needs N >= 2T + 1, have N = " + std::to_string(config.N) +
                              ", T = " + std::to_string(config.T));
  }
}

}  // namespace

MpcConfig MpcConfig::make(std::size_t N, std::size_t T, const FieldParams& f) {
  MpcConfig c;
  c.N = N;
  c.T = T;
  c.field = f;
  for (std::size_t i = 1; i <= N; ++i) c.points.push_back(f.from_int(static_cast<std::int64_t>(i)));
  c.validate();
  return c;
}

void MpcConfig::validate() const {
  if (N == 0) throw InsufficientParties("no parties");
  if (2 * T + 1 > N) {
    throw InsufficientParties("T = " + std::to_string(T) + " exceeds floor((N - 1) / 2) for N = " + std::to_string(N));
  }
  if (points.size() != N) throw InvalidParameter("need one evaluation point per party");
  require_distinct(points);
  for (auto x : points)
    if (x.value == 0) throw InvalidParameter("party point 0 would reveal the secret");
}

std::vector<ShamirShare> shamir_share_with_masks(const FieldMatrix& secret, std::span<const FieldMatrix> masks,
                                                 std::span<const FieldElement> points, const FieldParams& f) {
  require_distinct(points);
  std::vector<ShamirShare> out;
  out.reserve(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    // Horner in z: (((R_T z + R_{T-1}) z + ...) z + secret).
    FieldMatrix acc(secret.rows(), secret.cols());
    for (std::size_t t = masks.size(); t > 0; --t) {
      if (masks[t - 1].rows() != secret.rows() || masks[t - 1].cols() != secret.cols()) {
        throw DimensionMismatch("mask shape differs from the secret");
      }
      acc = field::add(field::scale(acc, points[j], f), masks[t - 1], f);
    }
    acc = field::add(field::scale(acc, points[j], f), secret, f);
    out.push_back(ShamirShare{j, points[j], std::move(acc)});
  }
  return out;
}

std::vector<ShamirShare> shamir_share(const FieldMatrix& secret, std::size_t T, std::span<const FieldElement> points,
                                      const FieldParams& f, Rng& rng) {
  std::vector<FieldMatrix> masks;
  for (std::size_t t = 0; t < T; ++t) masks.push_back(field::uniform_matrix(secret.rows(), secret.cols(), f, rng));
  return shamir_share_with_masks(secret, masks, points, f);
}

std::vector<FieldElement> zero_lagrange_weights(std::span<const FieldElement> xs, const FieldParams& f) {
  require_distinct(xs);
  std::vector<FieldElement> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    FieldElement num{1}, den{1};
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (k == i) continue;
      num = f.mul(num, f.neg(xs[k]));
      den = f.mul(den, f.sub(xs[i], xs[k]));
    }
    out.push_back(f.mul(num, f.inv(den)));
  }
  return out;
}

FieldMatrix reconstruct(std::span<const ShamirShare> shares, std::size_t degree, const FieldParams& f) {
  if (shares.size() < degree + 1) {
    throw NotEnoughShares("degree " + std::to_string(degree) + " needs " + std::to_string(degree + 1) +
                          " shares, got " + std::to_string(shares.size()));
  }
  std::vector<FieldElement> xs;
  for (std::size_t i = 0; i <= degree; ++i) xs.push_back(shares[i].eval_point);
  const auto lambdas = zero_lagrange_weights(xs, f);
  FieldMatrix acc(shares.front().value.rows(), shares.front().value.cols());
  for (std::size_t i = 0; i <= degree; ++i) field::axpy(acc, lambdas[i], shares[i].value, f);
  return acc;
}

std::vector<ShamirShare> share_mul(std::span<const ShamirShare> a, std::span<const ShamirShare> b,
                                   const MpcConfig& config, Rng& rng) {
  require_degree_reduction(config);
  if (a.size() != config.N || b.size() != config.N) {
    throw NotEnoughShares("share_mul needs one share per party from both operands");
  }
  const auto lambdas = zero_lagrange_weights(config.points, config.field);
  std::vector<std::vector<FieldMatrix>> sent(config.N);
  for (std::size_t i = 0; i < config.N; ++i) {
    Rng party_rng = rng.derive(i);
    sent[i] = reshare(field::hadamard(a[i].value, b[i].value, config.field), config, party_rng);
  }
  std::vector<ShamirShare> out;
  for (std::size_t j = 0; j < config.N; ++j) {
    std::vector<FieldMatrix> incoming;
    for (std::size_t i = 0; i < config.N; ++i) incoming.push_back(sent[i][j]);
    out.push_back(ShamirShare{j, config.points[j], recombine(incoming, lambdas, config.field)});
  }
  return out;
}

MpcDatasetShares share_dataset(const FieldMatrix& Xbar, std::size_t K, const MpcConfig& config, Rng& rng) {
  if (K == 0) throw InvalidParameter("K must be at least 1");
  MpcDatasetShares out;
  out.K = K;
  out.rows = Xbar.rows();
  const FieldMatrix padded = lagrange::pad_rows(Xbar, K);
  const std::size_t block_rows = padded.rows() / K;
  for (std::size_t k = 0; k < K; ++k) {
    Rng block_rng = rng.derive(k);
    out.blocks.push_back(shamir_share(padded.row_block(k * block_rows, block_rows), config.T, config.points,
                                      config.field, block_rng));
  }
  return out;
}

namespace {

// A party's view of the mesh: its own inbox plus everyone's, for sending.
class PartyLink {
 public:
  PartyLink(std::size_t self, std::vector<runtime::Mailbox>& inboxes, std::atomic<std::uint64_t>& bytes)
      : self_(self), inboxes_(inboxes), bytes_(bytes) {}

  // Sends share i to party i, waits for the N - 1 shares addressed to us for
  // this layer. Frames from a later layer are kept for later.
  std::vector<FieldMatrix> exchange(std::uint32_t layer, std::vector<FieldMatrix> outgoing) {
    const std::size_t N = inboxes_.size();
    std::vector<FieldMatrix> incoming(N);
    for (std::size_t i = 0; i < N; ++i) {
      if (i == self_) continue;
      auto bytes = wire::encode_frame(wire::Frame{wire::MessageKind::Reshare, layer, {outgoing[i]}});
      bytes_ += bytes.size();
      inboxes_[i].push(runtime::Envelope{self_, std::move(bytes)});
    }
    incoming[self_] = std::move(outgoing[self_]);
    std::size_t have = 1;
    auto& stash = early_[layer];
    for (auto& [from, m] : stash) {
      incoming[from] = std::move(m);
      ++have;
    }
    early_.erase(layer);
    while (have < N) {
      auto env = inboxes_[self_].pop();
      if (!env) throw ProtocolViolation("party mesh closed during layer " + std::to_string(layer));
      wire::Frame f = wire::decode_frame(env->bytes);
      if (f.kind != wire::MessageKind::Reshare || f.payload.size() != 1) {
        throw ProtocolViolation("party " + std::to_string(self_) + " expected a Reshare frame");
      }
      if (f.round == layer) {
        incoming[env->from] = std::move(f.payload[0]);
        ++have;
      } else if (f.round > layer) {
        early_[f.round].emplace_back(env->from, std::move(f.payload[0]));
      } else {
        throw ProtocolViolation("stale Reshare for layer " + std::to_string(f.round));
      }
    }
    return incoming;
  }

 private:
  std::size_t self_;
  std::vector<runtime::Mailbox>& inboxes_;
  std::atomic<std::uint64_t>& bytes_;
  std::map<std::uint32_t, std::vector<std::pair<std::size_t, FieldMatrix>>> early_;
};

}  // namespace

FieldMatrix mpc_gradient_round(const MpcDatasetShares& dataset, std::span<const ShamirShare> weight_shares,
                               const sigmoid_approx::QuantizedPoly& qpoly, const MpcConfig& config,
                               std::uint64_t seed, MpcRoundStats* stats) {
  config.validate();
  require_degree_reduction(config);
  const std::size_t N = config.N, K = dataset.K;
  const auto r = static_cast<std::size_t>(qpoly.r);
  if (dataset.blocks.size() != K || weight_shares.size() != N) {
    throw NotEnoughShares("mpc round needs K dataset sharings and one weight share per party");
  }
  for (const auto& block : dataset.blocks)
    if (block.size() != N) throw NotEnoughShares("every dataset block needs one share per party");
  if (r < 1 || qpoly.cbar.size() != r + 1) throw DimensionMismatch("coefficient count does not match r");

  const FieldParams& f = config.field;
  const auto lambdas = zero_lagrange_weights(config.points, f);
  std::vector<runtime::Mailbox> inboxes(N);
  std::atomic<std::uint64_t> bytes{0};
  std::vector<ShamirShare> outputs(N);
  std::vector<std::uint64_t> muls(N, 0);
  std::vector<std::exception_ptr> errors(N);
  const auto start = std::chrono::steady_clock::now();

  auto party = [&](std::size_t j) {
    try {
      const field::MulCountScope counter;
      PartyLink link(j, inboxes, bytes);
      Rng rng = Rng(seed, 0x4D5043).derive(j);
      std::uint32_t layer = 0;
      auto reduce = [&](const FieldMatrix& local) {
        Rng layer_rng = rng.derive(layer);
        auto incoming = link.exchange(layer++, reshare(local, config, layer_rng));
        return recombine(incoming, lambdas, f);
      };

      const FieldMatrix& W = weight_shares[j].value;
      if (W.cols() != r) throw DimensionMismatch("weight share has the wrong number of columns");
      const std::size_t block_rows = dataset.blocks.front()[j].value.rows();
      // Z = X W for all blocks at once, stacked by rows; one reduction.
      FieldMatrix Zlocal(block_rows * K, r);
      for (std::size_t k = 0; k < K; ++k) {
        const FieldMatrix Zk = field::matmul(dataset.blocks[k][j].value, W, f);
        std::copy(Zk.data().begin(), Zk.data().end(), Zlocal.data().begin() + static_cast<std::ptrdiff_t>(k * Zk.size()));
      }
      const FieldMatrix Z = reduce(Zlocal);

      FieldMatrix gbar(Z.rows(), 1);
      for (auto& v : gbar.data()) v = qpoly.cbar[0].value;
      FieldMatrix product = Z.column(0);
      field::axpy(gbar, qpoly.cbar[1], product, f);
      for (std::size_t i = 2; i <= r; ++i) {
        product = reduce(field::hadamard(product, Z.column(i - 1), f));
        field::axpy(gbar, qpoly.cbar[i], product, f);
      }

      // Degree 2T output share of sum_k X_k^T gbar_k.
      FieldMatrix G(dataset.blocks.front()[j].value.cols(), 1);
      for (std::size_t k = 0; k < K; ++k) {
        G = field::add(G, field::matmul_tn(dataset.blocks[k][j].value, gbar.row_block(k * block_rows, block_rows), f), f);
      }
      outputs[j] = ShamirShare{j, config.points[j], std::move(G)};
      muls[j] = counter.elapsed();
      if (j == 0 && stats != nullptr) stats->reshare_layers = layer;
    } catch (...) {
      errors[j] = std::current_exception();
      for (auto& box : inboxes) box.close();
    }
  };

  std::vector<std::thread> threads;
  for (std::size_t j = 0; j < N; ++j) threads.emplace_back(party, j);
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  FieldMatrix result = reconstruct(outputs, 2 * config.T, f);
  if (stats != nullptr) {
    stats->party_mul_counts = muls;
    stats->bytes_exchanged = bytes;
    stats->elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return result;
}

lagrange::PrivacyReport check_shamir_privacy(const MpcConfig& config, std::uint64_t seed) {
  FieldMatrix rows(config.T, config.N);
  for (std::size_t j = 0; j < config.N; ++j) {
    FieldElement power = config.points[j];
    for (std::size_t t = 0; t < config.T; ++t) {
      rows(t, j) = power.value;
      power = config.field.mul(power, config.points[j]);
    }
  }
  return lagrange::check_square_submatrices(rows, config.field, seed);
}

}  // namespace cpml::mpc
