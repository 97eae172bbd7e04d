#include "cpml/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>

#include "cpml/errors.hpp"
#include "cpml/rng.hpp"

namespace cpml::runtime {

namespace {

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

FieldMatrix counters_matrix(std::uint64_t muls, std::uint64_t compute_us) {
  FieldMatrix c(1, 4);
  c(0, 0) = static_cast<std::uint32_t>(muls);
  c(0, 1) = static_cast<std::uint32_t>(muls >> 32);
  c(0, 2) = static_cast<std::uint32_t>(compute_us);
  c(0, 3) = static_cast<std::uint32_t>(compute_us >> 32);
  return c;
}

std::string list_workers(const std::set<std::size_t>& workers) {
  std::string out;
  for (std::size_t w : workers) {
    if (!out.empty()) out += ", ";
    out += std::to_string(w);
  }
  return out;
}

}  // namespace

void Mailbox::push(Envelope e) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    queue_.push_back(std::move(e));
  }
  cv_.notify_one();
}

std::optional<Envelope> Mailbox::pop(std::optional<Clock::time_point> deadline) {
  std::unique_lock lock(mu_);
  auto ready = [&] { return closed_ || !queue_.empty(); };
  if (deadline) {
    if (!cv_.wait_until(lock, *deadline, ready)) return std::nullopt;
  } else {
    cv_.wait(lock, ready);
  }
  if (queue_.empty()) return std::nullopt;
  Envelope e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

void Mailbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::chrono::microseconds StragglerModel::delay(std::size_t worker, std::uint32_t round) const {
  if (kind == Kind::none) return {};
  if (!slow_set.empty() && std::find(slow_set.begin(), slow_set.end(), worker) == slow_set.end()) return {};
  Rng rng = Rng(seed, 0x57A6u).derive(worker).derive(round);
  double ms = 0.0;
  switch (kind) {
    case Kind::none: break;
    case Kind::fixed: ms = fixed_ms; break;
    case Kind::uniform: ms = uniform_min_ms + (uniform_max_ms - uniform_min_ms) * rng.uniform01(); break;
    case Kind::heavy_tail: {
      // Pareto(scale, shape) by inversion; 1 - u lies in (0, 1].
      const double u = 1.0 - rng.uniform01();
      ms = std::min(cap_ms, pareto_scale_ms / std::pow(u, 1.0 / pareto_shape));
      break;
    }
  }
  return std::chrono::microseconds(static_cast<std::int64_t>(std::max(0.0, ms) * 1000.0));
}

StragglerModel::Kind StragglerModel::parse_kind(const std::string& name) {
  if (name == "none") return Kind::none;
  if (name == "fixed") return Kind::fixed;
  if (name == "uniform") return Kind::uniform;
  if (name == "heavy_tail" || name == "heavy-tail") return Kind::heavy_tail;
  throw InvalidParameter("unknown straggler model '" + name + "'");
}

std::string StragglerModel::kind_name(Kind kind) {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::fixed: return "fixed";
    case Kind::uniform: return "uniform";
    case Kind::heavy_tail: return "heavy_tail";
  }
  return "none";
}

std::optional<wire::Frame> WorkerState::handle(const wire::Frame& msg) {
  using wire::MessageKind;
  switch (msg.kind) {
    case MessageKind::SetupShare: {
      if (msg.payload.size() != 2 || msg.payload[0].rows() != 1 || msg.payload[0].cols() != 2) {
        throw ProtocolViolation("SetupShare needs a (p, worker) header and one share");
      }
      const FieldParams f(msg.payload[0](0, 0));
      const bool same = field_ && field_->p() == f.p() && Xtilde_ && *Xtilde_ == msg.payload[1];
      if (!same) {
        field_ = f;
        Xtilde_ = msg.payload[1];
        qpoly_.reset();
        last_round_.reset();
        ++setups_accepted_;
      }
      return wire::Frame{MessageKind::Ack, msg.round, {}};
    }
    case MessageKind::Coefficients: {
      if (!field_) throw ProtocolViolation("Coefficients before SetupShare");
      if (msg.payload.size() != 1 || msg.payload[0].rows() != 1 || msg.payload[0].cols() < 2) {
        throw ProtocolViolation("Coefficients needs one 1 x (r+1) row");
      }
      sigmoid_approx::QuantizedPoly q;
      q.r = static_cast<int>(msg.payload[0].cols()) - 1;
      for (std::uint32_t v : msg.payload[0].data()) q.cbar.push_back({v});
      qpoly_ = std::move(q);
      return wire::Frame{MessageKind::Ack, msg.round, {}};
    }
    case MessageKind::RoundWeights: {
      if (!Xtilde_) throw ProtocolViolation("RoundWeights for round " + std::to_string(msg.round) + " before SetupShare");
      if (!qpoly_) throw ProtocolViolation("RoundWeights before Coefficients");
      if (last_round_ && msg.round == *last_round_) return std::nullopt;
      const std::uint32_t expected = last_round_ ? *last_round_ + 1 : 0;
      if (msg.round != expected) {
        throw ProtocolViolation("round " + std::to_string(msg.round) + " out of order, expected " +
                                std::to_string(expected));
      }
      if (msg.payload.size() != 1) throw ProtocolViolation("RoundWeights needs exactly one share");
      const auto start = Clock::now();
      const field::MulCountScope muls;
      FieldMatrix value = sigmoid_approx::worker_gradient_fn(*Xtilde_, msg.payload[0], *qpoly_, *field_);
      const auto us = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
      last_round_ = msg.round;
      ++rounds_computed_;
      return wire::Frame{MessageKind::Result, msg.round,
                         {std::move(value), counters_matrix(muls.elapsed(), static_cast<std::uint64_t>(us))}};
    }
    case MessageKind::Shutdown:
      shutdown_ = true;
      return std::nullopt;
    default:
      throw ProtocolViolation("worker cannot handle " + wire::kind_name(msg.kind));
  }
}

InProcessTransport::InProcessTransport(std::size_t N, StragglerModel stragglers) : stragglers_(std::move(stragglers)) {
  workers_.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    workers_.push_back(std::make_unique<Worker>());
    workers_.back()->state = WorkerState(i);
  }
  for (std::size_t i = 0; i < N; ++i) workers_[i]->thread = std::thread([this, i] { run_worker(i); });
}

InProcessTransport::~InProcessTransport() { shutdown(); }

void InProcessTransport::sleep_interruptible(std::chrono::microseconds d) {
  std::unique_lock lock(stop_mu_);
  stop_cv_.wait_for(lock, d, [&] { return stopping_.load(); });
}

void InProcessTransport::run_worker(std::size_t index) {
  Worker& w = *workers_[index];
  while (auto env = w.inbox.pop()) {
    if (stopping_) break;
    if (w.crashed) continue;
    std::optional<wire::Frame> reply;
    std::uint32_t round = 0;
    try {
      const wire::Frame msg = wire::decode_frame(env->bytes);
      round = msg.round;
      reply = w.state.handle(msg);
      w.setups = w.state.setups_accepted();
      w.rounds = w.state.rounds_computed();
      if (w.state.shutdown_requested()) break;
      if (reply && reply->kind == wire::MessageKind::Result) {
        const auto d = stragglers_.delay(index, msg.round);
        if (d.count() > 0) sleep_interruptible(d);
      }
    } catch (const std::exception& e) {
      reply = wire::error_frame(round, e.what());
    }
    if (reply && !w.crashed) to_master_.push(Envelope{index, wire::encode_frame(*reply)});
  }
}

void InProcessTransport::send(std::size_t worker, const wire::Frame& frame) {
  if (worker >= workers_.size()) throw WorkerUnreachable("worker " + std::to_string(worker) + " does not exist");
  Worker& w = *workers_[worker];
  if (w.unreachable || w.inbox.closed()) throw WorkerUnreachable("worker " + std::to_string(worker) + " is unreachable");
  auto bytes = wire::encode_frame(frame);
  bytes_sent_ += bytes.size();
  w.inbox.push(Envelope{0, std::move(bytes)});
}

std::optional<Incoming> InProcessTransport::receive(std::optional<Clock::time_point> deadline) {
  auto env = to_master_.pop(deadline);
  if (!env) return std::nullopt;
  return Incoming{env->from, wire::decode_frame(env->bytes)};
}

void InProcessTransport::shutdown() {
  {
    std::lock_guard lock(stop_mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  stop_cv_.notify_all();
  for (auto& w : workers_) w->inbox.close();
  for (auto& w : workers_) {
    if (w->thread.joinable()) w->thread.join();
  }
  to_master_.close();
}

void InProcessTransport::set_crashed(std::size_t worker, bool crashed) { workers_.at(worker)->crashed = crashed; }

void InProcessTransport::set_unreachable(std::size_t worker, bool unreachable) {
  workers_.at(worker)->unreachable = unreachable;
}

std::size_t InProcessTransport::setups_accepted(std::size_t worker) const { return workers_.at(worker)->setups; }

std::size_t InProcessTransport::rounds_computed(std::size_t worker) const { return workers_.at(worker)->rounds; }

std::uint16_t resolve_worker_port(std::optional<std::uint16_t> explicit_port) {
  if (explicit_port) return *explicit_port;
  if (const char* env = std::getenv(kWorkerPortEnv); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) {
      throw InvalidParameter(std::string(kWorkerPortEnv) + "='" + env + "' is not a port number");
    }
    return static_cast<std::uint16_t>(v);
  }
  return kDefaultWorkerPort;
}

void ClusterConfig::validate() const {
  if (N < 1) throw InvalidParameter("a cluster needs at least one worker");
  if (transport == TransportKind::tcp && worker_addresses.size() != N) {
    throw InvalidParameter("tcp transport needs " + std::to_string(N) + " worker addresses, got " +
                           std::to_string(worker_addresses.size()));
  }
}

Cluster::Cluster(ClusterConfig cfg, FieldParams f) : cfg_(std::move(cfg)), field_(f), stats_(cfg_.N) {
  cfg_.validate();
  if (cfg_.transport == ClusterConfig::TransportKind::tcp) {
    if (!cfg_.deadline) cfg_.deadline = kTcpDefaultDeadline;
    transport_ = std::make_unique<TcpTransport>(cfg_.worker_addresses);
  } else {
    transport_ = std::make_unique<InProcessTransport>(cfg_.N, cfg_.stragglers);
  }
}

Cluster::~Cluster() { shutdown(); }

void Cluster::shutdown() {
  if (!transport_) return;
  for (std::size_t i = 0; i < cfg_.N; ++i) {
    try {
      transport_->send(i, wire::Frame{wire::MessageKind::Shutdown, 0, {}});
    } catch (const WorkerUnreachable&) {
    }
  }
  transport_->shutdown();
  transport_.reset();
}

InProcessTransport* Cluster::in_process() noexcept { return dynamic_cast<InProcessTransport*>(transport_.get()); }

std::optional<Clock::time_point> Cluster::deadline_from_now() const {
  if (!cfg_.deadline) return std::nullopt;
  return Clock::now() + *cfg_.deadline;
}

void Cluster::await_acks(std::set<std::size_t>& pending, std::uint32_t round, const char* what) {
  const auto deadline = deadline_from_now();
  while (!pending.empty()) {
    auto in = transport_->receive(deadline);
    if (!in) break;
    if (in->frame.kind == wire::MessageKind::Error) {
      throw ProtocolViolation("worker " + std::to_string(in->worker) + " rejected " + what + ": " +
                              wire::error_text(in->frame));
    }
    if (in->frame.kind == wire::MessageKind::Ack && in->frame.round == round) pending.erase(in->worker);
  }
}

std::set<std::size_t> Cluster::distribute_shares(std::span<const lagrange::CodedDatasetShare> shares) {
  if (shares.size() != cfg_.N) {
    throw DimensionMismatch(std::to_string(shares.size()) + " shares for " + std::to_string(cfg_.N) + " workers");
  }
  std::set<std::size_t> failed;
  std::set<std::size_t> pending;
  for (const auto& share : shares) {
    FieldMatrix header(1, 2);
    header(0, 0) = static_cast<std::uint32_t>(field_.p());
    header(0, 1) = static_cast<std::uint32_t>(share.worker);
    try {
      transport_->send(share.worker, wire::Frame{wire::MessageKind::SetupShare, 0, {header, share.Xtilde}});
      pending.insert(share.worker);
    } catch (const WorkerUnreachable&) {
      failed.insert(share.worker);
    }
  }
  await_acks(pending, 0, "SetupShare");
  failed.insert(pending.begin(), pending.end());
  sent_cbar_.reset();
  if (!failed.empty()) throw WorkerUnreachable("no acknowledgment from worker(s) " + list_workers(failed));
  std::set<std::size_t> acked;
  for (const auto& share : shares) acked.insert(share.worker);
  return acked;
}

RoundResult Cluster::round_trip(std::uint32_t round, std::span<const lagrange::CodedWeightShare> weight_shares,
                                const sigmoid_approx::QuantizedPoly& qpoly, std::size_t threshold) {
  if (weight_shares.size() != cfg_.N) {
    throw DimensionMismatch(std::to_string(weight_shares.size()) + " weight shares for " + std::to_string(cfg_.N) +
                            " workers");
  }
  if (threshold == 0 || threshold > cfg_.N) {
    throw InvalidParameter("threshold " + std::to_string(threshold) + " with " + std::to_string(cfg_.N) + " workers");
  }
  const auto start = Clock::now();
  RoundResult out;

  std::vector<std::uint32_t> cbar;
  for (const auto& c : qpoly.cbar) cbar.push_back(c.value);
  if (sent_cbar_ != cbar) {
    FieldMatrix row(1, cbar.size(), cbar);
    // Each worker handles its messages in order, so cbar is in place before
    // the weights arrive; the acks are skipped by the collector below.
    for (std::size_t i = 0; i < cfg_.N; ++i) {
      try {
        transport_->send(i, wire::Frame{wire::MessageKind::Coefficients, round, {row}});
      } catch (const WorkerUnreachable&) {
      }
    }
    sent_cbar_ = std::move(cbar);
  }

  for (const auto& share : weight_shares) {
    try {
      transport_->send(share.worker, wire::Frame{wire::MessageKind::RoundWeights, round, {share.Wtilde}});
    } catch (const WorkerUnreachable&) {
    }
  }

  const auto deadline = deadline_from_now();
  std::set<std::size_t> seen;
  while (out.results.size() < threshold) {
    auto in = transport_->receive(deadline);
    if (!in) {
      throw RoundTimeout("round " + std::to_string(round) + ": " + std::to_string(out.results.size()) + " of " +
                         std::to_string(threshold) + " results before the deadline");
    }
    const wire::Frame& f = in->frame;
    if (f.kind == wire::MessageKind::Error) {
      throw ProtocolViolation("worker " + std::to_string(in->worker) + ": " + wire::error_text(f));
    }
    if (f.kind != wire::MessageKind::Result) continue;
    if (f.round != round || seen.contains(in->worker)) {
      ++out.late_discarded;
      ++stats_.at(in->worker).results_late;
      continue;
    }
    if (f.payload.size() != 2 || f.payload[1].cols() != 4) {
      throw ProtocolViolation("malformed Result from worker " + std::to_string(in->worker));
    }
    const auto& c = f.payload[1];
    ResultMessage msg;
    msg.worker = in->worker;
    msg.round = f.round;
    msg.payload = f.payload[0];
    msg.mul_count = std::uint64_t{c(0, 0)} | std::uint64_t{c(0, 1)} << 32;
    msg.compute_ms = static_cast<double>(std::uint64_t{c(0, 2)} | std::uint64_t{c(0, 3)} << 32) / 1000.0;
    msg.arrival_ms = ms_between(start, Clock::now());
    auto& st = stats_.at(in->worker);
    ++st.results_used;
    st.total_compute_ms += msg.compute_ms;
    st.last_mul_count = msg.mul_count;
    seen.insert(in->worker);
    out.results.push_back(std::move(msg));
  }
  out.elapsed_ms = ms_between(start, Clock::now());
  return out;
}

}  // namespace cpml::runtime
