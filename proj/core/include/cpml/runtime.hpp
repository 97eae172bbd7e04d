#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cpml/field.hpp"
#include "cpml/lagrange.hpp"
#include "cpml/sigmoid_approx.hpp"
#include "cpml/wire.hpp"

namespace cpml::runtime {

using Clock = std::chrono::steady_clock;
using field::FieldMatrix;
using field::FieldParams;

// Port used by `cpml worker` when none is given on the command line.
inline constexpr const char* kWorkerPortEnv = "CPML_WORKER_PORT";
inline constexpr std::uint16_t kDefaultWorkerPort = 7700;
inline constexpr std::chrono::milliseconds kTcpDefaultDeadline{30000};

struct Envelope {
  std::size_t from = 0;
  std::vector<std::uint8_t> bytes;  // one encoded frame
};

// Multi-producer queue of encoded frames.
class Mailbox {
 public:
  void push(Envelope e);
  // Waits until a message arrives, the deadline passes or the mailbox closes.
  std::optional<Envelope> pop(std::optional<Clock::time_point> deadline = std::nullopt);
  void close();
  [[nodiscard]] bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
};

// Per-(worker, round) reply delay, reproducible from the seed.
struct StragglerModel {
  enum class Kind { none, fixed, uniform, heavy_tail };
  Kind kind = Kind::none;
  double fixed_ms = 0.0;
  double uniform_min_ms = 0.0, uniform_max_ms = 0.0;
  double pareto_scale_ms = 10.0, pareto_shape = 1.5, cap_ms = 2000.0;
  // Workers subject to the delay; empty means every worker.
  std::vector<std::size_t> slow_set;
  std::uint64_t seed = 0;

  [[nodiscard]] std::chrono::microseconds delay(std::size_t worker, std::uint32_t round) const;
  static Kind parse_kind(const std::string& name);
  static std::string kind_name(Kind kind);
};

// Worker protocol state machine, shared by the in-process and tcp transports.
//
//   SetupShare    stores the dataset share; a byte-identical resend is a no-op
//                 and a different share starts a new job. Replies Ack.
//   Coefficients  stores cbar. Replies Ack.
//   RoundWeights  requires both of the above; rounds must arrive in order
//                 (0, 1, 2, ...). A repeat of the last round is dropped
//                 without reply. Replies Result.
//   Shutdown      ends the loop.
//
// Anything else raises ProtocolViolation.
class WorkerState {
 public:
  explicit WorkerState(std::size_t index = 0) : index_(index) {}

  std::optional<wire::Frame> handle(const wire::Frame& msg);

  [[nodiscard]] std::size_t index() const noexcept { return index_; }
  [[nodiscard]] bool has_setup() const noexcept { return Xtilde_.has_value(); }
  [[nodiscard]] bool shutdown_requested() const noexcept { return shutdown_; }
  // Distinct SetupShare payloads accepted so far.
  [[nodiscard]] std::size_t setups_accepted() const noexcept { return setups_accepted_; }
  [[nodiscard]] std::size_t rounds_computed() const noexcept { return rounds_computed_; }
  [[nodiscard]] const std::optional<FieldMatrix>& dataset_share() const noexcept { return Xtilde_; }

 private:
  std::size_t index_;
  std::optional<FieldParams> field_;
  std::optional<FieldMatrix> Xtilde_;
  std::optional<sigmoid_approx::QuantizedPoly> qpoly_;
  std::optional<std::uint32_t> last_round_;
  std::size_t setups_accepted_ = 0;
  std::size_t rounds_computed_ = 0;
  bool shutdown_ = false;
};

struct Incoming {
  std::size_t worker = 0;
  wire::Frame frame;
};

// Master-side view of N workers.
class Transport {
 public:
  virtual ~Transport() = default;
  [[nodiscard]] virtual std::size_t size() const = 0;
  // Throws WorkerUnreachable naming the worker.
  virtual void send(std::size_t worker, const wire::Frame& frame) = 0;
  // Next reply from any worker; nullopt once the deadline passes.
  virtual std::optional<Incoming> receive(std::optional<Clock::time_point> deadline) = 0;
  virtual void shutdown() = 0;
  [[nodiscard]] virtual std::uint64_t bytes_sent() const = 0;
};

// N worker threads inside this process. Frames travel encoded, exactly as on
// the wire. Faults can be injected per worker.
class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::size_t N, StragglerModel stragglers);
  ~InProcessTransport() override;

  [[nodiscard]] std::size_t size() const override { return workers_.size(); }
  void send(std::size_t worker, const wire::Frame& frame) override;
  std::optional<Incoming> receive(std::optional<Clock::time_point> deadline) override;
  void shutdown() override;
  [[nodiscard]] std::uint64_t bytes_sent() const override { return bytes_sent_; }

  // A crashed worker silently drops everything it receives.
  void set_crashed(std::size_t worker, bool crashed);
  // Sending to an unreachable worker throws WorkerUnreachable.
  void set_unreachable(std::size_t worker, bool unreachable);
  // Snapshot of a worker's protocol state counters.
  [[nodiscard]] std::size_t setups_accepted(std::size_t worker) const;
  [[nodiscard]] std::size_t rounds_computed(std::size_t worker) const;

 private:
  struct Worker {
    Mailbox inbox;
    WorkerState state;
    std::atomic<bool> crashed{false};
    std::atomic<bool> unreachable{false};
    std::atomic<std::size_t> setups{0};
    std::atomic<std::size_t> rounds{0};
    std::thread thread;
  };

  void run_worker(std::size_t index);
  void sleep_interruptible(std::chrono::microseconds d);

  std::vector<std::unique_ptr<Worker>> workers_;
  Mailbox to_master_;
  StragglerModel stragglers_;
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  std::atomic<bool> stopping_{false};
};

// One master connection per worker address ("host:port").
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(const std::vector<std::string>& addresses);
  ~TcpTransport() override;

  [[nodiscard]] std::size_t size() const override { return sockets_.size(); }
  void send(std::size_t worker, const wire::Frame& frame) override;
  std::optional<Incoming> receive(std::optional<Clock::time_point> deadline) override;
  void shutdown() override;
  [[nodiscard]] std::uint64_t bytes_sent() const override { return bytes_sent_; }

 private:
  void reader(std::size_t worker, int fd);

  std::vector<std::string> addresses_;
  std::vector<int> sockets_;
  std::vector<std::thread> readers_;
  Mailbox to_master_;
  std::atomic<std::uint64_t> bytes_sent_{0};
  bool shut_down_ = false;
};

// Listening side of a tcp worker: accepts one master at a time and runs a
// WorkerState over the connection.
class WorkerServer {
 public:
  // Port 0 binds an ephemeral port; see port().
  explicit WorkerServer(std::uint16_t port, std::chrono::microseconds reply_delay = {});
  ~WorkerServer();
  WorkerServer(const WorkerServer&) = delete;
  WorkerServer& operator=(const WorkerServer&) = delete;

  [[nodiscard]] std::uint16_t port() const noexcept { return port_; }
  // Serves one master until Shutdown or disconnect. Returns false once stop() was called.
  bool serve_one();
  void stop();

 private:
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::chrono::microseconds reply_delay_;
  std::atomic<bool> stopped_{false};
};

// Resolves the worker port from an explicit value, then CPML_WORKER_PORT, then the default.
std::uint16_t resolve_worker_port(std::optional<std::uint16_t> explicit_port);

struct ClusterConfig {
  enum class TransportKind { in_process, tcp };
  std::size_t N = 1;
  TransportKind transport = TransportKind::in_process;
  StragglerModel stragglers;
  std::vector<std::string> worker_addresses;  // tcp only, one per worker
  // Round and acknowledgment deadline. Unset means 30 s for tcp and no limit in-process.
  std::optional<std::chrono::milliseconds> deadline;

  void validate() const;
};

struct ResultMessage {
  std::size_t worker = 0;
  std::uint32_t round = 0;
  FieldMatrix payload;  // d x 1
  std::uint64_t mul_count = 0;
  double compute_ms = 0.0;
  double arrival_ms = 0.0;  // since the round's broadcast started
};

struct RoundResult {
  std::vector<ResultMessage> results;  // exactly `threshold`, in arrival order
  double elapsed_ms = 0.0;
  std::size_t late_discarded = 0;  // replies to earlier rounds seen while waiting
};

struct WorkerStats {
  std::size_t results_used = 0;
  std::size_t results_late = 0;
  double total_compute_ms = 0.0;
  std::uint64_t last_mul_count = 0;
};

class Cluster {
 public:
  Cluster(ClusterConfig cfg, FieldParams f);
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  // Sends every worker its share and waits for acknowledgments. Safe to
  // repeat. Throws WorkerUnreachable listing every worker that did not ack.
  std::set<std::size_t> distribute_shares(std::span<const lagrange::CodedDatasetShare> shares);

  // Broadcasts the round's weight shares (and cbar when it changed) and returns
  // the first `threshold` results. Throws RoundTimeout when fewer arrive
  // before the deadline and ProtocolViolation when a worker reports one.
  RoundResult round_trip(std::uint32_t round, std::span<const lagrange::CodedWeightShare> weight_shares,
                         const sigmoid_approx::QuantizedPoly& qpoly, std::size_t threshold);

  void shutdown();

  [[nodiscard]] std::size_t size() const noexcept { return cfg_.N; }
  [[nodiscard]] const std::vector<WorkerStats>& stats() const noexcept { return stats_; }
  [[nodiscard]] Transport& transport() noexcept { return *transport_; }
  // Null in tcp mode.
  [[nodiscard]] InProcessTransport* in_process() noexcept;

 private:
  std::optional<Clock::time_point> deadline_from_now() const;
  void await_acks(std::set<std::size_t>& pending, std::uint32_t round, const char* what);

  ClusterConfig cfg_;
  FieldParams field_;
  std::unique_ptr<Transport> transport_;
  std::vector<WorkerStats> stats_;
  std::optional<std::vector<std::uint32_t>> sent_cbar_;
};

}  // namespace cpml::runtime
