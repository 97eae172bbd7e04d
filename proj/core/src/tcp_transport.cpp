#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <thread>

#include "cpml/errors.hpp"
#include "cpml/runtime.hpp"

namespace cpml::runtime {

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::recv(fd, data, size, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

// Reads one whole frame. Returns nullopt on a clean or abrupt disconnect.
std::optional<std::vector<std::uint8_t>> read_frame_bytes(int fd) {
  std::vector<std::uint8_t> bytes(4);
  if (!read_all(fd, bytes.data(), 4)) return std::nullopt;
  const std::uint32_t length = wire::frame_length(std::span<const std::uint8_t, 4>(bytes.data(), 4));
  bytes.resize(4 + std::size_t{length});
  if (!read_all(fd, bytes.data() + 4, length)) return std::nullopt;
  return bytes;
}

int connect_to(const std::string& address, std::size_t worker) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw InvalidParameter("worker address '" + address + "' is not host:port");
  }
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0) {
    throw WorkerUnreachable("worker " + std::to_string(worker) + " (" + address + "): cannot resolve host");
  }
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) {
    throw WorkerUnreachable("worker " + std::to_string(worker) + " (" + address + "): " + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace

TcpTransport::TcpTransport(const std::vector<std::string>& addresses) : addresses_(addresses) {
  try {
    for (std::size_t i = 0; i < addresses_.size(); ++i) sockets_.push_back(connect_to(addresses_[i], i));
  } catch (...) {
    for (int fd : sockets_) ::close(fd);
    throw;
  }
  for (std::size_t i = 0; i < sockets_.size(); ++i) {
    readers_.emplace_back([this, i, fd = sockets_[i]] { reader(i, fd); });
  }
}

TcpTransport::~TcpTransport() { shutdown(); }

void TcpTransport::reader(std::size_t worker, int fd) {
  try {
    while (auto bytes = read_frame_bytes(fd)) to_master_.push(Envelope{worker, std::move(*bytes)});
  } catch (const FormatError& e) {
    to_master_.push(Envelope{worker, wire::encode_frame(wire::error_frame(0, e.what()))});
  }
}

void TcpTransport::send(std::size_t worker, const wire::Frame& frame) {
  if (worker >= sockets_.size() || sockets_[worker] < 0) {
    throw WorkerUnreachable("worker " + std::to_string(worker) + " is not connected");
  }
  const auto bytes = wire::encode_frame(frame);
  if (!write_all(sockets_[worker], bytes.data(), bytes.size())) {
    throw WorkerUnreachable("worker " + std::to_string(worker) + " (" + addresses_[worker] +
                            "): connection lost");
  }
  bytes_sent_ += bytes.size();
}

std::optional<Incoming> TcpTransport::receive(std::optional<Clock::time_point> deadline) {
  auto env = to_master_.pop(deadline);
  if (!env) return std::nullopt;
  return Incoming{env->from, wire::decode_frame(env->bytes)};
}

void TcpTransport::shutdown() {
  if (shut_down_) return;
  shut_down_ = true;
  for (int fd : sockets_) ::shutdown(fd, SHUT_RDWR);
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
  for (int& fd : sockets_) {
    ::close(fd);
    fd = -1;
  }
  to_master_.close();
}

WorkerServer::WorkerServer(std::uint16_t port, std::chrono::microseconds reply_delay) : reply_delay_(reply_delay) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw WorkerUnreachable(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 4) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    throw WorkerUnreachable("cannot listen on port " + std::to_string(port) + ": " + reason);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

WorkerServer::~WorkerServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void WorkerServer::stop() {
  if (!stopped_.exchange(true) && listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
}

bool WorkerServer::serve_one() {
  int fd = -1;
  while (!stopped_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 200);
    if (ready < 0 && errno != EINTR) return false;
    if (ready <= 0) continue;
    fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd >= 0) break;
  }
  if (fd < 0) return false;
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  WorkerState state;
  while (!stopped_) {
    std::optional<std::vector<std::uint8_t>> bytes;
    try {
      bytes = read_frame_bytes(fd);
    } catch (const FormatError&) {
      break;
    }
    if (!bytes) break;
    std::optional<wire::Frame> reply;
    try {
      const wire::Frame msg = wire::decode_frame(*bytes);
      reply = state.handle(msg);
      if (state.shutdown_requested()) break;
      if (reply && reply->kind == wire::MessageKind::Result && reply_delay_.count() > 0) {
        std::this_thread::sleep_for(reply_delay_);
      }
    } catch (const std::exception& e) {
      reply = wire::error_frame(0, e.what());
    }
    if (reply) {
      const auto out = wire::encode_frame(*reply);
      if (!write_all(fd, out.data(), out.size())) break;
    }
  }
  ::close(fd);
  return !stopped_;
}

}  // namespace cpml::runtime
