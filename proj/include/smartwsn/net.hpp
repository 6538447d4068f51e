#pragma once

// TCP transport between the simulated base station and the monitor.
//
// Handshake: the client sends "HELLO v1\n", the server answers "OK\n".
// After that the server writes raw 28-byte frames back to back.

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "smartwsn/conversion.hpp"
#include "smartwsn/error.hpp"
#include "smartwsn/simulator.hpp"
#include "smartwsn/wire.hpp"

namespace smartwsn {

inline constexpr std::string_view kHello = "HELLO v1\n";
inline constexpr std::string_view kHelloOk = "OK\n";

namespace net_detail {

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorCode::NetworkError, what + ": " + std::strerror(errno));
}

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline bool send_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

inline bool send_all(int fd, std::string_view text) {
  return send_all(fd, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

/// Reads one '\n'-terminated line, byte by byte so no frame bytes are consumed.
inline std::optional<std::string> read_line(int fd, std::size_t limit, int timeout_ms) {
  std::string line;
  while (line.size() < limit) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    char c = 0;
    const ssize_t n = ::recv(fd, &c, 1, 0);
    if (n <= 0) return std::nullopt;
    line.push_back(c);
    if (c == '\n') return line;
  }
  return std::nullopt;
}

inline Fd connect_to(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::NetworkError, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    Fd fd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!fd) continue;
    if (::connect(fd.get(), ai->ai_addr, ai->ai_addrlen) == 0) return fd;
  }
  fail("cannot connect to " + host + ":" + service);
}

}  // namespace net_detail

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port" or ":port" or "port".
  static Endpoint parse(std::string_view text) {
    Endpoint e;
    const auto colon = text.rfind(':');
    std::string_view port_text = text;
    if (colon != std::string_view::npos) {
      if (colon > 0) e.host = std::string(text.substr(0, colon));
      port_text = text.substr(colon + 1);
    }
    unsigned long port = 0;
    try {
      std::size_t used = 0;
      port = std::stoul(std::string(port_text), &used);
      if (used != port_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad endpoint '" + std::string(text) + "' (expected host:port)");
    }
    if (port > 65535) throw Error(ErrorCode::InvalidConfig, "port out of range in '" + std::string(text) + "'");
    e.port = static_cast<std::uint16_t>(port);
    return e;
  }

  std::string str() const { return host + ":" + std::to_string(port); }
};

struct ServerOptions {
  Endpoint listen{"127.0.0.1", 0};
  std::uint64_t max_ticks = 0;       // 0 runs until stopped
  std::size_t wait_for_clients = 0;  // hold tick 0 until this many clients joined
  std::size_t queue_limit = 4096;    // pending ticks per client before it is dropped
  bool realtime = true;              // pace ticks at tick_ms
  std::function<void(std::uint64_t tick, std::size_t frames)> on_tick;
};

struct ServerStats {
  std::uint64_t ticks = 0;
  std::uint64_t frames = 0;
  std::uint64_t clients_accepted = 0;
  std::uint64_t clients_rejected = 0;
  std::uint64_t clients_dropped = 0;
};

class SimServer {
 public:
  SimServer(Simulator sim, ServerOptions opt) : sim_(std::move(sim)), opt_(std::move(opt)) {}

  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  ~SimServer() {
    stop();
    if (acceptor_.joinable()) acceptor_.join();
    close_clients();
  }

  /// Binds and starts accepting; returns the bound port.
  std::uint16_t start() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto service = std::to_string(opt_.listen.port);
    const char* host = opt_.listen.host.empty() ? nullptr : opt_.listen.host.c_str();
    if (const int rc = ::getaddrinfo(host, service.c_str(), &hints, &res); rc != 0) {
      throw Error(ErrorCode::NetworkError, "cannot resolve " + opt_.listen.host + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
    listener_ = net_detail::Fd(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    if (!listener_) net_detail::fail("socket");
    const int one = 1;
    ::setsockopt(listener_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener_.get(), res->ai_addr, res->ai_addrlen) != 0) net_detail::fail("cannot bind " + opt_.listen.str());
    if (::listen(listener_.get(), 16) != 0) net_detail::fail("listen");
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listener_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                             : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  std::uint16_t port() const noexcept { return port_; }

  /// Tick loop; returns after max_ticks or stop(). Connections close cleanly at the end.
  void run() {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || clients_.size() >= opt_.wait_for_clients; });
    }
    const auto period = std::chrono::milliseconds(sim_.clock().tick_ms);
    auto next = std::chrono::steady_clock::now();
    for (std::uint64_t tick = 0; opt_.max_ticks == 0 || tick < opt_.max_ticks; ++tick) {
      if (stopping_) break;
      const auto bytes = std::make_shared<const std::vector<std::uint8_t>>(sim_.encoded(tick));
      broadcast(bytes);
      {
        std::lock_guard lock(mu_);
        ++stats_.ticks;
        stats_.frames += bytes->size() / kFrameSize;
      }
      if (opt_.on_tick) opt_.on_tick(tick, bytes->size() / kFrameSize);
      if (opt_.realtime) {
        next += period;
        std::this_thread::sleep_until(next);
      }
    }
    close_clients();
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
  }

  ServerStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

 private:
  using Chunk = std::shared_ptr<const std::vector<std::uint8_t>>;

  struct Client {
    net_detail::Fd fd;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Chunk> queue;
    bool closing = false;
    bool dead = false;
    std::thread writer;
  };

  void accept_loop() {
    while (!stopping_) {
      pollfd p{listener_.get(), POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r <= 0) continue;
      net_detail::Fd fd(::accept(listener_.get(), nullptr, nullptr));
      if (!fd) continue;
      const auto line = net_detail::read_line(fd.get(), 64, 2000);
      if (!line || *line != kHello) {
        net_detail::send_all(fd.get(), "ERR expected HELLO v1\n");
        std::lock_guard lock(mu_);
        ++stats_.clients_rejected;
        continue;
      }
      if (!net_detail::send_all(fd.get(), kHelloOk)) continue;
      const int one = 1;
      ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto client = std::make_shared<Client>();
      client->fd = std::move(fd);
      client->writer = std::thread([c = client.get()] { write_loop(*c); });
      {
        std::lock_guard lock(mu_);
        clients_.push_back(std::move(client));
        ++stats_.clients_accepted;
      }
      cv_.notify_all();
    }
  }

  static void write_loop(Client& c) {
    while (true) {
      Chunk chunk;
      {
        std::unique_lock lock(c.mu);
        c.cv.wait(lock, [&] { return c.dead || c.closing || !c.queue.empty(); });
        if (c.dead) break;
        if (c.queue.empty()) break;  // closing and drained
        chunk = std::move(c.queue.front());
        c.queue.pop_front();
      }
      if (!chunk->empty() && !net_detail::send_all(c.fd.get(), chunk->data(), chunk->size())) {
        std::lock_guard lock(c.mu);
        c.dead = true;
        break;
      }
    }
    ::shutdown(c.fd.get(), SHUT_WR);
  }

  void broadcast(const Chunk& bytes) {
    std::lock_guard lock(mu_);
    for (auto it = clients_.begin(); it != clients_.end();) {
      Client& c = **it;
      bool drop = false;
      {
        std::lock_guard cl(c.mu);
        if (c.dead) {
          drop = true;
        } else if (c.queue.size() >= opt_.queue_limit) {
          c.dead = true;
          drop = true;
          ++stats_.clients_dropped;
        } else {
          c.queue.push_back(bytes);
        }
      }
      c.cv.notify_one();
      if (drop) {
        ::shutdown(c.fd.get(), SHUT_RDWR);
        if (c.writer.joinable()) c.writer.join();
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void close_clients() {
    std::vector<std::shared_ptr<Client>> clients;
    {
      std::lock_guard lock(mu_);
      clients.swap(clients_);
    }
    for (auto& c : clients) {
      {
        std::lock_guard cl(c->mu);
        c->closing = true;
      }
      c->cv.notify_one();
      if (c->writer.joinable()) c->writer.join();
    }
  }

  Simulator sim_;
  ServerOptions opt_;
  net_detail::Fd listener_;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<bool> stopping_{false};
  std::vector<std::shared_ptr<Client>> clients_;
  ServerStats stats_;
};

struct ClientOptions {
  Endpoint server;
  int connect_attempts = 5;  // per connection, including reconnects after a reset
  int retry_delay_ms = 200;
  int poll_ms = 200;
  AccelCalibration calibration;
};

struct ClientStats {
  std::uint64_t bytes = 0;
  std::uint64_t frames = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t unconvertible = 0;
  std::uint64_t connections = 0;
  bool interrupted = false;
};

/// Receives frames until the server closes the stream (clean end), `stop` is
/// set, or reconnection attempts run out (NetworkError).
inline ClientStats run_client(const ClientOptions& opt, const std::function<void(const EngineeringInstance&)>& on_instance,
                              const std::atomic<bool>* stop = nullptr,
                              const std::function<void(const FrameError&)>& on_error = {}) {
  ClientStats stats;
  int failures = 0;
  auto stopped = [&] { return stop != nullptr && stop->load(); };

  while (!stopped()) {
    net_detail::Fd fd;
    try {
      fd = net_detail::connect_to(opt.server.host, opt.server.port);
      if (!net_detail::send_all(fd.get(), kHello)) net_detail::fail("handshake send");
      const auto reply = net_detail::read_line(fd.get(), 128, 5000);
      if (!reply) net_detail::fail("no handshake reply from " + opt.server.str());
      if (*reply != kHelloOk) {
        throw Error(ErrorCode::NetworkError, "server refused handshake: " + *reply);
      }
    } catch (const Error& e) {
      if (++failures >= opt.connect_attempts || stopped()) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(opt.retry_delay_ms));
      continue;
    }
    ++stats.connections;

    FrameScanner scanner;
    auto handle = [&](std::vector<DecodeResult> items) {
      for (auto& item : items) {
        if (const auto* err = std::get_if<FrameError>(&item)) {
          ++stats.decode_errors;
          if (on_error) on_error(*err);
          continue;
        }
        ++stats.frames;
        try {
          on_instance(to_instance(std::get<RawFrame>(item), opt.calibration));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Unconvertible) throw;
          ++stats.unconvertible;
        }
      }
    };

    std::array<std::uint8_t, 4096> buf{};
    bool reset = false;
    while (true) {
      if (stopped()) {
        stats.interrupted = true;
        return stats;
      }
      pollfd p{fd.get(), POLLIN, 0};
      const int r = ::poll(&p, 1, opt.poll_ms);
      if (r < 0 && errno != EINTR) net_detail::fail("poll");
      if (r <= 0) continue;
      const ssize_t n = ::recv(fd.get(), buf.data(), buf.size(), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        reset = true;
        break;
      }
      if (n == 0) break;
      failures = 0;
      stats.bytes += static_cast<std::uint64_t>(n);
      handle(scanner.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n))));
    }
    handle(scanner.finish());
    if (!reset) return stats;
    if (++failures >= opt.connect_attempts) {
      throw Error(ErrorCode::NetworkError, "connection to " + opt.server.str() + " lost");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(opt.retry_delay_ms));
  }
  stats.interrupted = true;
  return stats;
}

}  // namespace smartwsn
