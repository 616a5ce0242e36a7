#include "ghf/port_probe.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <memory>
#include <cerrno>
#include <mutex>
#include <thread>

namespace ghf::probe {

namespace {

using Steady = std::chrono::steady_clock;

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

sockaddr_in make_addr(const std::string& ip, int port) {
  if (port < 1 || port > 65535) {
    throw InvalidTarget("port outside [1, 65535]: " + std::to_string(port));
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1) {
    throw InvalidTarget("not an IPv4 address: " + ip);
  }
  return addr;
}

int remaining_ms(Steady::time_point deadline) {
  const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - Steady::now());
  return static_cast<int>(std::max<std::int64_t>(0, left.count()));
}

enum class ConnectOutcome { Connected, Refused, TimedOut, Unreachable };

/// Non-blocking connect bounded by `timeout`. On Connected, `out` owns the socket.
ConnectOutcome connect_with_timeout(const sockaddr_in& addr, std::chrono::milliseconds timeout,
                                    std::unique_ptr<Fd>& out) {
  auto fd = std::make_unique<Fd>(socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0));
  if (fd->get() < 0) return ConnectOutcome::Unreachable;
  int rc = connect(fd->get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  int err = rc == 0 ? 0 : errno;
  if (rc != 0 && err == EINPROGRESS) {
    const auto deadline = Steady::now() + timeout;
    pollfd p{fd->get(), POLLOUT, 0};
    for (;;) {
      rc = poll(&p, 1, remaining_ms(deadline));
      if (rc < 0 && errno == EINTR) continue;
      break;
    }
    if (rc == 0) return ConnectOutcome::TimedOut;
    socklen_t len = sizeof err;
    getsockopt(fd->get(), SOL_SOCKET, SO_ERROR, &err, &len);
  }
  switch (err) {
    case 0:
      out = std::move(fd);
      return ConnectOutcome::Connected;
    case ECONNREFUSED:
      return ConnectOutcome::Refused;
    case ETIMEDOUT:
      return ConnectOutcome::TimedOut;
    default:
      return ConnectOutcome::Unreachable;
  }
}

std::chrono::milliseconds since(Steady::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Steady::now() - t0);
}

}  // namespace

std::string_view to_string(Transport t) { return t == Transport::Tcp ? "tcp" : "udp"; }

std::string_view to_string(PortState s) {
  switch (s) {
    case PortState::Open: return "open";
    case PortState::Closed: return "closed";
    case PortState::Filtered: return "filtered";
    case PortState::OpenOrFiltered: return "open_or_filtered";
  }
  return "unknown";
}

std::string_view service_label_for(int port) {
  for (const auto& k : kKnownPorts) {
    if (k.port == port) return k.service_label;
  }
  return "unknown";
}

PortProbeResult probe_tcp(const std::string& ip, int port, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = make_addr(ip, port);
  PortProbeResult r;
  r.port = port;
  r.transport = Transport::Tcp;
  r.service_label = std::string(service_label_for(port));
  const auto t0 = Steady::now();
  std::unique_ptr<Fd> fd;
  switch (connect_with_timeout(addr, timeout, fd)) {
    case ConnectOutcome::Connected: r.state = PortState::Open; break;
    case ConnectOutcome::Refused: r.state = PortState::Closed; break;
    case ConnectOutcome::TimedOut:
      r.state = PortState::Filtered;
      r.note = "no response within timeout";
      break;
    case ConnectOutcome::Unreachable:
      r.state = PortState::Filtered;
      r.note = "host or network unreachable";
      break;
  }
  fd.reset();
  r.probe_duration = since(t0);
  return r;
}

PortProbeResult probe_udp(const std::string& ip, int port, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = make_addr(ip, port);
  PortProbeResult r;
  r.port = port;
  r.transport = Transport::Udp;
  r.service_label = std::string(service_label_for(port));
  r.note = std::string(kUdpCaveat);
  const auto t0 = Steady::now();
  Fd fd(socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  r.state = PortState::OpenOrFiltered;
  if (fd.get() < 0 || connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      send(fd.get(), "", 0, 0) < 0) {
    if (errno == ECONNREFUSED) r.state = PortState::Closed;
    r.probe_duration = since(t0);
    return r;
  }
  const auto deadline = Steady::now() + timeout;
  pollfd p{fd.get(), POLLIN, 0};
  int rc;
  do {
    rc = poll(&p, 1, remaining_ms(deadline));
  } while (rc < 0 && errno == EINTR);
  if (rc > 0) {
    char buf[512];
    const ssize_t n = recv(fd.get(), buf, sizeof buf, MSG_DONTWAIT);
    if (n >= 0) {
      r.state = PortState::Open;
    } else if (errno == ECONNREFUSED) {
      r.state = PortState::Closed;
    }
  }
  r.probe_duration = since(t0);
  return r;
}

bool confirm_listening(const std::string& ip, int port, std::chrono::milliseconds linger,
                       std::chrono::milliseconds connect_timeout) {
  sockaddr_in addr{};
  try {
    addr = make_addr(ip, port);
  } catch (const InvalidTarget&) {
    return false;
  }
  std::unique_ptr<Fd> fd;
  if (connect_with_timeout(addr, connect_timeout, fd) != ConnectOutcome::Connected) return false;

  const auto deadline = Steady::now() + linger;
  for (;;) {
    const int wait = remaining_ms(deadline);
    if (wait == 0) return true;
    pollfd p{fd->get(), POLLIN | POLLRDHUP, 0};
    const int rc = poll(&p, 1, wait);
    if (rc < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    if (rc == 0) return true;
    if (p.revents & (POLLERR | POLLHUP | POLLRDHUP)) return false;
    char buf[512];
    const ssize_t n = recv(fd->get(), buf, sizeof buf, MSG_DONTWAIT);
    if (n == 0) return false;
    if (n < 0 && errno != EAGAIN && errno != EINTR) return false;
    // A banner is fine; keep watching for the rest of the window.
  }
}

std::vector<PortProbeResult> probe_known_ports(const std::string& ip, const ProbeOptions& options) {
  make_addr(ip, 1);  // validates the address up front

  struct Job {
    KnownPort port;
    Transport transport;
  };
  std::vector<Job> jobs;
  for (const auto& p : options.ports) {
    jobs.push_back({p, Transport::Tcp});
    if (options.include_udp) jobs.push_back({p, Transport::Udp});
  }

  std::vector<PortProbeResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      PortProbeResult r = job.transport == Transport::Tcp
                              ? probe_tcp(ip, job.port.port, options.timeout)
                              : probe_udp(ip, job.port.port, options.timeout);
      r.service_label = std::string(job.port.service_label);
      if (r.transport == Transport::Tcp && r.state == PortState::Open) {
        r.listening_confirmed = confirm_listening(ip, job.port.port, options.linger, options.timeout);
      }
      results[i] = std::move(r);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.parallelism, 1, jobs.size() ? jobs.size() : 1);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::pair(a.transport, a.port) < std::pair(b.transport, b.port);
  });
  return results;
}

}  // namespace ghf::probe
