#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ghf/port_probe.hpp"
#include "ghf/simulator.hpp"

namespace ghf::probe {
namespace {

using namespace std::chrono_literals;

int listen_socket(int backlog, int type = SOCK_STREAM) {
  const int fd = socket(AF_INET, type, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  EXPECT_EQ(bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  if (type == SOCK_STREAM) EXPECT_EQ(listen(fd, backlog), 0);
  return fd;
}

int port_of(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

/// A port number with nothing bound to it.
int unused_port() {
  const int fd = listen_socket(1);
  const int port = port_of(fd);
  close(fd);
  return port;
}

/// Accepts once, then closes the connection in the requested way.
class OneShotServer {
 public:
  enum class Close { Reset, Fin };
  explicit OneShotServer(Close how) : fd_(listen_socket(4)), port_(port_of(fd_)) {
    thread_ = std::thread([this, how] {
      const int c = accept(fd_, nullptr, nullptr);
      if (c < 0) return;
      if (how == Close::Reset) {
        linger l{1, 0};
        setsockopt(c, SOL_SOCKET, SO_LINGER, &l, sizeof l);
      }
      close(c);
    });
  }
  ~OneShotServer() {
    shutdown(fd_, SHUT_RDWR);
    close(fd_);
    thread_.join();
  }
  int port() const { return port_; }

 private:
  int fd_;
  int port_;
  std::thread thread_;
};

/// Accepts connections and counts application bytes received.
class CountingServer {
 public:
  CountingServer() : fd_(listen_socket(8)), port_(port_of(fd_)) {
    thread_ = std::thread([this] {
      std::vector<int> conns;
      while (!stop_) {
        std::vector<pollfd> fds{{fd_, POLLIN, 0}};
        for (int c : conns) fds.push_back({c, POLLIN, 0});
        if (poll(fds.data(), fds.size(), 20) <= 0) continue;
        if (fds[0].revents & POLLIN) conns.push_back(accept(fd_, nullptr, nullptr));
        for (std::size_t i = 1; i < fds.size(); ++i) {
          if (!fds[i].revents) continue;
          char buf[256];
          const ssize_t n = recv(fds[i].fd, buf, sizeof buf, MSG_DONTWAIT);
          if (n > 0) bytes_ += static_cast<int>(n);
        }
      }
      for (int c : conns) close(c);
    });
  }
  ~CountingServer() {
    stop_ = true;
    thread_.join();
    close(fd_);
  }
  int port() const { return port_; }
  int bytes() const { return bytes_; }

 private:
  int fd_;
  int port_;
  std::atomic<bool> stop_{false};
  std::atomic<int> bytes_{0};
  std::thread thread_;
};

TEST(KnownPorts, RegistryResolvedSet) {
  std::vector<int> ports;
  std::set<std::string_view> labels;
  for (const auto& k : kKnownPorts) {
    ports.push_back(k.port);
    labels.insert(k.service_label);
  }
  EXPECT_EQ(ports, (std::vector<int>{8008, 8009, 8443, 9000, 10001}));
  EXPECT_EQ(labels, (std::set<std::string_view>{"http", "ajp13", "https-alt", "cslistener",
                                                "scp-config"}));
  EXPECT_EQ(service_label_for(9000), "cslistener");
  EXPECT_EQ(service_label_for(10001), "scp-config");
  EXPECT_EQ(service_label_for(1), "unknown");
}

// Cross-checks the frozen numbers against the local service registry when
// the host ships one.
TEST(KnownPorts, AgreesWithServicesFileWhenPresent) {
  std::ifstream services("/etc/services");
  if (!services) GTEST_SKIP() << "/etc/services not available";
  std::string line;
  int checked = 0;
  while (std::getline(services, line)) {
    std::istringstream ss(line);
    std::string name, portproto;
    ss >> name >> portproto;
    for (const auto& k : kKnownPorts) {
      if (name == k.service_label && portproto.ends_with("/tcp")) {
        EXPECT_EQ(std::stoi(portproto), k.port) << name;
        ++checked;
      }
    }
  }
  if (checked == 0) GTEST_SKIP() << "registry lists none of the labels";
}

TEST(ProbeTcp, OpenClosedAndInvalid) {
  const int l = listen_socket(8);
  EXPECT_EQ(probe_tcp("127.0.0.1", port_of(l)).state, PortState::Open);
  close(l);
  const auto closed = probe_tcp("127.0.0.1", unused_port());
  EXPECT_EQ(closed.state, PortState::Closed);
  EXPECT_FALSE(closed.listening_confirmed);
  EXPECT_THROW(probe_tcp("home-mini.local", 8008), InvalidTarget);
  EXPECT_THROW(probe_tcp("127.0.0.1", 0), InvalidTarget);
  EXPECT_THROW(probe_tcp("127.0.0.1", 70000), InvalidTarget);
}

// A listener with a saturated accept queue drops further SYNs, which is
// indistinguishable from a black-holed address.
TEST(ProbeTcp, SilentDropIsFilteredAfterTimeout) {
  const int l = listen_socket(0);
  const int port = port_of(l);
  const int filler = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(connect(filler, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  const auto r = probe_tcp("127.0.0.1", port, 500ms);
  EXPECT_EQ(r.state, PortState::Filtered);
  EXPECT_GE(r.probe_duration, 500ms);
  close(filler);
  close(l);
}

TEST(ConfirmListening, DecoyHoldsConnection) {
  sim::ServeOptions o;
  o.api_port = 0;
  o.decoy_ports = {0};
  auto s = sim::Simulator::start(sim::default_fixtures(), o);
  EXPECT_TRUE(confirm_listening("127.0.0.1", s->decoy_ports()[0], 200ms));
  EXPECT_TRUE(confirm_listening("127.0.0.1", s->api_port(), 200ms));
}

TEST(ConfirmListening, ResetOrCloseIsNotListening) {
  {
    OneShotServer rst(OneShotServer::Close::Reset);
    EXPECT_FALSE(confirm_listening("127.0.0.1", rst.port(), 500ms));
  }
  {
    OneShotServer fin(OneShotServer::Close::Fin);
    EXPECT_FALSE(confirm_listening("127.0.0.1", fin.port(), 500ms));
  }
  EXPECT_FALSE(confirm_listening("127.0.0.1", unused_port(), 100ms));
  EXPECT_FALSE(confirm_listening("bogus", 8008, 100ms));
}

TEST(ProbeSideEffects, ConnectOnlyProbesSendNoBytes) {
  CountingServer server;
  probe_tcp("127.0.0.1", server.port());
  confirm_listening("127.0.0.1", server.port(), 100ms);
  std::this_thread::sleep_for(50ms);
  EXPECT_EQ(server.bytes(), 0);
}

ProbeOptions options_for(const sim::Simulator& s) {
  ProbeOptions o;
  o.linger = 200ms;
  o.timeout = 500ms;
  o.ports = {{s.api_port(), "http"}};
  const auto decoys = s.decoy_ports();
  const std::array<std::string_view, 4> labels{"ajp13", "https-alt", "cslistener", "scp-config"};
  for (std::size_t i = 0; i < decoys.size(); ++i) o.ports.push_back({decoys[i], labels[i]});
  return o;
}

TEST(ProbeKnownPorts, SimulatorAllOpenAndListeningSorted) {
  sim::ServeOptions so;
  so.api_port = 0;
  so.decoy_ports = {0, 0, 0, 0};
  auto s = sim::Simulator::start(sim::default_fixtures(), so);
  const auto results = probe_known_ports("127.0.0.1", options_for(*s));
  ASSERT_EQ(results.size(), 5u);
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].state, PortState::Open);
    EXPECT_TRUE(results[i].listening_confirmed);
    if (i > 0) EXPECT_LT(results[i - 1].port, results[i].port);
  }
}

TEST(ProbeKnownPorts, RepeatedProbesAgree) {
  sim::ServeOptions so;
  so.api_port = 0;
  so.decoy_ports = {0, 0, 0, 0};
  auto s = sim::Simulator::start(sim::default_fixtures(), so);
  ProbeOptions o = options_for(*s);
  o.linger = 20ms;
  o.ports.push_back({unused_port(), "closed"});
  const auto first = probe_known_ports("127.0.0.1", o);
  for (int run = 0; run < 10; ++run) {
    const auto again = probe_known_ports("127.0.0.1", o);
    ASSERT_EQ(again.size(), first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      EXPECT_EQ(again[i].port, first[i].port);
      EXPECT_EQ(again[i].state, first[i].state);
      EXPECT_EQ(again[i].listening_confirmed, first[i].listening_confirmed);
    }
  }
}

TEST(ProbeKnownPorts, NothingListeningIsClosedOrFiltered) {
  ProbeOptions o;
  o.timeout = 300ms;
  o.ports.clear();
  for (int i = 0; i < 5; ++i) o.ports.push_back({unused_port(), "x"});
  for (const auto& r : probe_known_ports("127.0.0.1", o)) {
    EXPECT_TRUE(r.state == PortState::Closed || r.state == PortState::Filtered);
    EXPECT_FALSE(r.listening_confirmed);
  }
  EXPECT_THROW(probe_known_ports("::1"), InvalidTarget);
}

TEST(ProbeKnownPorts, UdpResultsSortAfterTcpAndNeverClaimOpenOnSilence) {
  const int silent = listen_socket(0, SOCK_DGRAM);
  ProbeOptions o;
  o.timeout = 200ms;
  o.include_udp = true;
  o.ports = {{port_of(silent), "silent"}, {unused_port(), "none"}};
  const auto results = probe_known_ports("127.0.0.1", o);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(results[0].transport, Transport::Tcp);
  EXPECT_EQ(results[1].transport, Transport::Tcp);
  for (int i = 2; i < 4; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    EXPECT_EQ(r.transport, Transport::Udp);
    EXPECT_NE(r.state, PortState::Filtered);
    EXPECT_FALSE(r.listening_confirmed);
    EXPECT_EQ(r.note, kUdpCaveat);
    if (r.port == port_of(silent)) {
      EXPECT_EQ(r.state, PortState::OpenOrFiltered);
    } else {
      EXPECT_EQ(r.state, PortState::Closed);
    }
  }
  close(silent);
}

TEST(ProbeUdp, ReplyMeansOpen) {
  const int echo = listen_socket(0, SOCK_DGRAM);
  std::thread t([echo] {
    char buf[16];
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const ssize_t n = recvfrom(echo, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n >= 0) sendto(echo, "pong", 4, 0, reinterpret_cast<sockaddr*>(&from), len);
  });
  EXPECT_EQ(probe_udp("127.0.0.1", port_of(echo), 1000ms).state, PortState::Open);
  t.join();
  close(echo);
}

}  // namespace
}  // namespace ghf::probe
