#pragma once

// Connect-scan of the device's known ports plus a telnet-style listening
// check. No raw sockets; nothing beyond the TCP handshake is sent.

#include <array>
#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include "ghf/common.hpp"

namespace ghf::probe {

enum class Transport { Tcp, Udp };
enum class PortState { Open, Closed, Filtered, OpenOrFiltered };

std::string_view to_string(Transport t);
std::string_view to_string(PortState s);

struct PortProbeResult {
  int port = 0;
  Transport transport = Transport::Tcp;
  PortState state = PortState::Closed;
  std::string service_label;
  bool listening_confirmed = false;
  std::chrono::milliseconds probe_duration{0};
  /// Free-text caveat, e.g. why a UDP state cannot be confirmed.
  std::string note;
};

struct KnownPort {
  int port;
  std::string_view service_label;
};

/// The five ports the speaker keeps open, ascending. Labels follow the
/// nmap service registry names.
inline constexpr std::array<KnownPort, 5> kKnownPorts{{
    {8008, "http"},
    {8009, "ajp13"},
    {8443, "https-alt"},
    {9000, "cslistener"},
    {10001, "scp-config"},
}};

std::string_view service_label_for(int port);

class InvalidTarget : public Error {
 public:
  explicit InvalidTarget(const std::string& what) : Error("InvalidTarget", what) {}
};

/// open iff the handshake completes, closed on reset, filtered on timeout or
/// an ICMP unreachable. Throws InvalidTarget for a non-IPv4 address or a port
/// outside [1, 65535].
PortProbeResult probe_tcp(const std::string& ip, int port,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Sends one empty datagram. closed on ICMP port-unreachable, open if anything
/// comes back, open_or_filtered on silence.
PortProbeResult probe_udp(const std::string& ip, int port,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// True iff a connection is accepted and is neither reset nor closed by the
/// peer during the linger window. Never throws.
bool confirm_listening(const std::string& ip, int port,
                       std::chrono::milliseconds linger = std::chrono::milliseconds(1000),
                       std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(2000));

struct ProbeOptions {
  std::chrono::milliseconds timeout{2000};
  std::chrono::milliseconds linger{1000};
  std::size_t parallelism = 5;
  bool include_udp = false;
  /// Overrides the known port set (tests run against ephemeral ports).
  std::vector<KnownPort> ports{kKnownPorts.begin(), kKnownPorts.end()};
};

/// Results sorted by (transport, port) whatever order the workers finish in.
std::vector<PortProbeResult> probe_known_ports(const std::string& ip,
                                               const ProbeOptions& options = {});

/// Attached to UDP results: connect semantics cannot distinguish an open UDP
/// service from a filtered one, so a count of open UDP ports
/// cannot be confirmed this way.
inline constexpr std::string_view kUdpCaveat =
    "UDP openness is not observable by connect semantics; silence reported as open_or_filtered";

}  // namespace ghf::probe
