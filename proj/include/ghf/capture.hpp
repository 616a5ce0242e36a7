#pragma once

// Offline triage of classic (libpcap) capture files: TCP flow assembly,
// TLS hello extraction and role labelling. Payloads are never decrypted.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghf/common.hpp"

namespace ghf::pcap {

using json = nlohmann::json;

class BadMagic : public Error {
 public:
  explicit BadMagic(const std::string& what) : Error("BadMagic", what) {}
};

class UnsupportedLinkType : public Error {
 public:
  explicit UnsupportedLinkType(std::uint32_t link)
      : Error("UnsupportedLinkType", "link type " + std::to_string(link) + " is not Ethernet (1)"),
        link_(link) {}
  std::uint32_t link_type() const noexcept { return link_; }

 private:
  std::uint32_t link_;
};

class NotTls : public Error {
 public:
  explicit NotTls(const std::string& what) : Error("NotTls", what) {}
};

struct PacketRecord {
  Instant timestamp{};
  std::uint32_t captured_length = 0;
  std::uint32_t original_length = 0;
  Bytes link_payload;
};

struct CaptureFile {
  bool byte_swapped = false;
  bool nanosecond = false;
  std::uint32_t snaplen = 0;
  std::vector<PacketRecord> records;
  std::vector<std::string> warnings;
};

/// Accepts the microsecond and nanosecond magics in either byte order.
/// A damaged or truncated trailing record ends parsing with a warning.
CaptureFile parse_capture(std::string_view bytes);

struct Endpoint {
  std::uint32_t ip = 0;  // host order
  std::uint16_t port = 0;
  auto operator<=>(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);
std::string ipv4_to_string(std::uint32_t ip);
/// Throws std::invalid_argument.
std::uint32_t parse_ipv4(std::string_view dotted);

struct TcpFlow {
  /// Canonical order: a < b.
  Endpoint a;
  Endpoint b;
  Instant first_seen{};
  Instant last_seen{};
  /// Distinct payload bytes; retransmitted ranges are counted once.
  std::uint64_t bytes_a_to_b = 0;
  std::uint64_t bytes_b_to_a = 0;
  std::uint64_t packet_count = 0;
  /// In-order payload from each side's first sequence number, up to the
  /// retention cap.
  Bytes stream_a_to_b;
  Bytes stream_b_to_a;
  /// Bytes that arrived beyond a gap and were never joined to the stream.
  std::uint64_t unjoined_a_to_b = 0;
  std::uint64_t unjoined_b_to_a = 0;
};

struct TrafficCounts {
  std::uint64_t udp = 0;
  std::uint64_t ipv6 = 0;
  std::uint64_t other_ipv4 = 0;
  std::uint64_t non_ip = 0;
  /// Truncated or inconsistent headers at any layer.
  std::uint64_t malformed = 0;

  std::uint64_t total() const { return udp + ipv6 + other_ipv4 + non_ip + malformed; }
};

struct FlowOptions {
  std::size_t retain_bytes = 64 * 1024;
};

struct FlowSet {
  /// Sorted by (a, b).
  std::vector<TcpFlow> flows;
  TrafficCounts non_tcp;
  std::vector<std::string> warnings;
};

FlowSet assemble_flows(const std::vector<PacketRecord>& packets, const FlowOptions& options = {});

enum class Negotiated { Tls12, Tls13, Other, Incomplete };
std::string_view to_string(Negotiated n);

struct TlsObservation {
  Endpoint client;
  Endpoint server;
  std::optional<std::string> sni;
  std::optional<std::uint16_t> client_legacy_version;
  std::optional<std::vector<std::uint16_t>> client_supported_versions;
  std::optional<std::uint16_t> server_version;
  std::optional<std::vector<std::uint16_t>> server_supported_versions;
  std::optional<std::uint16_t> cipher_suite;
  Negotiated negotiated = Negotiated::Incomplete;
};

/// TLS 1.3 only when the ServerHello's supported_versions selects 0x0304;
/// the record-layer and legacy versions are never used for that. Throws
/// NotTls when neither direction starts with a TLS record header.
TlsObservation extract_tls(const TcpFlow& flow);

enum class Role { AppToCloud, DeviceToCloud, Local, Other };
enum class Basis { SniMatch, IpMatch, None };
std::string_view to_string(Role r);
std::string_view to_string(Basis b);

struct FlowRole {
  Role role = Role::Other;
  Basis basis = Basis::None;
};

struct TriageConfig {
  std::optional<std::string> device_ip;
  std::optional<std::string> app_ip;
  std::vector<std::string> cloud_suffixes{"l.google.com", "googleapis.com", "google.com"};
  std::vector<std::uint16_t> tls_ports{443, 8443};
};

/// True if host equals suffix or ends with "." + suffix (case-insensitive).
bool host_matches(std::string_view host, std::string_view suffix);

FlowRole classify_role(const TcpFlow& flow, const std::optional<TlsObservation>& obs,
                       const TriageConfig& config);

struct FlowReport {
  Endpoint a;
  Endpoint b;
  std::uint64_t packets = 0;
  std::uint64_t bytes_a_to_b = 0;
  std::uint64_t bytes_b_to_a = 0;
  FlowRole role;
  std::optional<TlsObservation> tls;
  /// Set when the flow is on a TLS port but extract_tls failed.
  std::optional<std::string> tls_error;
};

struct CaptureSummary {
  std::uint64_t total_records = 0;
  std::vector<FlowReport> flows;
  TrafficCounts non_tcp;
  /// Count per negotiated version over flows with a TLS observation.
  std::map<std::string, std::uint64_t> by_version;
  /// Count per "role/version" ("device_to_cloud/TLS1_3", "local/none").
  std::map<std::string, std::uint64_t> by_role_version;
  std::vector<std::string> sni_hosts;
  std::vector<std::string> warnings;
};

CaptureSummary summarize_capture(std::string_view bytes, const TriageConfig& config,
                                 const FlowOptions& options = {});
/// Reads the file then summarizes. Throws std::runtime_error if unreadable.
CaptureSummary summarize_capture_file(const std::string& path, const TriageConfig& config,
                                      const FlowOptions& options = {});

json to_json(const TlsObservation& obs);
json to_json(const CaptureSummary& summary);

}  // namespace ghf::pcap
