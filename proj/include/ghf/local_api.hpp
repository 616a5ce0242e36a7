#pragma once

// Client for the speaker's unauthenticated local HTTP API (port 8008,
// /setup/...). Every response is captured as RawEvidence before any decoding;
// the parse_* functions turn evidence into typed records and keep unknown
// fields in an extras bag so newer firmware does not lose data.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ghf/common.hpp"

namespace ghf::local_api {

using json = nlohmann::json;

enum class Method { Get, Post };

enum class EndpointKind {
  EurekaInfo,
  Offer,
  SupportedTimezones,
  SupportedLocales,
  Alarms,
  ConfiguredNetworks,
  AppDeviceId,
  InternetSpeedTest,
  ScanWifi,
  ScanResults,
};

struct EndpointSpec {
  EndpointKind kind;
  Method method;
  std::string_view path;
  std::string_view name;
};

/// The ten documented endpoints, in acquisition order.
const std::array<EndpointSpec, 10>& endpoints();
const EndpointSpec& endpoint(EndpointKind kind);
std::string_view method_name(Method m);

struct DeviceTarget {
  std::string ip;
  int api_port = 8008;
  std::chrono::milliseconds request_timeout{5000};

  /// Throws std::invalid_argument when ip is not a dotted quad, the port is
  /// outside [1, 65535] or the timeout is not positive.
  void validate() const;
};

struct RawEvidence {
  std::string endpoint_path;
  Method method = Method::Get;
  int http_status = 0;
  Bytes body;
  Digest sha256{};
  Instant acquired_at{};

  bool digest_matches() const { return ghf::sha256(body) == sha256; }
};

/// Connect failure or timeout. No evidence exists.
class DeviceUnreachable : public Error {
 public:
  explicit DeviceUnreachable(const std::string& what) : Error("DeviceUnreachable", what) {}
};

/// Non-200 reply. The body is still evidence and travels with the error.
class UnexpectedStatus : public Error {
 public:
  explicit UnexpectedStatus(RawEvidence ev);
  const RawEvidence& evidence() const noexcept { return evidence_; }

 private:
  RawEvidence evidence_;
};

class SchemaViolation : public Error {
 public:
  explicit SchemaViolation(const std::string& what) : Error("SchemaViolation", what) {}
};

/// Missing documented fields are empty optionals, never defaults.
template <typename T>
using Field = std::optional<T>;

/// Latitude/longitude value the firmware reports when no location is set.
inline constexpr double kUnsetCoordinate = 255.0;

bool is_mac_address(std::string_view s);

struct EurekaInfo {
  Field<std::string> bssid;
  Field<std::string> hotspot_bssid;
  Field<std::string> ip_address;
  Field<std::string> locale;
  Field<std::string> country_code;
  Field<double> latitude;
  Field<double> longitude;
  Field<std::string> mac_address;
  Field<std::string> name;
  Field<std::string> ssid;
  Field<std::string> timezone;
  Field<std::string> uma_client_id;
  json extras = json::object();

  std::vector<std::string> missing_fields() const;
  /// True when both coordinates carry the 255 sentinel.
  bool location_unset() const;
  /// Every present MAC-typed field matches the colon-hex pattern.
  bool mac_fields_valid() const;

  bool operator==(const EurekaInfo&) const = default;
};

struct OfferToken {
  std::string token;
  json extras = json::object();
};

struct TimezoneEntry {
  std::string display_string;
  std::string id;
  json extras = json::object();
};

struct LocaleEntry {
  std::string display_string;
  std::string id;
  json extras = json::object();
};

struct CivilDate {
  int year = 0;
  int month = 0;
  int day = 0;
  bool operator==(const CivilDate&) const = default;
};

struct TimeOfDay {
  int hour = 0;
  int minute = 0;
  int second = 0;
  bool operator==(const TimeOfDay&) const = default;
};

struct AlarmRecord {
  std::string id;
  std::int64_t status = 0;
  std::int64_t fire_time_ms = 0;
  CivilDate date;
  TimeOfDay time_pattern;
  json extras = json::object();
  /// fire_time rendered in the device timezone agrees with date and
  /// time_pattern. Empty when no usable timezone was supplied.
  std::optional<bool> consistent;
};

struct ConnectedDevice {
  std::int64_t device_class = 0;
  std::string mac_address;
  std::string name;
  json extras = json::object();
};

struct ConfiguredNetwork {
  std::string ssid;
  json extras = json::object();
};

struct ConfiguredNetworks {
  std::vector<ConfiguredNetwork> networks;
  /// Placement of Bluetooth peers under this endpoint is an interpretation of
  /// the observed responses; reports flag it.
  std::vector<ConnectedDevice> connected_devices;
  /// Entries dropped because their normalized ssid repeated an earlier one.
  int duplicate_ssids = 0;
  json extras = json::object();

  std::vector<std::string> ssids() const;
};

struct AppDeviceId {
  std::string app_device_id;
  json extras = json::object();
};

struct SpeedTestResult {
  std::int64_t bytes_received = 0;
  std::int64_t response_code = 0;
  std::int64_t time_for_data_fetch_ms = 0;
  std::int64_t time_for_http_response_ms = 0;
  json extras = json::object();
};

struct WifiScanEntry {
  std::string bssid;
  std::string ssid;
  json extras = json::object();
};

/// Issues one request. Digest and timestamp are taken before the body is
/// looked at. Throws DeviceUnreachable or UnexpectedStatus.
RawEvidence fetch_endpoint(const DeviceTarget& target, EndpointKind kind,
                           const Clock& clock = system_clock());

EurekaInfo parse_eureka_info(const RawEvidence& ev);
/// `timezone` is the device zone (EurekaInfo::timezone) used for the
/// fire_time consistency check.
std::vector<AlarmRecord> parse_alarms(const RawEvidence& ev,
                                      const std::optional<std::string>& timezone = {});
ConfiguredNetworks parse_configured_networks(const RawEvidence& ev);
std::vector<WifiScanEntry> parse_scan_results(const RawEvidence& ev);
AppDeviceId parse_app_device_id(const RawEvidence& ev);
SpeedTestResult parse_speed_test(const RawEvidence& ev);
OfferToken parse_offer(const RawEvidence& ev);
std::vector<TimezoneEntry> parse_timezones(const RawEvidence& ev);
std::vector<LocaleEntry> parse_locales(const RawEvidence& ev);

struct LocalCivilTime {
  CivilDate date;
  TimeOfDay time;
};

/// Renders epoch milliseconds as wall-clock time in an IANA zone. Empty when
/// the zone cannot be loaded.
std::optional<LocalCivilTime> to_zone(std::int64_t epoch_ms, const std::string& timezone);

void to_json(json& j, const EurekaInfo& v);
void to_json(json& j, const OfferToken& v);
void to_json(json& j, const TimezoneEntry& v);
void to_json(json& j, const LocaleEntry& v);
void to_json(json& j, const AlarmRecord& v);
void to_json(json& j, const ConnectedDevice& v);
void to_json(json& j, const ConfiguredNetwork& v);
void to_json(json& j, const ConfiguredNetworks& v);
void to_json(json& j, const AppDeviceId& v);
void to_json(json& j, const SpeedTestResult& v);
void to_json(json& j, const WifiScanEntry& v);

/// Parses evidence for `kind` and returns the typed record as JSON. ScanWifi
/// has no body contract and yields {"status": <code>}. Throws SchemaViolation.
json parse_to_json(EndpointKind kind, const RawEvidence& ev,
                   const std::optional<std::string>& timezone = {});

/// JSON pointers (into parse_to_json output) of values that must be redacted.
std::vector<std::string> sensitive_pointers(EndpointKind kind, const json& parsed);

enum class Mode { Passive, Active };

struct AcquireOptions {
  std::chrono::milliseconds scan_settle{2000};
  Clock clock = system_clock();
};

struct ErrorRecord {
  std::string kind;
  std::string message;
};

struct AcquisitionItem {
  EndpointKind kind{};
  Method method = Method::Get;
  std::string path;
  std::optional<RawEvidence> evidence;
  std::optional<ErrorRecord> error;
};

struct AcquisitionBundle {
  DeviceTarget target;
  Mode mode = Mode::Passive;
  std::vector<AcquisitionItem> items;

  /// Device timezone from a successfully parsed eureka_info item, if any.
  std::optional<std::string> device_timezone() const;
};

/// Passive issues the six state-reading GETs. Active additionally issues the
/// three POSTs, then reads scan_results after the settle delay. Per-endpoint
/// failures are embedded in the bundle; nothing here throws for a dead device.
AcquisitionBundle acquire_all(const DeviceTarget& target, Mode mode,
                              const AcquireOptions& options = {});

}  // namespace ghf::local_api
