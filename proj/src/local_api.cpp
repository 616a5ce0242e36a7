#include "ghf/local_api.hpp"

#include <arpa/inet.h>

#include <absl/time/civil_time.h>
#include <absl/time/time.h>
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <thread>

namespace ghf::local_api {

namespace {

constexpr std::array<EndpointSpec, 10> kEndpoints{{
    {EndpointKind::EurekaInfo, Method::Get, "/setup/eureka_info", "eureka_info"},
    {EndpointKind::Offer, Method::Get, "/setup/offer", "offer"},
    {EndpointKind::SupportedTimezones, Method::Get, "/setup/supported_timezones",
     "supported_timezones"},
    {EndpointKind::SupportedLocales, Method::Get, "/setup/supported_locales",
     "supported_locales"},
    {EndpointKind::Alarms, Method::Get, "/setup/assistant/alarms", "alarms"},
    {EndpointKind::ConfiguredNetworks, Method::Get, "/setup/configured_networks",
     "configured_networks"},
    {EndpointKind::AppDeviceId, Method::Post, "/setup/get_app_device_id", "get_app_device_id"},
    {EndpointKind::InternetSpeedTest, Method::Post, "/setup/test_internet_download_speed",
     "test_internet_download_speed"},
    {EndpointKind::ScanWifi, Method::Post, "/setup/scan_wifi", "scan_wifi"},
    {EndpointKind::ScanResults, Method::Get, "/setup/scan_results", "scan_results"},
}};

json decode_body(const RawEvidence& ev) {
  json j = json::parse(ev.body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw SchemaViolation(ev.endpoint_path + ": body is not a JSON document");
  }
  return j;
}

const json& require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw SchemaViolation(what + ": expected an object");
  return j;
}

const json& require_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw SchemaViolation(what + ": expected an array");
  return j;
}

Field<std::string> opt_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaViolation(std::string(key) + ": expected a string");
  return it->get<std::string>();
}

Field<double> opt_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw SchemaViolation(std::string(key) + ": expected a number");
  return it->get<double>();
}

std::string req_string(const json& obj, const char* key) {
  auto v = opt_string(obj, key);
  if (!v) throw SchemaViolation(std::string(key) + ": required field missing");
  return *v;
}

std::int64_t req_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw SchemaViolation(std::string(key) + ": required field missing");
  }
  if (!it->is_number_integer()) throw SchemaViolation(std::string(key) + ": expected an integer");
  return it->get<std::int64_t>();
}

int req_int_in(const json& obj, const char* key, int lo, int hi) {
  const std::int64_t v = req_int(obj, key);
  if (v < lo || v > hi) {
    throw SchemaViolation(std::string(key) + ": value " + std::to_string(v) + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

json extras_of(const json& obj, std::initializer_list<const char*> documented) {
  json out = obj;
  for (const char* k : documented) out.erase(k);
  return out;
}

void merge_extras(json& j, const json& extras) {
  for (auto it = extras.begin(); it != extras.end(); ++it) {
    if (!j.contains(it.key())) j[it.key()] = it.value();
  }
}

/// Lists arrive either bare or wrapped under one well-known key.
const json& list_body(const json& body, const char* wrapper, const std::string& what) {
  if (body.is_object()) {
    auto it = body.find(wrapper);
    if (it == body.end()) throw SchemaViolation(what + ": missing '" + wrapper + "' list");
    return require_array(*it, what);
  }
  return require_array(body, what);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

template <typename Entry>
std::vector<Entry> parse_display_list(const RawEvidence& ev, const char* id_key,
                                      const char* wrapper) {
  const json body = decode_body(ev);
  std::vector<Entry> out;
  for (const json& item : list_body(body, wrapper, ev.endpoint_path)) {
    require_object(item, ev.endpoint_path + " entry");
    Entry e;
    e.display_string = opt_string(item, "display_string").value_or("");
    e.id = req_string(item, id_key);
    if (e.id.empty()) throw SchemaViolation(std::string(id_key) + ": must be non-empty");
    e.extras = extras_of(item, {"display_string", id_key});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

const std::array<EndpointSpec, 10>& endpoints() { return kEndpoints; }

const EndpointSpec& endpoint(EndpointKind kind) {
  for (const auto& e : kEndpoints) {
    if (e.kind == kind) return e;
  }
  throw std::out_of_range("unknown endpoint kind");
}

std::string_view method_name(Method m) { return m == Method::Get ? "GET" : "POST"; }

void DeviceTarget::validate() const {
  in_addr addr{};
  if (inet_pton(AF_INET, ip.c_str(), &addr) != 1) {
    throw std::invalid_argument("target ip is not an IPv4 address: " + ip);
  }
  if (api_port < 1 || api_port > 65535) {
    throw std::invalid_argument("api port outside [1, 65535]: " + std::to_string(api_port));
  }
  if (request_timeout.count() <= 0) throw std::invalid_argument("request timeout must be > 0");
}

UnexpectedStatus::UnexpectedStatus(RawEvidence ev)
    : Error("UnexpectedStatus", std::string(method_name(ev.method)) + " " + ev.endpoint_path +
                                    " returned HTTP " + std::to_string(ev.http_status)),
      evidence_(std::move(ev)) {}

bool is_mac_address(std::string_view s) {
  if (s.size() != 17) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i % 3 == 2) {
      if (s[i] != ':') return false;
    } else if (!std::isxdigit(static_cast<unsigned char>(s[i]))) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> EurekaInfo::missing_fields() const {
  std::vector<std::string> out;
  auto check = [&](const auto& f, const char* name) {
    if (!f) out.emplace_back(name);
  };
  check(bssid, "bssid");
  check(hotspot_bssid, "hotspot_bssid");
  check(ip_address, "ip_address");
  check(locale, "locale");
  check(country_code, "country_code");
  check(latitude, "latitude");
  check(longitude, "longitude");
  check(mac_address, "mac_address");
  check(name, "name");
  check(ssid, "ssid");
  check(timezone, "timezone");
  check(uma_client_id, "uma_client_id");
  return out;
}

bool EurekaInfo::location_unset() const {
  return latitude == kUnsetCoordinate && longitude == kUnsetCoordinate;
}

bool EurekaInfo::mac_fields_valid() const {
  for (const auto* f : {&bssid, &hotspot_bssid, &mac_address}) {
    if (*f && !is_mac_address(**f)) return false;
  }
  return true;
}

std::vector<std::string> ConfiguredNetworks::ssids() const {
  std::vector<std::string> out;
  out.reserve(networks.size());
  for (const auto& n : networks) out.push_back(n.ssid);
  return out;
}

RawEvidence fetch_endpoint(const DeviceTarget& target, EndpointKind kind, const Clock& clock) {
  target.validate();
  const EndpointSpec& spec = endpoint(kind);

  httplib::Client cli(target.ip, target.api_port);
  cli.set_connection_timeout(target.request_timeout);
  cli.set_read_timeout(target.request_timeout);
  cli.set_write_timeout(target.request_timeout);
  cli.set_keep_alive(false);

  const std::string path(spec.path);
  httplib::Result res = spec.method == Method::Get ? cli.Get(path)
                                                   : cli.Post(path, "", "application/json");
  if (!res) {
    throw DeviceUnreachable(target.ip + ":" + std::to_string(target.api_port) + path + ": " +
                            httplib::to_string(res.error()));
  }

  RawEvidence ev;
  ev.acquired_at = clock();
  ev.endpoint_path = path;
  ev.method = spec.method;
  ev.http_status = res->status;
  ev.body = std::move(res->body);
  ev.sha256 = sha256(ev.body);
  if (ev.http_status != 200) throw UnexpectedStatus(std::move(ev));
  return ev;
}

EurekaInfo parse_eureka_info(const RawEvidence& ev) {
  const json body = decode_body(ev);
  require_object(body, ev.endpoint_path);
  EurekaInfo info;
  info.bssid = opt_string(body, "bssid");
  info.hotspot_bssid = opt_string(body, "hotspot_bssid");
  info.ip_address = opt_string(body, "ip_address");
  info.locale = opt_string(body, "locale");
  info.mac_address = opt_string(body, "mac_address");
  info.name = opt_string(body, "name");
  info.ssid = opt_string(body, "ssid");
  info.timezone = opt_string(body, "timezone");
  info.uma_client_id = opt_string(body, "uma_client_id");
  info.extras = extras_of(body, {"bssid", "hotspot_bssid", "ip_address", "locale", "location",
                                 "mac_address", "name", "ssid", "timezone", "uma_client_id"});
  if (auto loc = body.find("location"); loc != body.end() && !loc->is_null()) {
    require_object(*loc, "location");
    info.country_code = opt_string(*loc, "country_code");
    info.latitude = opt_number(*loc, "latitude");
    info.longitude = opt_number(*loc, "longitude");
    json loc_extras = extras_of(*loc, {"country_code", "latitude", "longitude"});
    if (!loc_extras.empty()) info.extras["location"] = std::move(loc_extras);
  }
  return info;
}

std::optional<LocalCivilTime> to_zone(std::int64_t epoch_ms, const std::string& timezone) {
  absl::TimeZone tz;
  if (!absl::LoadTimeZone(timezone, &tz)) return std::nullopt;
  const absl::CivilSecond cs = absl::ToCivilSecond(absl::FromUnixMillis(epoch_ms), tz);
  LocalCivilTime out;
  out.date = {static_cast<int>(cs.year()), cs.month(), cs.day()};
  out.time = {cs.hour(), cs.minute(), cs.second()};
  return out;
}

std::vector<AlarmRecord> parse_alarms(const RawEvidence& ev,
                                      const std::optional<std::string>& timezone) {
  const json body = decode_body(ev);
  std::vector<AlarmRecord> out;
  for (const json& item : list_body(body, "alarm", ev.endpoint_path)) {
    require_object(item, "alarm entry");
    AlarmRecord a;
    a.id = req_string(item, "id");
    a.status = req_int(item, "status");
    a.fire_time_ms = req_int(item, "fire_time");
    if (a.fire_time_ms < 0) throw SchemaViolation("fire_time: negative");
    const json date = item.value("date_pattern", json());
    require_object(date, "date_pattern");
    a.date = {req_int_in(date, "year", 1, 9999), req_int_in(date, "month", 1, 12),
              req_int_in(date, "day", 1, 31)};
    const json tp = item.value("time_pattern", json());
    require_object(tp, "time_pattern");
    a.time_pattern = {req_int_in(tp, "hour", 0, 23), req_int_in(tp, "minute", 0, 59),
                      req_int_in(tp, "second", 0, 59)};
    a.extras = extras_of(item, {"id", "status", "fire_time", "date_pattern", "time_pattern"});
    if (timezone) {
      if (auto local = to_zone(a.fire_time_ms, *timezone)) {
        a.consistent = local->date == a.date && local->time == a.time_pattern;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

ConfiguredNetworks parse_configured_networks(const RawEvidence& ev) {
  const json body = decode_body(ev);
  ConfiguredNetworks out;
  const json* networks = &body;
  if (body.is_object()) {
    auto it = body.find("configured_networks");
    if (it == body.end()) throw SchemaViolation("missing 'configured_networks' list");
    networks = &*it;
    if (auto cd = body.find("connected_devices"); cd != body.end()) {
      for (const json& d : require_array(*cd, "connected_devices")) {
        require_object(d, "connected device");
        ConnectedDevice dev;
        dev.device_class = req_int(d, "device_class");
        dev.mac_address = req_string(d, "mac_address");
        dev.name = opt_string(d, "name").value_or("");
        dev.extras = extras_of(d, {"device_class", "mac_address", "name"});
        out.connected_devices.push_back(std::move(dev));
      }
    }
    out.extras = extras_of(body, {"configured_networks", "connected_devices"});
  }
  std::set<std::string> seen;
  for (const json& n : require_array(*networks, "configured_networks")) {
    require_object(n, "configured network");
    ConfiguredNetwork net;
    net.ssid = req_string(n, "ssid");
    net.extras = extras_of(n, {"ssid"});
    if (!seen.insert(trim(net.ssid)).second) {
      ++out.duplicate_ssids;
      continue;
    }
    out.networks.push_back(std::move(net));
  }
  return out;
}

std::vector<WifiScanEntry> parse_scan_results(const RawEvidence& ev) {
  const json body = decode_body(ev);
  std::vector<WifiScanEntry> out;
  for (const json& item : list_body(body, "scan_results", ev.endpoint_path)) {
    require_object(item, "scan entry");
    WifiScanEntry e;
    e.bssid = req_string(item, "bssid");
    if (!is_mac_address(e.bssid)) throw SchemaViolation("bssid: not a MAC address: " + e.bssid);
    e.ssid = opt_string(item, "ssid").value_or("");
    e.extras = extras_of(item, {"bssid", "ssid"});
    out.push_back(std::move(e));
  }
  return out;
}

AppDeviceId parse_app_device_id(const RawEvidence& ev) {
  const json body = decode_body(ev);
  require_object(body, ev.endpoint_path);
  AppDeviceId out;
  out.app_device_id = req_string(body, "app_device_id");
  if (out.app_device_id.empty() ||
      !std::all_of(out.app_device_id.begin(), out.app_device_id.end(),
                   [](unsigned char c) { return std::isxdigit(c) != 0; })) {
    throw SchemaViolation("app_device_id: not a hex string");
  }
  out.extras = extras_of(body, {"app_device_id"});
  return out;
}

SpeedTestResult parse_speed_test(const RawEvidence& ev) {
  const json body = decode_body(ev);
  require_object(body, ev.endpoint_path);
  SpeedTestResult out;
  out.bytes_received = req_int(body, "bytes_received");
  out.response_code = req_int(body, "response_code");
  out.time_for_data_fetch_ms = req_int(body, "time_for_data_fetch");
  out.time_for_http_response_ms = req_int(body, "time_for_http_response");
  for (auto v : {out.bytes_received, out.response_code, out.time_for_data_fetch_ms,
                 out.time_for_http_response_ms}) {
    if (v < 0) throw SchemaViolation("speed test: negative value");
  }
  out.extras = extras_of(body, {"bytes_received", "response_code", "time_for_data_fetch",
                                "time_for_http_response"});
  return out;
}

OfferToken parse_offer(const RawEvidence& ev) {
  const json body = decode_body(ev);
  require_object(body, ev.endpoint_path);
  OfferToken out;
  out.token = req_string(body, "token");
  if (out.token.empty()) throw SchemaViolation("token: must be non-empty");
  out.extras = extras_of(body, {"token"});
  return out;
}

std::vector<TimezoneEntry> parse_timezones(const RawEvidence& ev) {
  return parse_display_list<TimezoneEntry>(ev, "timezone", "timezones");
}

std::vector<LocaleEntry> parse_locales(const RawEvidence& ev) {
  return parse_display_list<LocaleEntry>(ev, "locale", "locales");
}

void to_json(json& j, const EurekaInfo& v) {
  j = json::object();
  auto put = [&](json& dst, const char* key, const auto& f) {
    if (f) dst[key] = *f;
  };
  put(j, "bssid", v.bssid);
  put(j, "hotspot_bssid", v.hotspot_bssid);
  put(j, "ip_address", v.ip_address);
  put(j, "locale", v.locale);
  put(j, "mac_address", v.mac_address);
  put(j, "name", v.name);
  put(j, "ssid", v.ssid);
  put(j, "timezone", v.timezone);
  put(j, "uma_client_id", v.uma_client_id);
  json loc = json::object();
  put(loc, "country_code", v.country_code);
  put(loc, "latitude", v.latitude);
  put(loc, "longitude", v.longitude);
  if (auto it = v.extras.find("location"); it != v.extras.end()) merge_extras(loc, *it);
  if (!loc.empty()) j["location"] = std::move(loc);
  merge_extras(j, v.extras);
  if (auto missing = v.missing_fields(); !missing.empty()) j["missing_fields"] = missing;
  if (v.latitude || v.longitude) j["location_unset"] = v.location_unset();
}

void to_json(json& j, const OfferToken& v) {
  j = v.extras;
  j["token"] = v.token;
}

void to_json(json& j, const TimezoneEntry& v) {
  j = v.extras;
  j["display_string"] = v.display_string;
  j["timezone"] = v.id;
}

void to_json(json& j, const LocaleEntry& v) {
  j = v.extras;
  j["display_string"] = v.display_string;
  j["locale"] = v.id;
}

void to_json(json& j, const AlarmRecord& v) {
  j = v.extras;
  j["id"] = v.id;
  j["status"] = v.status;
  j["fire_time"] = v.fire_time_ms;
  j["date_pattern"] = {{"year", v.date.year}, {"month", v.date.month}, {"day", v.date.day}};
  j["time_pattern"] = {
      {"hour", v.time_pattern.hour}, {"minute", v.time_pattern.minute}, {"second", v.time_pattern.second}};
  if (v.consistent) j["consistent"] = *v.consistent;
}

void to_json(json& j, const ConnectedDevice& v) {
  j = v.extras;
  j["device_class"] = v.device_class;
  j["mac_address"] = v.mac_address;
  j["name"] = v.name;
}

void to_json(json& j, const ConfiguredNetwork& v) {
  j = v.extras;
  j["ssid"] = v.ssid;
}

void to_json(json& j, const ConfiguredNetworks& v) {
  j = v.extras;
  j["configured_networks"] = v.networks;
  j["connected_devices"] = v.connected_devices;
  if (v.duplicate_ssids > 0) j["duplicate_ssids"] = v.duplicate_ssids;
}

void to_json(json& j, const AppDeviceId& v) {
  j = v.extras;
  j["app_device_id"] = v.app_device_id;
}

void to_json(json& j, const SpeedTestResult& v) {
  j = v.extras;
  j["bytes_received"] = v.bytes_received;
  j["response_code"] = v.response_code;
  j["time_for_data_fetch"] = v.time_for_data_fetch_ms;
  j["time_for_http_response"] = v.time_for_http_response_ms;
}

void to_json(json& j, const WifiScanEntry& v) {
  j = v.extras;
  j["bssid"] = v.bssid;
  j["ssid"] = v.ssid;
}

json parse_to_json(EndpointKind kind, const RawEvidence& ev,
                   const std::optional<std::string>& timezone) {
  switch (kind) {
    case EndpointKind::EurekaInfo: return parse_eureka_info(ev);
    case EndpointKind::Offer: return parse_offer(ev);
    case EndpointKind::SupportedTimezones: return parse_timezones(ev);
    case EndpointKind::SupportedLocales: return parse_locales(ev);
    case EndpointKind::Alarms: {
      json out{{"alarm", parse_alarms(ev, timezone)}};
      // Sibling lists (timers) are not modelled but must survive.
      const json body = json::parse(ev.body, nullptr, false);
      if (body.is_object()) {
        for (const auto& [k, v] : body.items()) {
          if (k != "alarm") out[k] = v;
        }
      }
      return out;
    }
    case EndpointKind::ConfiguredNetworks: return parse_configured_networks(ev);
    case EndpointKind::AppDeviceId: return parse_app_device_id(ev);
    case EndpointKind::InternetSpeedTest: return parse_speed_test(ev);
    case EndpointKind::ScanWifi: return json{{"status", ev.http_status}};
    case EndpointKind::ScanResults: return parse_scan_results(ev);
  }
  throw std::out_of_range("unknown endpoint kind");
}

std::vector<std::string> sensitive_pointers(EndpointKind kind, const json& parsed) {
  if (kind == EndpointKind::Offer && parsed.contains("token")) return {"/token"};
  return {};
}

std::optional<std::string> AcquisitionBundle::device_timezone() const {
  for (const auto& item : items) {
    if (item.kind != EndpointKind::EurekaInfo || !item.evidence || item.error) continue;
    try {
      return parse_eureka_info(*item.evidence).timezone;
    } catch (const SchemaViolation&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

AcquisitionBundle acquire_all(const DeviceTarget& target, Mode mode,
                              const AcquireOptions& options) {
  AcquisitionBundle bundle;
  bundle.target = target;
  bundle.mode = mode;

  auto run = [&](EndpointKind kind) {
    const EndpointSpec& spec = endpoint(kind);
    AcquisitionItem item;
    item.kind = kind;
    item.method = spec.method;
    item.path = std::string(spec.path);
    try {
      item.evidence = fetch_endpoint(target, kind, options.clock);
    } catch (const UnexpectedStatus& e) {
      item.evidence = e.evidence();
      item.error = ErrorRecord{e.kind(), e.what()};
    } catch (const Error& e) {
      item.error = ErrorRecord{e.kind(), e.what()};
    } catch (const std::exception& e) {
      item.error = ErrorRecord{"InvalidTarget", e.what()};
    }
    bundle.items.push_back(std::move(item));
  };

  for (EndpointKind k : {EndpointKind::EurekaInfo, EndpointKind::Offer,
                         EndpointKind::SupportedTimezones, EndpointKind::SupportedLocales,
                         EndpointKind::Alarms, EndpointKind::ConfiguredNetworks}) {
    run(k);
  }
  if (mode == Mode::Active) {
    run(EndpointKind::AppDeviceId);
    run(EndpointKind::InternetSpeedTest);
    run(EndpointKind::ScanWifi);
    std::this_thread::sleep_for(options.scan_settle);
    run(EndpointKind::ScanResults);
  }
  return bundle;
}

}  // namespace ghf::local_api
