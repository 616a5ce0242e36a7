#include "ghf/app_artifacts.hpp"

#include <absl/strings/escaping.h>

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <filesystem>
#include <set>
#include <sstream>

namespace ghf::app {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string file_name(const std::string& path) { return fs::path(path).filename().string(); }

std::optional<std::int64_t> to_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
  return v;
}

std::string pointer_escape(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

std::string type_name(const PrefValue& v) {
  switch (v.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "boolean";
    default: return std::get<RawValue>(v).type;
  }
}

bool SharedPrefDocument::documented() const {
  const std::string name = file_name(source_path);
  return std::find(kDocumentedPrefs.begin(), kDocumentedPrefs.end(), name) != kDocumentedPrefs.end();
}

const std::string* SharedPrefDocument::string_value(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) return nullptr;
  return std::get_if<std::string>(&it->second);
}

std::optional<std::int64_t> SharedPrefDocument::integer_value(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  // Some builds store numbers as strings.
  if (const auto* s = std::get_if<std::string>(&it->second)) return to_int(*s);
  return std::nullopt;
}

SharedPrefDocument parse_shared_prefs(std::string_view xml, const std::string& source_path) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw MalformedXml(e.message(), e.line());
  }

  // Position info is lost once the tree is built; report the root line.
  constexpr std::size_t kRootLine = 1;
  if (tree.size() != 1 || tree.begin()->first != "map") {
    throw MalformedXml("root element is not <map>", kRootLine);
  }
  SharedPrefDocument doc;
  doc.source_path = source_path;
  for (const auto& [tag, node] : tree.begin()->second) {
    if (tag == "<xmlattr>") continue;
    if (tag == "<xmlcomment>") continue;
    const auto name = node.get_optional<std::string>("<xmlattr>.name");  // boost::optional
    if (!name) throw MalformedXml("<" + tag + "> without a name attribute", kRootLine);
    if (doc.entries.count(*name)) throw MalformedXml("duplicate key " + *name, kRootLine);

    std::optional<std::string> attr_value;
    if (auto v = node.get_optional<std::string>("<xmlattr>.value")) attr_value = *v;
    PrefValue value;
    if (tag == "string") {
      value = node.data();
    } else if (tag == "long" || tag == "int") {
      const auto v = attr_value ? to_int(*attr_value) : std::nullopt;
      if (!v) throw MalformedXml("bad integer for " + *name, kRootLine);
      value = *v;
    } else if (tag == "boolean") {
      if (attr_value != "true" && attr_value != "false") {
        throw MalformedXml("bad boolean for " + *name, kRootLine);
      }
      value = *attr_value == "true";
    } else if (tag == "set") {
      json items = json::array();
      for (const auto& [child_tag, child] : node) {
        if (child_tag == "string") items.push_back(child.data());
      }
      value = RawValue{tag, items.dump(-1, ' ', false, json::error_handler_t::replace)};
    } else {
      value = RawValue{tag, attr_value ? *attr_value : node.data()};
    }
    doc.entries.emplace(*name, std::move(value));
  }
  return doc;
}

std::vector<WifiCredential> extract_wifi_credentials(const SharedPrefDocument& doc,
                                                     std::string_view key) {
  const std::string* raw = doc.string_value(std::string(key));
  if (!raw) throw NotPresent(std::string(key) + " not in " + doc.source_path);
  const json list = json::parse(*raw, nullptr, false);
  if (!list.is_array()) throw MalformedEmbeddedList("value of " + std::string(key) + " is not a JSON array");

  auto required = [](const json& e, const char* field) {
    const auto it = e.find(field);
    if (it == e.end() || !it->is_string()) {
      throw MalformedEmbeddedList(std::string("entry without string ") + field);
    }
    return it->get<std::string>();
  };
  std::vector<WifiCredential> out;
  for (const auto& e : list) {
    if (!e.is_object()) throw MalformedEmbeddedList("entry is not an object");
    WifiCredential c;
    c.name = required(e, "name");
    c.password = required(e, "password");
    c.ssid = required(e, "ssid");
    c.security = required(e, "security");
    if (const auto it = e.find("bssid"); it != e.end() && !it->is_null()) {
      if (!it->is_string()) throw MalformedEmbeddedList("bssid is not a string");
      c.bssid = it->get<std::string>();
    }
    if (const auto it = e.find("channel"); it != e.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw MalformedEmbeddedList("channel is not an integer");
      c.channel = it->get<std::int64_t>();
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> AccountArtifact::missing() const {
  std::vector<std::string> out;
  if (!email) out.push_back("email");
  if (address_lines.empty()) out.push_back("address_lines");
  for (auto k : kTokenKeys) {
    if (!tokens.count(std::string(k))) out.push_back("tokens." + std::string(k));
  }
  if (!server_url) out.push_back("server_url");
  if (!server_port) out.push_back("server_port");
  if (!expiration_raw) out.push_back("expiration_raw");
  if (!local_ip) out.push_back("local_ip");
  if (!setup_salt) out.push_back("setup_salt");
  if (!dismissed_chip_mac) out.push_back("dismissed_chip_mac");
  return out;
}

bool AccountArtifact::plausible() const {
  if (email && email->value.find('@') == std::string::npos) return false;
  if (expiration_raw) {
    try {
      const auto day = std::chrono::floor<std::chrono::days>(decode_1601_epoch_micros(expiration_raw->value));
      const int year = static_cast<int>(std::chrono::year_month_day(day).year());
      if (year < 2000 || year > 2100) return false;
    } catch (const OutOfRange&) {
      return false;
    }
  }
  return true;
}

AccountArtifact extract_account_artifacts(const std::vector<SharedPrefDocument>& docs) {
  AccountArtifact a;
  auto find_string = [&](const std::string& key) -> std::optional<Sourced<std::string>> {
    for (const auto& d : docs) {
      if (const auto* v = d.string_value(key)) return Sourced<std::string>{*v, d.source_path, key};
    }
    return std::nullopt;
  };
  auto find_int = [&](const std::string& key) -> std::optional<Sourced<std::int64_t>> {
    for (const auto& d : docs) {
      if (const auto v = d.integer_value(key)) return Sourced<std::int64_t>{*v, d.source_path, key};
    }
    return std::nullopt;
  };
  a.email = find_string("current_account_name");
  for (const char* key : {"addressLine", "addressLine2"}) {
    if (auto v = find_string(key)) a.address_lines.push_back(std::move(*v));
  }
  for (auto k : kTokenKeys) {
    if (auto v = find_string(std::string(k))) a.tokens.emplace(std::string(k), std::move(*v));
  }
  a.server_url = find_string("servers");
  a.server_port = find_int("port");
  a.expiration_raw = find_int("expiration");
  a.local_ip = find_string("address");
  a.setup_salt = find_string("setup-salt");
  a.dismissed_chip_mac = find_string("dismissedActionChipSetupDevices");
  return a;
}

HomeGraphFile decode_home_graph_filename(const std::string& path) {
  constexpr std::string_view kPrefix = "home_graph_";
  constexpr std::string_view kSuffix = ".proto";
  const std::string name = file_name(path);
  if (!name.starts_with(kPrefix) || !name.ends_with(kSuffix) ||
      name.size() < kPrefix.size() + kSuffix.size()) {
    throw NotHomeGraph(name + " does not match home_graph_<base64>.proto");
  }
  HomeGraphFile f;
  f.path = path;
  f.base64_segment = name.substr(kPrefix.size(), name.size() - kPrefix.size() - kSuffix.size());
  const std::string& seg = f.base64_segment;
  if (seg.empty()) throw InvalidBase64("empty base64 segment");

  const bool web_safe = seg.find_first_of("-_") != std::string::npos;
  std::string decoded;
  const bool ok = web_safe ? absl::WebSafeBase64Unescape(seg, &decoded)
                           : absl::Base64Unescape(seg, &decoded);
  if (!ok || decoded.empty()) throw InvalidBase64("cannot decode " + seg);

  // The decoders tolerate stray padding and non-zero trailing bits; insist on
  // the one encoding that maps back to this file name.
  std::string again = web_safe ? absl::WebSafeBase64Escape(decoded) : absl::Base64Escape(decoded);
  auto strip = [](std::string s) {
    while (!s.empty() && s.back() == '=') s.pop_back();
    return s;
  };
  const bool padded = seg.back() == '=';
  if (strip(again) != strip(seg) || (padded && seg.size() % 4 != 0)) {
    throw InvalidBase64(seg + " is not canonical base64");
  }
  f.decoded_email = std::move(decoded);
  return f;
}

Instant decode_1601_epoch_micros(std::int64_t raw) {
  using namespace std::chrono;
  if (raw < 0) throw OutOfRange("negative 1601-epoch value");
  const sys_days origin = year_month_day(year(1601), January, day(1));
  const sys_days limit = year_month_day(year(10000), January, day(1));
  const auto span_us = duration_cast<microseconds>(limit - origin).count();
  if (raw >= span_us) throw OutOfRange(std::to_string(raw) + " is past year 9999");
  return Instant(duration_cast<microseconds>(origin.time_since_epoch()) + microseconds(raw));
}

ArtifactInventory scan_app_folder(const std::string& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw RootMissing(root + " is not a directory");
  fs::path base = root;
  if (fs::is_directory(base / kAppPackage, ec)) base /= kAppPackage;

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(base, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (it->is_regular_file(ec)) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  ArtifactInventory inv;
  if (ec) inv.warnings.push_back("walk stopped early: " + ec.message());
  for (const auto& p : files) {
    const std::string rel = fs::relative(p, base).generic_string();
    Bytes data;
    try {
      data = read_file(p.string());
    } catch (const std::exception& e) {
      inv.warnings.push_back(rel + ": unreadable: " + e.what());
      continue;
    }
    const std::string dir = fs::path(rel).parent_path().generic_string();
    const std::string name = p.filename().string();
    if (dir == "shared_prefs" && name.ends_with(".xml")) {
      try {
        inv.documents.push_back(parse_shared_prefs(data, rel));
        continue;
      } catch (const MalformedXml& e) {
        inv.warnings.push_back(rel + ": " + e.what());
      }
    } else if (dir == "files" && name.starts_with("home_graph_")) {
      try {
        HomeGraphFile hg = decode_home_graph_filename(rel);
        hg.size = data.size();
        hg.sha256 = sha256(data);
        inv.home_graph.push_back(std::move(hg));
        continue;
      } catch (const Error& e) {
        inv.warnings.push_back(rel + ": " + e.what());
      }
    }
    inv.unrecognized.push_back({rel, data.size(), sha256(data)});
  }

  for (const auto& d : inv.documents) {
    try {
      inv.wifi_credentials = extract_wifi_credentials(d);
      inv.wifi_source = d.source_path;
      break;
    } catch (const NotPresent&) {
    } catch (const MalformedEmbeddedList& e) {
      inv.warnings.push_back(d.source_path + ": " + e.what());
    }
  }
  inv.account = extract_account_artifacts(inv.documents);
  return inv;
}

json to_json(const SharedPrefDocument& doc) {
  json entries = json::object();
  for (const auto& [k, v] : doc.entries) {
    json e{{"type", type_name(v)}};
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, RawValue>) {
            e["type"] = x.type;
            e["value"] = x.text;
            e["raw"] = true;
          } else {
            e["value"] = x;
          }
        },
        v);
    entries[k] = std::move(e);
  }
  return {{"source_path", doc.source_path},
          {"documented", doc.documented()},
          {"entries", std::move(entries)}};
}

namespace {

template <typename T>
json sourced(const Sourced<T>& s) {
  return {{"value", s.value}, {"source_path", s.source_path}, {"key", s.key}};
}

template <typename T>
void put(json& j, const char* field, const std::optional<Sourced<T>>& s) {
  if (s) j[field] = sourced(*s);
}

}  // namespace

json to_json(const ArtifactInventory& inv) {
  json j = json::object();
  j["documents"] = json::array();
  for (const auto& d : inv.documents) j["documents"].push_back(to_json(d));

  j["wifi_credentials"] = json::array();
  for (const auto& c : inv.wifi_credentials) {
    json e{{"name", c.name},
           {"password", c.password},
           {"ssid", c.ssid},
           {"security", c.security},
           {"source_path", inv.wifi_source},
           {"key", kWifiListKey}};
    if (c.bssid) e["bssid"] = *c.bssid;
    if (c.channel) e["channel"] = *c.channel;
    j["wifi_credentials"].push_back(std::move(e));
  }

  const auto& a = inv.account;
  json acc = json::object();
  put(acc, "email", a.email);
  acc["address_lines"] = json::array();
  for (const auto& l : a.address_lines) acc["address_lines"].push_back(sourced(l));
  acc["tokens"] = json::object();
  for (const auto& [k, v] : a.tokens) acc["tokens"][k] = sourced(v);
  put(acc, "server_url", a.server_url);
  put(acc, "server_port", a.server_port);
  put(acc, "expiration_raw", a.expiration_raw);
  if (a.expiration_raw) {
    try {
      acc["expiration_decoded"] = {
          {"utc", format_utc_ms(decode_1601_epoch_micros(a.expiration_raw->value))},
          {"interpretation", "microseconds since 1601-01-01T00:00:00Z (inferred)"}};
    } catch (const OutOfRange& e) {
      acc["expiration_decoded"] = {{"error", e.what()}};
    }
  }
  put(acc, "local_ip", a.local_ip);
  put(acc, "setup_salt", a.setup_salt);
  put(acc, "dismissed_chip_mac", a.dismissed_chip_mac);
  acc["missing"] = a.missing();
  acc["plausible"] = a.plausible();
  j["account"] = std::move(acc);

  j["home_graph"] = json::array();
  for (const auto& h : inv.home_graph) {
    json e{{"path", h.path},
           {"base64_segment", h.base64_segment},
           {"decoded_email", printable(h.decoded_email)},
           {"size", h.size}};
    if (h.sha256) e["sha256"] = to_hex(*h.sha256);
    j["home_graph"].push_back(std::move(e));
  }
  j["unrecognized"] = json::array();
  for (const auto& u : inv.unrecognized) {
    j["unrecognized"].push_back({{"path", u.path}, {"size", u.size}, {"sha256", to_hex(u.sha256)}});
  }
  j["warnings"] = inv.warnings;
  return j;
}

bool is_sensitive_key(std::string_view key) {
  if (key == kWifiListKey) return true;
  // GCM token cache entries ("|T|<sender id>|GCM") repeat the registration token.
  if (key.starts_with("|T|") && key.ends_with("|GCM")) return true;
  return std::find(kTokenKeys.begin(), kTokenKeys.end(), key) != kTokenKeys.end();
}

std::vector<std::string> sensitive_pointers(const json& inventory) {
  std::vector<std::string> out;
  if (const auto it = inventory.find("documents"); it != inventory.end() && it->is_array()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& entries = (*it)[i].value("entries", json::object());
      for (const auto& [k, v] : entries.items()) {
        if (is_sensitive_key(k) && v.contains("value")) {
          out.push_back("/documents/" + std::to_string(i) + "/entries/" + pointer_escape(k) + "/value");
        }
      }
    }
  }
  if (const auto it = inventory.find("wifi_credentials"); it != inventory.end() && it->is_array()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      // The saved-network fields are shifted in the source data (bssid holds
      // a passphrase-like string), so every field but name/security is secret.
      for (const char* f : {"password", "ssid", "bssid"}) {
        if ((*it)[i].contains(f)) out.push_back("/wifi_credentials/" + std::to_string(i) + "/" + f);
      }
    }
  }
  if (inventory.contains("account") && inventory["account"].contains("tokens")) {
    for (const auto& [k, v] : inventory["account"]["tokens"].items()) {
      out.push_back("/account/tokens/" + pointer_escape(k) + "/value");
    }
  }
  return out;
}

}  // namespace ghf::app
