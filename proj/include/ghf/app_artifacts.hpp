#pragma once

// Parsers for the companion app's data folder as copied off the phone:
// shared_prefs/*.xml, the embedded Wi-Fi list, account artifacts and the
// home_graph_<base64>.proto files.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ghf/common.hpp"

namespace ghf::app {

using json = nlohmann::json;

inline constexpr std::string_view kAppPackage = "com.google.android.apps.chromecast.app";

/// The three preference files known to hold evidence.
inline constexpr std::array<std::string_view, 3> kDocumentedPrefs{
    "com.google.android.gms.appid.xml",
    "com.google.android.apps.chromecast.app_preferences_no_backup.xml",
    "com.google.android.apps.chromecast.app_preferences.xml",
};

/// Key under which the app stores the saved Wi-Fi list as a JSON string.
inline constexpr std::string_view kWifiListKey = "wifi_credentials";

/// float, set and anything unexpected: kept as text with its element name.
struct RawValue {
  std::string type;
  std::string text;
  bool operator==(const RawValue&) const = default;
};

using PrefValue = std::variant<std::string, std::int64_t, bool, RawValue>;

std::string type_name(const PrefValue& v);

struct SharedPrefDocument {
  std::string source_path;
  std::map<std::string, PrefValue> entries;

  /// False when the file name is not one of kDocumentedPrefs.
  bool documented() const;
  const std::string* string_value(const std::string& key) const;
  std::optional<std::int64_t> integer_value(const std::string& key) const;
};

class MalformedXml : public Error {
 public:
  MalformedXml(const std::string& what, std::size_t line)
      : Error("MalformedXml", what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NotPresent : public Error {
 public:
  explicit NotPresent(const std::string& what) : Error("NotPresent", what) {}
};

class MalformedEmbeddedList : public Error {
 public:
  explicit MalformedEmbeddedList(const std::string& what) : Error("MalformedEmbeddedList", what) {}
};

class NotHomeGraph : public Error {
 public:
  explicit NotHomeGraph(const std::string& what) : Error("NotHomeGraph", what) {}
};

class InvalidBase64 : public Error {
 public:
  explicit InvalidBase64(const std::string& what) : Error("InvalidBase64", what) {}
};

class OutOfRange : public Error {
 public:
  explicit OutOfRange(const std::string& what) : Error("OutOfRange", what) {}
};

class RootMissing : public Error {
 public:
  explicit RootMissing(const std::string& what) : Error("RootMissing", what) {}
};

/// Root must be <map>; children are string/long/int/boolean/float/set
/// elements carrying a name attribute. String bodies are kept exactly
/// (after XML entity decoding).
SharedPrefDocument parse_shared_prefs(std::string_view xml, const std::string& source_path);

struct WifiCredential {
  std::string name;
  std::string password;
  std::string ssid;
  std::string security;
  std::optional<std::string> bssid;
  std::optional<std::int64_t> channel;
  bool operator==(const WifiCredential&) const = default;
};

std::vector<WifiCredential> extract_wifi_credentials(const SharedPrefDocument& doc,
                                                     std::string_view key = kWifiListKey);

/// A value together with the (file, key) it was read from.
template <typename T>
struct Sourced {
  T value;
  std::string source_path;
  std::string key;
  bool operator==(const Sourced&) const = default;
};

struct AccountArtifact {
  std::optional<Sourced<std::string>> email;
  std::vector<Sourced<std::string>> address_lines;
  std::map<std::string, Sourced<std::string>> tokens;
  std::optional<Sourced<std::string>> server_url;
  std::optional<Sourced<std::int64_t>> server_port;
  std::optional<Sourced<std::int64_t>> expiration_raw;
  std::optional<Sourced<std::string>> local_ip;
  std::optional<Sourced<std::string>> setup_salt;
  std::optional<Sourced<std::string>> dismissed_chip_mac;

  /// Field names with no value in any document.
  std::vector<std::string> missing() const;
  /// Email has an '@' and the expiration decodes into [2000, 2100].
  bool plausible() const;
};

/// Token kinds looked up by key.
inline constexpr std::array<std::string_view, 4> kTokenKeys{
    "LastToken", "ph_server_token", "gcmIdToken", "live_card_consistency_token"};

/// First document (in the given order) holding a key wins.
AccountArtifact extract_account_artifacts(const std::vector<SharedPrefDocument>& docs);

struct HomeGraphFile {
  std::string path;
  std::string base64_segment;
  std::string decoded_email;
  std::uint64_t size = 0;
  std::optional<Digest> sha256;
};

/// Decodes the file name only; size and sha256 are filled by scan_app_folder.
/// Accepts standard and URL-safe alphabets, padded or not, but only in
/// canonical form (re-encoding must reproduce the segment).
HomeGraphFile decode_home_graph_filename(const std::string& path);

/// Counts microseconds from 1601-01-01T00:00:00Z (Windows FILETIME origin).
Instant decode_1601_epoch_micros(std::int64_t raw);

struct UnrecognizedFile {
  std::string path;
  std::uint64_t size = 0;
  Digest sha256{};
};

struct ArtifactInventory {
  std::vector<SharedPrefDocument> documents;
  std::vector<WifiCredential> wifi_credentials;
  /// Document the Wi-Fi list came from, empty if none held it.
  std::string wifi_source;
  AccountArtifact account;
  std::vector<HomeGraphFile> home_graph;
  std::vector<UnrecognizedFile> unrecognized;
  std::vector<std::string> warnings;
};

/// Accepts the package folder itself or any directory containing it. Paths
/// in the inventory are relative to the package folder and sorted.
ArtifactInventory scan_app_folder(const std::string& root);

json to_json(const SharedPrefDocument& doc);
json to_json(const ArtifactInventory& inv);

/// JSON pointers into to_json(inventory) whose values are Wi-Fi passwords,
/// SSIDs and BSSIDs, tokens or the raw Wi-Fi list.
std::vector<std::string> sensitive_pointers(const json& inventory);

bool is_sensitive_key(std::string_view key);

}  // namespace ghf::app
