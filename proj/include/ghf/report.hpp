#pragma once

// Hashed forensic report: one canonical JSON document plus a raw/ directory
// holding every payload the report's items were parsed from.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghf/common.hpp"

namespace ghf::report {

using json = nlohmann::json;

inline constexpr std::string_view kSchemaId = "ghf-report/1";
inline constexpr std::string_view kRedacted = "[REDACTED]";
inline constexpr std::string_view kReportFile = "report.json";

/// Stable source kinds, in report sort order.
inline constexpr std::string_view kLocalApi = "local_api";
inline constexpr std::string_view kPortProbe = "port_probe";
inline constexpr std::string_view kAppArtifact = "app_artifact";
inline constexpr std::string_view kCarving = "carving";
inline constexpr std::string_view kCapture = "capture";

struct EvidenceItem {
  std::string source_kind;
  std::string identifier;
  Instant acquired_at{};
  Digest sha256{};
  /// Relative to the report directory, always under raw/.
  std::string payload_ref;
  /// Structured summary, or {"error": {"kind": ..., "message": ...}}.
  json parsed = json::object();
  /// JSON pointers into `parsed` holding secrets.
  std::vector<std::string> sensitive;

  bool operator==(const EvidenceItem&) const = default;
};

json error_record(const std::string& kind, const std::string& message);

struct ForensicReport {
  std::string case_id;
  std::string examiner;
  std::string tool_version{kToolVersion};
  Instant generated_at{};
  /// Device target ({"ip", "api_port"}) or {"inputs": [paths]}.
  json target = json::object();
  std::vector<EvidenceItem> items;
  std::vector<std::string> warnings;
  bool redaction = true;

  bool operator==(const ForensicReport&) const = default;
};

class ReportInvalid : public Error {
 public:
  explicit ReportInvalid(const std::string& what) : Error("ReportInvalid", what) {}
};

/// Writes raw payloads under <dir>/raw/ and hands out items pointing at them.
class EvidenceStore {
 public:
  explicit EvidenceStore(std::string dir);

  const std::string& dir() const { return dir_; }

  /// Stores `payload`, hashes it, and returns the item. The file name is the
  /// sanitized identifier plus a digest prefix, so equal evidence lands on
  /// the same file and the name never depends on insertion order.
  EvidenceItem add(std::string_view source_kind, const std::string& identifier, std::string_view payload,
                   Instant acquired_at, json parsed, std::vector<std::string> sensitive = {});

 private:
  std::string dir_;
};

/// Truncates timestamps to milliseconds, sorts items by (source_kind,
/// identifier, acquired_at, sha256, payload_ref), normalizes strings to
/// valid UTF-8 and replaces every sensitive value with "[REDACTED]" when
/// redaction is on.
void finalize(ForensicReport& report);

/// Deterministic bytes: sorted keys, two-space indent, millisecond UTC
/// timestamps, lowercase hex digests, and a "digest" member that is the
/// SHA-256 of the same document serialized without it.
std::string canonical_serialize(const ForensicReport& report);

/// Inverse of canonical_serialize. Throws ReportInvalid on schema errors or
/// a digest mismatch.
ForensicReport deserialize(std::string_view text);

/// Hex SHA-256 of the serialization without the digest member.
std::string digest_of(const ForensicReport& report);

/// finalize + write <dir>/report.json. Returns the serialized bytes.
std::string write_report(ForensicReport& report, const std::string& dir);
ForensicReport read_report(const std::string& dir);

struct Verification {
  bool digest_ok = false;
  bool round_trip_ok = false;
  /// payload_ref that is missing or whose bytes do not hash to sha256.
  std::vector<std::string> payload_problems;
  /// Sensitive pointers not redacted although redaction is on.
  std::vector<std::string> redaction_problems;

  bool ok() const { return digest_ok && round_trip_ok && payload_problems.empty() && redaction_problems.empty(); }
};

Verification verify_report_dir(const std::string& dir);

/// Concatenates the items of several report directories into `out_dir`,
/// copying raw payloads and re-sorting. Throws ReportInvalid when an input
/// fails its digest or a payload no longer matches its hash.
ForensicReport merge_reports(const std::vector<std::string>& dirs, const std::string& out_dir,
                             const std::string& case_id, const std::string& examiner, Instant at);

}  // namespace ghf::report
