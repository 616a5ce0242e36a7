#include "ghf/report.hpp"

#include <algorithm>
#include <filesystem>
#include <tuple>

namespace ghf::report {

namespace fs = std::filesystem;

namespace {

Instant to_ms(Instant t) { return std::chrono::floor<std::chrono::milliseconds>(t); }

bool valid_utf8(const std::string& s) {
  try {
    (void)json(s).dump();
    return true;
  } catch (const json::type_error&) {
    return false;
  }
}

void normalize_strings(json& j) {
  if (j.is_string()) {
    auto& s = j.get_ref<std::string&>();
    if (!valid_utf8(s)) s = printable(s);
  } else if (j.is_array()) {
    for (auto& v : j) normalize_strings(v);
  } else if (j.is_object()) {
    json out = json::object();
    for (auto& [k, v] : j.items()) {
      normalize_strings(v);
      out[valid_utf8(k) ? k : printable(k)] = std::move(v);
    }
    j = std::move(out);
  }
}

std::string fix_string(const std::string& s) { return valid_utf8(s) ? s : printable(s); }

std::string sanitize_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                c == '-' || c == '_';
    // No ".." survives, so a name can never climb out of raw/.
    out += keep && !(c == '.' && !out.empty() && out.back() == '.') ? c : '_';
    if (out.size() >= 96) break;
  }
  while (!out.empty() && out.front() == '.') out.front() = '_';
  return out.empty() ? std::string("item") : out;
}

json item_to_json(const EvidenceItem& it) {
  return json{{"source_kind", it.source_kind},
              {"identifier", it.identifier},
              {"acquired_at", format_utc_ms(it.acquired_at)},
              {"sha256", to_hex(it.sha256)},
              {"payload_ref", it.payload_ref},
              {"parsed", it.parsed},
              {"sensitive_pointers", it.sensitive}};
}

json body_json(const ForensicReport& r) {
  json items = json::array();
  for (const auto& it : r.items) items.push_back(item_to_json(it));
  return json{{"schema", std::string(kSchemaId)},
              {"case_id", r.case_id},
              {"examiner", r.examiner},
              {"tool_version", r.tool_version},
              {"generated_at", format_utc_ms(r.generated_at)},
              {"target", r.target},
              {"items", std::move(items)},
              {"warnings", r.warnings},
              {"redaction", r.redaction}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename T>
T need(const json& j, const char* key, json::value_t type) {
  auto it = j.find(key);
  if (it == j.end()) throw ReportInvalid(std::string("missing member \"") + key + "\"");
  if (it->type() != type)
    throw ReportInvalid(std::string("member \"") + key + "\" has the wrong type");
  return it->template get<T>();
}

Instant need_time(const json& j, const char* key) {
  auto s = need<std::string>(j, key, json::value_t::string);
  try {
    return parse_utc_ms(s);
  } catch (const std::exception&) {
    throw ReportInvalid(std::string("member \"") + key + "\" is not a UTC millisecond timestamp");
  }
}

bool safe_ref(const std::string& ref) {
  if (ref.rfind("raw/", 0) != 0) return false;
  fs::path p(ref);
  if (p.is_absolute()) return false;
  for (const auto& part : p)
    if (part == "..") return false;
  return true;
}

}  // namespace

json error_record(const std::string& kind, const std::string& message) {
  return json{{"error", {{"kind", kind}, {"message", fix_string(message)}}}};
}

EvidenceStore::EvidenceStore(std::string dir) : dir_(std::move(dir)) {}

EvidenceItem EvidenceStore::add(std::string_view source_kind, const std::string& identifier,
                                std::string_view payload, Instant acquired_at, json parsed,
                                std::vector<std::string> sensitive) {
  for (const auto& p : sensitive) (void)json::json_pointer(p);  // throws on bad syntax

  EvidenceItem it;
  it.source_kind = std::string(source_kind);
  it.identifier = identifier;
  it.acquired_at = to_ms(acquired_at);
  it.sha256 = sha256(payload);
  it.payload_ref = "raw/" + sanitize_name(source_kind) + "/" + sanitize_name(identifier) + "." +
                   to_hex(it.sha256).substr(0, 12);
  it.parsed = std::move(parsed);
  it.sensitive = std::move(sensitive);

  fs::path file = fs::path(dir_) / it.payload_ref;
  fs::create_directories(file.parent_path());
  // An existing file of this name already holds these bytes.
  if (!fs::exists(file) || sha256(read_file(file.string())) != it.sha256) write_file(file.string(), payload);
  return it;
}

void finalize(ForensicReport& r) {
  r.generated_at = to_ms(r.generated_at);
  r.case_id = fix_string(r.case_id);
  r.examiner = fix_string(r.examiner);
  normalize_strings(r.target);
  for (auto& w : r.warnings) w = fix_string(w);
  for (auto& it : r.items) {
    it.acquired_at = to_ms(it.acquired_at);
    it.source_kind = fix_string(it.source_kind);
    it.identifier = fix_string(it.identifier);
    it.payload_ref = fix_string(it.payload_ref);
    for (auto& p : it.sensitive) p = fix_string(p);
    normalize_strings(it.parsed);
    std::sort(it.sensitive.begin(), it.sensitive.end());
    it.sensitive.erase(std::unique(it.sensitive.begin(), it.sensitive.end()), it.sensitive.end());
    if (!r.redaction) continue;
    for (const auto& p : it.sensitive) {
      json::json_pointer ptr(p);
      if (it.parsed.contains(ptr)) it.parsed[ptr] = std::string(kRedacted);
    }
  }
  std::sort(r.items.begin(), r.items.end(), [](const EvidenceItem& a, const EvidenceItem& b) {
    auto key = [](const EvidenceItem& x) {
      return std::tie(x.source_kind, x.identifier, x.acquired_at, x.sha256, x.payload_ref);
    };
    if (key(a) != key(b)) return key(a) < key(b);
    return a.parsed.dump() < b.parsed.dump();
  });
}

std::string digest_of(const ForensicReport& r) { return to_hex(sha256(dump(body_json(r)))); }

std::string canonical_serialize(const ForensicReport& r) {
  json j = body_json(r);
  j["digest"] = to_hex(sha256(dump(j)));
  return dump(j);
}

ForensicReport deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ReportInvalid(std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ReportInvalid("report is not a JSON object");
  using vt = json::value_t;
  auto schema = need<std::string>(j, "schema", vt::string);
  if (schema != kSchemaId) throw ReportInvalid("unsupported schema \"" + schema + "\"");

  ForensicReport r;
  r.case_id = need<std::string>(j, "case_id", vt::string);
  r.examiner = need<std::string>(j, "examiner", vt::string);
  r.tool_version = need<std::string>(j, "tool_version", vt::string);
  r.generated_at = need_time(j, "generated_at");
  r.target = need<json>(j, "target", vt::object);
  r.redaction = need<bool>(j, "redaction", vt::boolean);
  for (const auto& w : need<json>(j, "warnings", vt::array)) {
    if (!w.is_string()) throw ReportInvalid("warning is not a string");
    r.warnings.push_back(w.get<std::string>());
  }
  for (const auto& ij : need<json>(j, "items", vt::array)) {
    if (!ij.is_object()) throw ReportInvalid("item is not an object");
    EvidenceItem it;
    it.source_kind = need<std::string>(ij, "source_kind", vt::string);
    it.identifier = need<std::string>(ij, "identifier", vt::string);
    it.acquired_at = need_time(ij, "acquired_at");
    try {
      it.sha256 = digest_from_hex(need<std::string>(ij, "sha256", vt::string));
    } catch (const std::invalid_argument&) {
      throw ReportInvalid("item sha256 is not 64 hex digits");
    }
    it.payload_ref = need<std::string>(ij, "payload_ref", vt::string);
    if (!safe_ref(it.payload_ref)) throw ReportInvalid("payload_ref \"" + it.payload_ref + "\" leaves raw/");
    if (!ij.contains("parsed")) throw ReportInvalid("missing member \"parsed\"");
    it.parsed = ij.at("parsed");
    for (const auto& p : need<json>(ij, "sensitive_pointers", vt::array)) {
      if (!p.is_string()) throw ReportInvalid("sensitive pointer is not a string");
      try {
        (void)json::json_pointer(p.get<std::string>());
      } catch (const json::exception&) {
        throw ReportInvalid("bad sensitive pointer " + p.dump());
      }
      it.sensitive.push_back(p.get<std::string>());
    }
    r.items.push_back(std::move(it));
  }

  auto digest = need<std::string>(j, "digest", vt::string);
  if (digest != digest_of(r)) throw ReportInvalid("digest mismatch");
  return r;
}

std::string write_report(ForensicReport& r, const std::string& dir) {
  finalize(r);
  fs::create_directories(dir);
  auto text = canonical_serialize(r);
  write_file((fs::path(dir) / kReportFile).string(), text);
  return text;
}

ForensicReport read_report(const std::string& dir) {
  auto path = (fs::path(dir) / kReportFile).string();
  Bytes text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ReportInvalid("cannot read " + path + ": " + e.what());
  }
  return deserialize(text);
}

Verification verify_report_dir(const std::string& dir) {
  Verification v;
  Bytes text = read_file((fs::path(dir) / kReportFile).string());
  ForensicReport r;
  try {
    r = deserialize(text);
    v.digest_ok = true;
  } catch (const ReportInvalid&) {
    return v;
  }
  v.round_trip_ok = canonical_serialize(r) == text;
  for (const auto& it : r.items) {
    auto file = fs::path(dir) / it.payload_ref;
    std::error_code ec;
    if (!fs::is_regular_file(file, ec)) {
      v.payload_problems.push_back(it.payload_ref + ": missing");
      continue;
    }
    Sha256 h;
    try {
      h.update(read_file(file.string()));
    } catch (const std::exception&) {
      v.payload_problems.push_back(it.payload_ref + ": unreadable");
      continue;
    }
    if (h.finish() != it.sha256) v.payload_problems.push_back(it.payload_ref + ": hash mismatch");
  }
  if (r.redaction) {
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      for (const auto& p : r.items[i].sensitive) {
        json::json_pointer ptr(p);
        const auto& parsed = r.items[i].parsed;
        if (parsed.contains(ptr) && parsed.at(ptr) != std::string(kRedacted))
          v.redaction_problems.push_back("/items/" + std::to_string(i) + "/parsed" + p);
      }
    }
  }
  return v;
}

ForensicReport merge_reports(const std::vector<std::string>& dirs, const std::string& out_dir,
                             const std::string& case_id, const std::string& examiner, Instant at) {
  if (dirs.empty()) throw ReportInvalid("nothing to merge");
  ForensicReport merged;
  merged.case_id = case_id;
  merged.examiner = examiner;
  merged.generated_at = at;
  merged.redaction = false;
  merged.target = json{{"merged_from", json::array()}};

  EvidenceStore store(out_dir);
  for (const auto& dir : dirs) {
    auto text = read_file((fs::path(dir) / kReportFile).string());
    ForensicReport in = deserialize(text);
    merged.redaction = merged.redaction || in.redaction;
    merged.target["merged_from"].push_back(
        json{{"case_id", in.case_id}, {"digest", json::parse(text).at("digest")}, {"target", in.target}});
    for (const auto& w : in.warnings) merged.warnings.push_back(in.case_id + ": " + w);
    for (auto& it : in.items) {
      auto file = fs::path(dir) / it.payload_ref;
      Bytes payload;
      try {
        payload = read_file(file.string());
      } catch (const std::exception&) {
        throw ReportInvalid(dir + ": payload " + it.payload_ref + " is missing");
      }
      if (sha256(payload) != it.sha256) throw ReportInvalid(dir + ": payload " + it.payload_ref + " fails its hash");
      merged.items.push_back(store.add(it.source_kind, it.identifier, payload, it.acquired_at,
                                       std::move(it.parsed), std::move(it.sensitive)));
    }
  }
  auto& from = merged.target["merged_from"];
  std::sort(from.begin(), from.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });
  std::sort(merged.warnings.begin(), merged.warnings.end());
  write_report(merged, out_dir);
  return merged;
}

}  // namespace ghf::report
