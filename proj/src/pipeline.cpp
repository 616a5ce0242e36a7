#include "ghf/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ghf/app_artifacts.hpp"

namespace ghf::pipeline {

namespace fs = std::filesystem;
using report::error_record;

namespace {

std::string padded_offset(std::uint64_t off) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%012llu", static_cast<unsigned long long>(off));
  return buf;
}

json finding_json(const carve::CarvedFinding& f) {
  json j{{"rule_id", f.rule_id},
         {"category", std::string(carve::to_string(f.category))},
         {"source", f.source},
         {"offset", f.offset},
         {"matched", printable(f.text())},
         {"matched_length", f.matched.size()},
         {"context_offset", f.context_offset},
         {"context_length", f.context.size()},
         {"utf16le", f.utf16le}};
  if (f.length_to_next_signature) j["length_to_next_signature"] = *f.length_to_next_signature;
  return j;
}

void add_findings(EvidenceStore& store, Contribution& c, const std::vector<carve::CarvedFinding>& findings,
                  Instant at) {
  for (const auto& f : findings) {
    std::string id = f.source + "@" + padded_offset(f.offset) + "/" + f.rule_id;
    if (f.utf16le) id += "/utf16le";
    c.items.push_back(store.add(report::kCarving, id, f.context, at, finding_json(f)));
  }
}

void add_source_manifest(EvidenceStore& store, Contribution& c, const std::string& path, const std::string& source,
                         Instant at) {
  std::ifstream in(path, std::ios::binary);
  Sha256 h;
  std::uint64_t size = 0;
  std::string buf(1 << 20, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    h.update(std::string_view(buf.data(), got));
    size += got;
  }
  json manifest{{"source", source}, {"path", path}, {"size", size}, {"sha256", to_hex(h.finish())}};
  c.items.push_back(store.add(report::kCarving, "source:" + source, manifest.dump(2) + "\n", at, manifest));
}

fs::path package_dir(const std::string& root) {
  fs::path base = root;
  std::error_code ec;
  if (fs::is_directory(base / app::kAppPackage, ec)) base /= app::kAppPackage;
  return base;
}

// Splits "/documents/3/entries/x/value" into (3, "/entries/x/value").
std::optional<std::pair<std::size_t, std::string>> split_indexed(const std::string& ptr, std::string_view head) {
  if (ptr.rfind(head, 0) != 0) return std::nullopt;
  const auto rest = ptr.substr(head.size());
  const auto slash = rest.find('/');
  if (slash == std::string::npos) return std::nullopt;
  return std::pair{static_cast<std::size_t>(std::stoul(rest.substr(0, slash))), rest.substr(slash)};
}

}  // namespace

void absorb(report::ForensicReport& r, Contribution c) {
  for (auto& it : c.items) r.items.push_back(std::move(it));
  for (auto& w : c.warnings) r.warnings.push_back(std::move(w));
  if (!c.target.empty()) {
    if (r.target.empty()) {
      r.target = std::move(c.target);
    } else if (c.target.contains("inputs") && r.target.contains("inputs")) {
      for (auto& i : c.target["inputs"]) r.target["inputs"].push_back(i);
    }
  }
}

Contribution acquisition_items(EvidenceStore& store, const local_api::AcquisitionBundle& bundle,
                               const Clock& clock) {
  using namespace local_api;
  Contribution c;
  c.target = json{{"ip", bundle.target.ip},
                  {"api_port", bundle.target.api_port},
                  {"mode", bundle.mode == Mode::Active ? "active" : "passive"}};
  const auto tz = bundle.device_timezone();
  for (const auto& item : bundle.items) {
    const std::string id = std::string(method_name(item.method)) + " " + item.path;
    const Bytes body = item.evidence ? item.evidence->body : Bytes{};
    const Instant at = item.evidence ? item.evidence->acquired_at : clock();
    if (item.evidence && !item.evidence->digest_matches())
      c.warnings.push_back(id + ": body changed after hashing");

    // Records may be arrays, so they sit under "record" next to the status.
    json parsed;
    std::vector<std::string> sensitive;
    if (item.error) {
      parsed = error_record(item.error->kind, item.error->message);
    } else {
      try {
        json record = parse_to_json(item.kind, *item.evidence, tz);
        for (const auto& p : sensitive_pointers(item.kind, record)) sensitive.push_back("/record" + p);
        parsed = json{{"record", std::move(record)}};
      } catch (const Error& e) {
        parsed = error_record(e.kind(), e.what());
      }
    }
    if (item.evidence) parsed["http_status"] = item.evidence->http_status;
    if (parsed.contains("error")) c.warnings.push_back(id + ": " + parsed["error"]["kind"].get<std::string>());
    c.items.push_back(store.add(report::kLocalApi, id, body, at, std::move(parsed), std::move(sensitive)));
  }
  return c;
}

Contribution probe_items(EvidenceStore& store, const std::string& ip,
                         const std::vector<probe::PortProbeResult>& results, const Clock& clock) {
  Contribution c;
  c.target = json{{"ip", ip}};
  const Instant at = clock();
  for (const auto& r : results) {
    json j{{"port", r.port},
           {"transport", std::string(probe::to_string(r.transport))},
           {"state", std::string(probe::to_string(r.state))},
           {"service_label", r.service_label},
           {"listening_confirmed", r.listening_confirmed},
           {"probe_duration_ms", r.probe_duration.count()}};
    if (!r.note.empty()) j["note"] = r.note;
    const std::string id = std::string(probe::to_string(r.transport)) + "/" + std::to_string(r.port);
    c.items.push_back(store.add(report::kPortProbe, id, j.dump(2) + "\n", at, j));
  }
  return c;
}

Contribution app_items(EvidenceStore& store, const std::string& root, const Clock& clock) {
  const app::ArtifactInventory inv = app::scan_app_folder(root);
  const fs::path base = package_dir(root);
  const json inv_json = app::to_json(inv);
  const auto ptrs = app::sensitive_pointers(inv_json);
  const Instant at = clock();

  Contribution c;
  c.target = json{{"inputs", json::array({root})}};
  c.warnings = inv.warnings;
  auto payload_of = [&](const std::string& rel) {
    try {
      return read_file((base / rel).string());
    } catch (const std::exception& e) {
      c.warnings.push_back(rel + ": unreadable when storing: " + e.what());
      return Bytes{};
    }
  };

  for (std::size_t i = 0; i < inv.documents.size(); ++i) {
    const auto& doc = inv.documents[i];
    json parsed{{"document", inv_json["documents"][i]}};
    std::vector<std::string> sensitive;
    for (const auto& p : ptrs) {
      if (auto s = split_indexed(p, "/documents/"); s && s->first == i) sensitive.push_back("/document" + s->second);
    }
    if (!inv.wifi_source.empty() && doc.source_path == inv.wifi_source) {
      parsed["wifi_credentials"] = inv_json["wifi_credentials"];
      for (const auto& p : ptrs)
        if (p.rfind("/wifi_credentials/", 0) == 0) sensitive.push_back(p);
    }
    c.items.push_back(store.add(report::kAppArtifact, doc.source_path, payload_of(doc.source_path), at,
                                std::move(parsed), std::move(sensitive)));
  }
  for (std::size_t i = 0; i < inv.home_graph.size(); ++i) {
    const auto& hg = inv.home_graph[i];
    c.items.push_back(store.add(report::kAppArtifact, hg.path, payload_of(hg.path), at,
                                json{{"home_graph", inv_json["home_graph"][i]}}));
  }
  for (std::size_t i = 0; i < inv.unrecognized.size(); ++i) {
    const auto& u = inv.unrecognized[i];
    json parsed{{"unrecognized", inv_json["unrecognized"][i]}};
    for (const auto& w : inv.warnings) {
      if (w.rfind(u.path + ": ", 0) == 0) {
        parsed.update(error_record("ParseFailed", w.substr(u.path.size() + 2)));
        break;
      }
    }
    c.items.push_back(store.add(report::kAppArtifact, u.path, payload_of(u.path), at, std::move(parsed)));
  }

  // Derived: the account view is an interpretation across documents, so its
  // payload is the serialized view itself.
  json account{{"account", inv_json["account"]}};
  std::vector<std::string> sensitive;
  for (const auto& p : ptrs)
    if (p.rfind("/account/", 0) == 0) sensitive.push_back(p);
  const std::string payload = account.dump(2) + "\n";
  c.items.push_back(store.add(report::kAppArtifact, "account", payload, at, std::move(account), std::move(sensitive)));
  return c;
}

Contribution carve_image_items(EvidenceStore& store, const std::string& image_path,
                               const carve::ScanOptions& options, const Clock& clock) {
  const std::string source = fs::path(image_path).filename().string();
  const auto findings = carve::scan_file(image_path, source, carve::builtin_rules(), options);
  Contribution c;
  c.target = json{{"inputs", json::array({image_path})}};
  const Instant at = clock();
  add_source_manifest(store, c, image_path, source, at);
  add_findings(store, c, findings, at);
  return c;
}

Contribution carve_folder_items(EvidenceStore& store, const std::string& root,
                                const carve::ScanOptions& options, const Clock& clock) {
  const auto scan = carve::scan_carved_folder(root, carve::builtin_rules(), options);
  Contribution c;
  c.target = json{{"inputs", json::array({root})}};
  c.warnings = scan.warnings;
  const Instant at = clock();
  std::vector<fs::path> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (it->is_regular_file(ec)) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, root).generic_string();
    if (std::ifstream(f, std::ios::binary)) add_source_manifest(store, c, f.string(), rel, at);
  }
  add_findings(store, c, scan.findings, at);
  return c;
}

Contribution capture_items(EvidenceStore& store, const std::string& path, const pcap::TriageConfig& config,
                           const Clock& clock) {
  Contribution c;
  c.target = json{{"inputs", json::array({path})}};
  const Bytes bytes = read_file(path);
  const Instant at = clock();
  json parsed;
  try {
    const auto summary = pcap::summarize_capture(bytes, config);
    parsed = pcap::to_json(summary);
    for (const auto& w : summary.warnings) c.warnings.push_back(path + ": " + w);
  } catch (const Error& e) {
    parsed = error_record(e.kind(), e.what());
    c.warnings.push_back(path + ": " + e.kind());
  }
  c.items.push_back(store.add(report::kCapture, fs::path(path).filename().string(), bytes, at, std::move(parsed)));
  return c;
}

}  // namespace ghf::pipeline
