#pragma once

// Turns module output into report items. Every item's raw payload is stored
// before anything is parsed, so parse failures still carry their evidence.

#include <string>
#include <vector>

#include "ghf/capture.hpp"
#include "ghf/carver.hpp"
#include "ghf/local_api.hpp"
#include "ghf/port_probe.hpp"
#include "ghf/report.hpp"

namespace ghf::pipeline {

using report::EvidenceItem;
using report::EvidenceStore;
using report::json;

/// Items and warnings contributed by one input.
struct Contribution {
  std::vector<EvidenceItem> items;
  std::vector<std::string> warnings;
  json target = json::object();
};

void absorb(report::ForensicReport& r, Contribution c);

/// One item per endpoint, identified "<METHOD> <path>". Failed requests keep
/// whatever body arrived (possibly none) next to an error record.
Contribution acquisition_items(EvidenceStore& store, const local_api::AcquisitionBundle& bundle,
                               const Clock& clock);

/// One item per probed port, identified "<transport>/<port>".
Contribution probe_items(EvidenceStore& store, const std::string& ip,
                         const std::vector<probe::PortProbeResult>& results, const Clock& clock);

/// One item per file under the app folder (identified by its relative
/// path) plus a derived "account" item. Throws app::RootMissing.
Contribution app_items(EvidenceStore& store, const std::string& root, const Clock& clock);

/// One item per finding ("<source>@<offset>/<rule>") with the context
/// window as payload, plus one "source:<name>" item per scanned file whose
/// payload is a manifest holding the file's size and SHA-256.
Contribution carve_image_items(EvidenceStore& store, const std::string& image_path,
                               const carve::ScanOptions& options, const Clock& clock);
Contribution carve_folder_items(EvidenceStore& store, const std::string& root,
                                const carve::ScanOptions& options, const Clock& clock);

/// One item per capture file holding a copy of the file and its summary.
Contribution capture_items(EvidenceStore& store, const std::string& path, const pcap::TriageConfig& config,
                           const Clock& clock);

}  // namespace ghf::pipeline
