// ghf: command-line front end. Each subcommand runs one module pipeline and
// writes <out>/report.json plus <out>/raw/.

#include <signal.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "ghf/pipeline.hpp"
#include "ghf/simulator.hpp"

namespace fs = std::filesystem;
using namespace ghf;

namespace {

constexpr int kOperatorError = 2;

struct OperatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string out;
  std::string case_id;
  std::string examiner;
  bool no_redact = false;
  bool force = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory (default: $GHF_OUT_DIR)");
  sub->add_option("--case-id", c.case_id, "Case identifier (default: output directory name)");
  sub->add_option("--examiner", c.examiner, "Examiner name (default: $USER)");
  sub->add_flag("--no-redact", c.no_redact, "Keep passwords and tokens in the report");
  sub->add_flag("--force", c.force, "Overwrite an existing report in the output directory");
}

std::string resolve_out(const Common& c) {
  std::string out = c.out;
  if (out.empty()) {
    const char* env = std::getenv("GHF_OUT_DIR");
    if (env == nullptr || *env == '\0') throw OperatorError("no output directory: pass --out or set GHF_OUT_DIR");
    out = env;
  }
  if (fs::exists(fs::path(out) / report::kReportFile) && !c.force)
    throw OperatorError(out + " already holds a report (use --force to overwrite)");
  return out;
}

report::ForensicReport new_report(const Common& c, const std::string& out) {
  report::ForensicReport r;
  r.case_id = c.case_id;
  if (r.case_id.empty()) r.case_id = fs::path(out).lexically_normal().filename().string();
  if (r.case_id.empty() || r.case_id == ".") r.case_id = fs::path(out).lexically_normal().parent_path().filename().string();
  r.examiner = c.examiner;
  if (r.examiner.empty()) {
    const char* user = std::getenv("USER");
    r.examiner = user != nullptr ? user : "unknown";
  }
  r.redaction = !c.no_redact;
  r.generated_at = system_now();
  return r;
}

void require_file(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw OperatorError(path + ": not a readable file");
}

void require_dir(const std::string& path) {
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw OperatorError(path + ": not a directory");
}

int finish(report::ForensicReport& r, const std::string& out) {
  report::write_report(r, out);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::size_t errors = 0;
  for (const auto& it : r.items) errors += it.parsed.contains("error");
  std::cout << r.items.size() << " items (" << errors << " with parse errors), " << r.warnings.size()
            << " warnings -> " << (fs::path(out) / report::kReportFile).string() << "\n";
  return 0;
}

void wait_for_signal(int seconds) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  if (seconds > 0) {
    timespec ts{seconds, 0};
    sigtimedwait(&set, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Google Home forensic toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // acquire
  Common acq_c;
  std::string acq_target;
  int acq_port = 8008;
  std::string acq_mode = "passive";
  int acq_timeout_ms = 5000;
  int acq_settle_ms = 2000;
  auto* acquire = app.add_subcommand("acquire", "Read the device's local HTTP API");
  acquire->add_option("--target", acq_target, "Device IPv4 address")->required();
  acquire->add_option("--api-port", acq_port, "Local API port")->check(CLI::Range(1, 65535));
  acquire->add_option("--mode", acq_mode, "passive (GETs only) or active (also POSTs)")
      ->check(CLI::IsMember({"passive", "active"}));
  acquire->add_option("--timeout-ms", acq_timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
  acquire->add_option("--settle-ms", acq_settle_ms, "Wait between scan_wifi and scan_results")
      ->check(CLI::NonNegativeNumber);
  add_common(acquire, acq_c);

  // probe
  Common probe_c;
  std::string probe_target;
  std::vector<int> probe_ports;
  bool probe_udp = false;
  int probe_timeout_ms = 2000;
  int probe_linger_ms = 1000;
  auto* probe_cmd = app.add_subcommand("probe", "Check the device's known service ports");
  probe_cmd->add_option("--target", probe_target, "Device IPv4 address")->required();
  probe_cmd->add_option("--ports", probe_ports, "Ports to probe (default: the known set)")
      ->delimiter(',')
      ->check(CLI::Range(1, 65535));
  probe_cmd->add_flag("--udp", probe_udp, "Also probe UDP (open and filtered are indistinguishable)");
  probe_cmd->add_option("--timeout-ms", probe_timeout_ms, "Connect timeout")->check(CLI::PositiveNumber);
  probe_cmd->add_option("--linger-ms", probe_linger_ms, "How long an open port must hold the connection")
      ->check(CLI::NonNegativeNumber);
  add_common(probe_cmd, probe_c);

  // parse-app
  Common app_c;
  std::string app_root;
  auto* parse_app = app.add_subcommand("parse-app", "Parse an extracted companion-app data folder");
  parse_app->add_option("--root", app_root, "App package folder or a directory containing it")->required();
  add_common(parse_app, app_c);

  // carve
  Common carve_c;
  std::vector<std::string> carve_images;
  std::string carve_folder;
  std::size_t carve_chunk = 1 << 20;
  bool carve_utf16 = false;
  auto* carve_cmd = app.add_subcommand("carve", "Scan a chip-off image or a folder of carved files");
  auto* img_opt = carve_cmd->add_option("--image", carve_images, "Image file (repeatable)");
  auto* folder_opt = carve_cmd->add_option("--folder", carve_folder, "Folder of carved files");
  img_opt->excludes(folder_opt);
  carve_cmd->add_option("--chunk-size", carve_chunk, "Read size in bytes");
  carve_cmd->add_flag("--utf16le", carve_utf16, "Also look for UTF-16LE log lines");
  add_common(carve_cmd, carve_c);

  // pcap
  Common pcap_c;
  std::vector<std::string> pcap_files;
  std::string pcap_device_ip, pcap_app_ip;
  auto* pcap_cmd = app.add_subcommand("pcap", "Triage classic libpcap captures");
  pcap_cmd->add_option("--file", pcap_files, "Capture file (repeatable)")->required();
  pcap_cmd->add_option("--device-ip", pcap_device_ip, "Speaker address");
  pcap_cmd->add_option("--app-ip", pcap_app_ip, "Phone address");
  add_common(pcap_cmd, pcap_c);

  // simulate
  std::string sim_bind = "127.0.0.1";
  int sim_port = 8008;
  std::string sim_fixtures, sim_dump;
  bool sim_no_decoys = false;
  int sim_duration = 0;
  auto* simulate = app.add_subcommand("simulate", "Serve the local API from fixtures");
  simulate->add_option("--bind", sim_bind, "Listen address");
  simulate->add_option("--api-port", sim_port, "API port (0 picks one)")->check(CLI::Range(0, 65535));
  simulate->add_option("--fixtures", sim_fixtures, "Fixture directory (default: built-in set)");
  simulate->add_option("--dump-fixtures", sim_dump, "Write the built-in fixtures to DIR and exit");
  simulate->add_flag("--no-decoys", sim_no_decoys, "Do not bind 8009/8443/9000/10001");
  simulate->add_option("--duration-s", sim_duration, "Stop after N seconds (default: until SIGINT/SIGTERM)")
      ->check(CLI::NonNegativeNumber);

  // merge
  Common merge_c;
  std::vector<std::string> merge_dirs;
  auto* merge = app.add_subcommand("merge", "Combine report directories");
  merge->add_option("dirs", merge_dirs, "Report directories")->required()->expected(1, -1);
  add_common(merge, merge_c);

  // verify
  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Check a report's digest and payload hashes");
  verify->add_option("dir", verify_dir, "Report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const Clock clock = system_clock();
    if (*acquire) {
      const auto out = resolve_out(acq_c);
      local_api::DeviceTarget target{acq_target, acq_port, std::chrono::milliseconds(acq_timeout_ms)};
      try {
        target.validate();
      } catch (const std::invalid_argument& e) {
        throw OperatorError(e.what());
      }
      local_api::AcquireOptions opts;
      opts.scan_settle = std::chrono::milliseconds(acq_settle_ms);
      const auto bundle =
          local_api::acquire_all(target, acq_mode == "active" ? local_api::Mode::Active : local_api::Mode::Passive, opts);
      auto r = new_report(acq_c, out);
      report::EvidenceStore store(out);
      pipeline::absorb(r, pipeline::acquisition_items(store, bundle, clock));
      return finish(r, out);
    }
    if (*probe_cmd) {
      const auto out = resolve_out(probe_c);
      probe::ProbeOptions opts;
      opts.timeout = std::chrono::milliseconds(probe_timeout_ms);
      opts.linger = std::chrono::milliseconds(probe_linger_ms);
      opts.include_udp = probe_udp;
      if (!probe_ports.empty()) {
        opts.ports.clear();
        for (int p : probe_ports) opts.ports.push_back({p, probe::service_label_for(p)});
      }
      std::vector<probe::PortProbeResult> results;
      try {
        results = probe::probe_known_ports(probe_target, opts);
      } catch (const probe::InvalidTarget& e) {
        throw OperatorError(e.what());
      }
      auto r = new_report(probe_c, out);
      report::EvidenceStore store(out);
      pipeline::absorb(r, pipeline::probe_items(store, probe_target, results, clock));
      return finish(r, out);
    }
    if (*parse_app) {
      require_dir(app_root);
      const auto out = resolve_out(app_c);
      auto r = new_report(app_c, out);
      report::EvidenceStore store(out);
      pipeline::absorb(r, pipeline::app_items(store, app_root, clock));
      return finish(r, out);
    }
    if (*carve_cmd) {
      if (carve_images.empty() && carve_folder.empty()) throw OperatorError("carve needs --image or --folder");
      for (const auto& i : carve_images) require_file(i);
      if (!carve_folder.empty()) require_dir(carve_folder);
      carve::ScanOptions opts{carve_chunk, carve_utf16};
      const auto min = carve::min_chunk_size(carve::builtin_rules(), carve_utf16);
      if (carve_chunk < min) throw OperatorError("--chunk-size must be at least " + std::to_string(min));
      const auto out = resolve_out(carve_c);
      auto r = new_report(carve_c, out);
      r.target = report::json{{"inputs", report::json::array()}};
      report::EvidenceStore store(out);
      for (const auto& i : carve_images) pipeline::absorb(r, pipeline::carve_image_items(store, i, opts, clock));
      if (!carve_folder.empty()) pipeline::absorb(r, pipeline::carve_folder_items(store, carve_folder, opts, clock));
      return finish(r, out);
    }
    if (*pcap_cmd) {
      for (const auto& f : pcap_files) require_file(f);
      pcap::TriageConfig config;
      for (const auto* ip : {&pcap_device_ip, &pcap_app_ip}) {
        if (ip->empty()) continue;
        try {
          (void)pcap::parse_ipv4(*ip);
        } catch (const std::invalid_argument&) {
          throw OperatorError(*ip + ": not an IPv4 address");
        }
      }
      if (!pcap_device_ip.empty()) config.device_ip = pcap_device_ip;
      if (!pcap_app_ip.empty()) config.app_ip = pcap_app_ip;
      const auto out = resolve_out(pcap_c);
      auto r = new_report(pcap_c, out);
      r.target = report::json{{"inputs", report::json::array()}};
      report::EvidenceStore store(out);
      for (const auto& f : pcap_files) pipeline::absorb(r, pipeline::capture_items(store, f, config, clock));
      return finish(r, out);
    }
    if (*simulate) {
      if (!sim_dump.empty()) {
        sim::save_fixtures(sim::default_fixtures(), sim_dump);
        std::cout << "fixtures written to " << sim_dump << "\n";
        return 0;
      }
      sim::FixtureSet fixtures = sim::default_fixtures();
      if (!sim_fixtures.empty()) {
        require_dir(sim_fixtures);
        try {
          fixtures = sim::load_fixtures(sim_fixtures);
        } catch (const std::exception& e) {
          throw OperatorError(sim_fixtures + ": " + e.what());
        }
      }
      sim::ServeOptions opts;
      opts.bind_ip = sim_bind;
      opts.api_port = sim_port;
      if (sim_no_decoys) opts.decoy_ports.clear();

      // Block the stop signals before any server thread exists.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);

      std::unique_ptr<sim::Simulator> s;
      try {
        s = sim::Simulator::start(std::move(fixtures), opts);
      } catch (const sim::BindFailure& e) {
        for (const auto& [port, why] : e.failures()) std::cerr << "cannot bind " << port << ": " << why << "\n";
        return kOperatorError;
      }
      std::cout << "serving on " << sim_bind << ":" << s->api_port();
      for (int p : s->decoy_ports()) std::cout << " decoy:" << p;
      std::cout << std::endl;
      wait_for_signal(sim_duration);
      s->shutdown();
      std::cout << s->request_log().size() << " requests served\n";
      return 0;
    }
    if (*merge) {
      for (const auto& d : merge_dirs) require_dir(d);
      const auto out = resolve_out(merge_c);
      const auto base = new_report(merge_c, out);
      auto r = report::merge_reports(merge_dirs, out, base.case_id, base.examiner, base.generated_at);
      if (merge_c.no_redact && r.redaction) std::cerr << "note: inputs were redacted; values stay redacted\n";
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << r.items.size() << " items -> " << (fs::path(out) / report::kReportFile).string() << "\n";
      return 0;
    }
    if (*verify) {
      require_dir(verify_dir);
      const auto v = report::verify_report_dir(verify_dir);
      std::cout << "digest: " << (v.digest_ok ? "ok" : "MISMATCH") << "\n"
                << "canonical: " << (v.round_trip_ok ? "ok" : "NOT CANONICAL") << "\n";
      for (const auto& p : v.payload_problems) std::cout << "payload: " << p << "\n";
      for (const auto& p : v.redaction_problems) std::cout << "unredacted: " << p << "\n";
      return v.ok() ? 0 : 1;
    }
  } catch (const OperatorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOperatorError;
  } catch (const report::ReportInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOperatorError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return kOperatorError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOperatorError;
  }
  return 0;
}
