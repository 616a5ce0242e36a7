// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "fixture_secrets.hpp"
#include "ghf/app_artifacts.hpp"
#include "ghf/capture.hpp"
#include "ghf/carver.hpp"
#include "ghf/local_api.hpp"
#include "ghf/pipeline.hpp"
#include "ghf/port_probe.hpp"
#include "ghf/report.hpp"
#include "ghf/simulator.hpp"
#include "oracle.hpp"
#include "pcap_writer.hpp"
#include "plant.hpp"

using namespace ghf;
using namespace std::chrono_literals;
namespace fs = std::filesystem;
using report::json;
using SteadyClock = std::chrono::steady_clock;

namespace {

const std::string kFixtures = GHF_FIXTURE_DIR;
const std::string kAppRoot = kFixtures + "/app";

// Pinned budgets.
constexpr auto kAcquireBudget = 10s;
constexpr auto kProbeBudget = 5s;
constexpr auto kCarveBudget = 5s;
constexpr auto kTriageBudget = 5s;
constexpr auto kFuzzBudget = 60s;
constexpr std::size_t kCarveImageSize = 8u << 20;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string ms(SteadyClock::duration d) {
  return std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(d).count()) + " ms";
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("ghf_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string sub(const std::string& s) const { return (path_ / s).string(); }

 private:
  fs::path path_;
};

report::ForensicReport new_report(const std::string& case_id) {
  report::ForensicReport r;
  r.case_id = case_id;
  r.examiner = "acceptance";
  r.generated_at = system_now();
  return r;
}

// Report directories produced along the way, checked by criterion 9.
std::vector<std::string> g_reports;

std::string write(report::ForensicReport& r, const std::string& dir) {
  report::write_report(r, dir);
  g_reports.push_back(dir);
  return dir;
}

// Expected EurekaInfo of the reference device, written out field by field.
local_api::EurekaInfo table_eureka() {
  local_api::EurekaInfo e;
  e.bssid = "90:9f:33:db:10:de";
  e.hotspot_bssid = "FA:8F:CA:98:A5:5B";
  e.ip_address = "192.168.166.40";
  e.locale = "en-US";
  e.country_code = "KR";
  e.latitude = 255;
  e.longitude = 255;
  e.mac_address = "20:DF:B9:4E:87:FE";
  e.name = "Living Room";
  e.ssid = "neo_house6";
  e.timezone = "Asia/Seoul";
  e.uma_client_id = "cc918aa3-2bba-46d2-aa3c-bfe1fa3c275b";
  return e;
}

Outcome endpoint_coverage(const TempDir& t, local_api::AcquisitionBundle& kept) {
  Outcome o;
  sim::ServeOptions so;
  so.api_port = 0;
  so.decoy_ports = {};
  auto s = sim::Simulator::start(sim::default_fixtures(), so);
  const auto start = SteadyClock::now();
  kept = local_api::acquire_all({"127.0.0.1", s->api_port()}, local_api::Mode::Active);
  auto r = new_report("acceptance-1");
  report::EvidenceStore store(t.sub("c1"));
  pipeline::absorb(r, pipeline::acquisition_items(store, kept, system_clock()));
  write(r, t.sub("c1"));
  const auto took = SteadyClock::now() - start;

  std::size_t gets = 0, posts = 0, ok200 = 0, parsed = 0;
  for (const auto& it : r.items) {
    (it.identifier.rfind("GET ", 0) == 0 ? gets : posts)++;
    ok200 += it.parsed.value("http_status", 0) == 200;
    parsed += !it.parsed.contains("error");
  }
  o.note(std::to_string(r.items.size()) + " items (" + std::to_string(gets) + " GET + " + std::to_string(posts) +
         " POST), " + std::to_string(ok200) + " HTTP 200, " + std::to_string(parsed) + " parsed, " + ms(took));
  o.check(r.items.size() == 9, "exactly 9 items (documented endpoint table has 10: 7 GET + 3 POST)");
  o.check(posts == 3, "3 POST items");
  o.check(ok200 == r.items.size(), "every item HTTP 200");
  o.check(parsed == r.items.size(), "every parse succeeds");

  bool eureka_equal = false;
  for (const auto& item : kept.items) {
    if (item.kind == local_api::EndpointKind::EurekaInfo && item.evidence)
      eureka_equal = local_api::parse_eureka_info(*item.evidence) == table_eureka();
  }
  o.check(eureka_equal, "EurekaInfo equals the table field for field");
  o.check(took < kAcquireBudget, "runtime < 10 s");
  return o;
}

Outcome passive_purity(const TempDir& t) {
  Outcome o;
  sim::ServeOptions so;
  so.api_port = 0;
  so.decoy_ports = {};
  auto s = sim::Simulator::start(sim::default_fixtures(), so);
  const auto bundle = local_api::acquire_all({"127.0.0.1", s->api_port()}, local_api::Mode::Passive);
  auto r = new_report("acceptance-2");
  report::EvidenceStore store(t.sub("c2"));
  pipeline::absorb(r, pipeline::acquisition_items(store, bundle, system_clock()));
  write(r, t.sub("c2"));
  const auto posts = s->count_requests("POST");
  const auto total = s->request_log().size();
  o.note(std::to_string(total) + " requests logged, " + std::to_string(posts) + " POST");
  o.check(posts == 0, "zero POST requests");
  o.check(total == bundle.items.size(), "one logged request per item");
  return o;
}

Outcome port_findings(const TempDir& t) {
  Outcome o;
  std::unique_ptr<sim::Simulator> s;
  try {
    s = sim::Simulator::start(sim::default_fixtures(), sim::ServeOptions{});
  } catch (const sim::BindFailure& e) {
    for (const auto& [port, why] : e.failures()) o.check(false, "bind " + std::to_string(port) + ": " + why);
    return o;
  }
  const auto start = SteadyClock::now();
  const auto results = probe::probe_known_ports("127.0.0.1");
  const auto took = SteadyClock::now() - start;
  auto r = new_report("acceptance-3");
  report::EvidenceStore store(t.sub("c3"));
  pipeline::absorb(r, pipeline::probe_items(store, "127.0.0.1", results, system_clock()));
  write(r, t.sub("c3"));

  std::set<int> open_listening;
  for (const auto& p : results) {
    if (p.transport == probe::Transport::Tcp && p.state == probe::PortState::Open && p.listening_confirmed)
      open_listening.insert(p.port);
  }
  std::ostringstream ports;
  for (int p : open_listening) ports << p << ' ';
  o.note("open+listening: " + ports.str() + "in " + ms(took));
  o.check(open_listening == std::set<int>{8008, 8009, 8443, 9000, 10001}, "exact port set");
  o.check(open_listening.size() == 5, "count is five");
  o.check(took < kProbeBudget, "runtime < 5 s");
  return o;
}

Outcome app_artifacts(const TempDir& t) {
  Outcome o;
  const auto inv = app::scan_app_folder(kAppRoot);
  std::set<std::string> keys;
  for (const auto& d : inv.documents)
    for (const auto& [k, v] : d.entries) keys.insert(k);
  const std::set<std::string> want{"LastToken",     "appVersion",  "lastRefreshTime",       "selected_routine_device_id",
                                   "ph_server_token", "gcmIdToken", "current_account_name", "setup-salt",
                                   "servers",       "expiration",  "port",                  "address"};
  std::vector<std::string> missing;
  std::set_difference(want.begin(), want.end(), keys.begin(), keys.end(), std::back_inserter(missing));
  for (const auto& m : missing) o.check(false, "key " + m);
  o.check(inv.wifi_credentials.size() >= 2, "Wi-Fi list with >= 2 entries");
  o.check(inv.home_graph.size() == 1, "one home_graph file");
  o.check(!inv.home_graph.empty() && inv.home_graph[0].decoded_email == "simonhallym@gmail.com",
          "home graph email");
  o.note(std::to_string(want.size() - missing.size()) + "/" + std::to_string(want.size()) + " keys, " +
         std::to_string(inv.wifi_credentials.size()) + " Wi-Fi entries, home graph " +
         (inv.home_graph.empty() ? std::string("none") : inv.home_graph[0].decoded_email));

  auto r = new_report("acceptance-4");
  report::EvidenceStore store(t.sub("c4"));
  pipeline::absorb(r, pipeline::app_items(store, kAppRoot, system_clock()));
  write(r, t.sub("c4"));
  return o;
}

Outcome alarm_consistency(const local_api::AcquisitionBundle& bundle) {
  Outcome o;
  // Independent civil-date oracle: 1554108270000 ms + 9 h (Asia/Seoul, no DST).
  const long long local_s = 1554108270000LL / 1000 + 9 * 3600;
  const auto civil = oracle::civil_from_days(local_s / 86400);
  const long long sod = local_s % 86400;
  o.check(civil.y == 2019 && civil.m == 4u && civil.d == 1u && sod == 17 * 3600 + 44 * 60 + 30, "oracle");

  const auto z = local_api::to_zone(1554108270000LL, "Asia/Seoul");
  o.check(z.has_value(), "zone loads");
  if (z) {
    o.check(z->date == local_api::CivilDate{2019, 4, 1}, "date 2019-04-01");
    o.check(z->time == local_api::TimeOfDay{17, 44, 30}, "time 17:44:30");
  }
  bool seen = false;
  for (const auto& item : bundle.items) {
    if (item.kind != local_api::EndpointKind::Alarms || !item.evidence) continue;
    const auto alarms = local_api::parse_alarms(*item.evidence, bundle.device_timezone());
    o.check(alarms.size() == 1, "one alarm");
    for (const auto& a : alarms) {
      seen = true;
      o.check(a.time_pattern == local_api::TimeOfDay{17, 44, 30}, "time_pattern");
      o.check(a.date == local_api::CivilDate{2019, 4, 1}, "date pattern");
      o.check(a.consistent == true, "consistent in device zone");
    }
  }
  o.check(seen, "alarm acquired");
  if (z) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d Asia/Seoul", z->date.year, z->date.month,
                  z->date.day, z->time.hour, z->time.minute, z->time.second);
    o.note(buf);
  }
  return o;
}

Outcome carver(const TempDir& t) {
  Outcome o;
  const std::uint64_t straddle = 3u << 20;  // a 1 MiB chunk boundary
  const auto img = plant::synth_image(kCarveImageSize, 424242, straddle);
  const std::string path = t.sub("synth8.img");
  write_file(path, img.bytes);

  const auto start = SteadyClock::now();
  const auto rules = carve::builtin_rules();
  const auto chunked = carve::scan_file(path, "synth8.img", rules);
  const auto took = SteadyClock::now() - start;
  const auto whole = carve::scan_buffer(img.bytes, "synth8.img", rules);

  std::vector<plant::Expected> got;
  for (const auto& f : chunked) got.push_back({f.rule_id, f.offset, f.matched});
  o.check(got == img.expected, "findings equal plant list (offset-exact)");
  o.check(chunked == whole, "chunked scan equals whole-buffer scan");
  const bool straddled = std::any_of(chunked.begin(), chunked.end(), [&](const carve::CarvedFinding& f) {
    return f.offset < straddle && f.offset + f.matched.size() > straddle;
  });
  o.check(straddled, "a finding crosses the chunk boundary");
  o.check(took < kCarveBudget, "runtime < 5 s");
  o.note(std::to_string(chunked.size()) + "/" + std::to_string(img.expected.size()) + " findings on 8 MiB in " +
         ms(took));

  auto r = new_report("acceptance-6");
  report::EvidenceStore store(t.sub("c6"));
  pipeline::absorb(r, pipeline::carve_image_items(store, path, {}, system_clock()));
  write(r, t.sub("c6"));
  return o;
}

Outcome tls_triage(const TempDir& t) {
  Outcome o;
  const auto corpus = pcapw::build_corpus(3, 2);
  const std::string path = t.sub("corpus.pcap");
  write_file(path, pcapw::capture_file(corpus.packets));
  pcap::TriageConfig cfg;
  cfg.device_ip = "192.168.166.40";
  cfg.app_ip = "192.168.166.11";

  const auto start = SteadyClock::now();
  const auto s = pcap::summarize_capture_file(path, cfg);
  const auto took = SteadyClock::now() - start;

  std::size_t tls_total = 0, version_ok = 0, roles_ok = 0, plain = 0;
  for (const auto& intent : corpus.intents) {
    const pcap::Endpoint c{intent.client_ip, static_cast<std::uint16_t>(intent.client_port)};
    const auto it = std::find_if(s.flows.begin(), s.flows.end(),
                                 [&](const pcap::FlowReport& f) { return f.a == c || f.b == c; });
    if (it == s.flows.end()) {
      o.check(false, "flow for " + pcap::to_string(c));
      continue;
    }
    roles_ok += pcap::to_string(it->role.role) == intent.role;
    if (intent.tls) {
      ++tls_total;
      const auto want = intent.version == pcapw::Intent::Tls13 ? pcap::Negotiated::Tls13 : pcap::Negotiated::Tls12;
      version_ok += it->tls && it->tls->negotiated == want;
    } else {
      ++plain;
      o.check(!it->tls && !it->tls_error, "plain flow has no TLS");
    }
  }
  std::uint64_t flow_packets = 0;
  for (const auto& f : s.flows) flow_packets += f.packets;
  const auto count = [&](pcapw::Intent v) {
    return std::count_if(corpus.intents.begin(), corpus.intents.end(),
                         [&](const pcapw::FlowIntent& f) { return f.tls && f.version == v; });
  };
  o.check(count(pcapw::Intent::Tls12) >= 3 && count(pcapw::Intent::Tls13) >= 2 && plain == 1, "corpus shape");
  o.check(s.flows.size() == corpus.intents.size(), "one flow per intent");
  o.check(version_ok == tls_total, "versions 100% correct");
  o.check(roles_ok == corpus.intents.size(), "roles match intent");
  o.check(flow_packets + s.non_tcp.total() == s.total_records, "flow conservation");
  o.check(took < kTriageBudget, "runtime < 5 s");
  o.note(std::to_string(version_ok) + "/" + std::to_string(tls_total) + " versions, " + std::to_string(roles_ok) +
         "/" + std::to_string(corpus.intents.size()) + " roles, " + std::to_string(flow_packets) + "+" +
         std::to_string(s.non_tcp.total()) + "=" + std::to_string(s.total_records) + " records, " + ms(took));

  auto r = new_report("acceptance-7");
  report::EvidenceStore store(t.sub("c7"));
  pipeline::absorb(r, pipeline::capture_items(store, path, cfg, system_clock()));
  write(r, t.sub("c7"));
  return o;
}

std::string mutate(std::string s, std::mt19937& rng) {
  const int edits = 1 + static_cast<int>(rng() % 10);
  for (int e = 0; e < edits && !s.empty(); ++e) {
    const std::size_t pos = rng() % s.size();
    switch (rng() % 5) {
      case 0: s[pos] = static_cast<char>(rng()); break;
      case 1: s[pos] ^= static_cast<char>(1u << (rng() % 8)); break;
      case 2: s.erase(pos, 1 + rng() % 32); break;
      case 3: s.insert(pos, std::string(1 + rng() % 8, "<>&\"'=/\x00\xff"[rng() % 9])); break;
      case 4: s.resize(pos); break;
    }
  }
  return s;
}

Outcome fuzz() {
  Outcome o;
  std::mt19937 rng(8);
  {
    const auto corpus = pcapw::build_corpus(3, 2);
    const std::string seed = pcapw::capture_file(corpus.packets);
    pcap::TriageConfig cfg;
    cfg.device_ip = "192.168.166.40";
    cfg.app_ip = "192.168.166.11";
    std::size_t typed = 0, untyped = 0;
    const auto start = SteadyClock::now();
    for (int n = 0; n < 10000; ++n) {
      const std::string s = n % 10 == 0 ? mutate(seed, rng) : seed.substr(0, 24) + mutate(seed.substr(24), rng);
      try {
        (void)pcap::to_json(pcap::summarize_capture(s, cfg));
      } catch (const Error&) {
        ++typed;
      } catch (...) {
        ++untyped;
      }
    }
    const auto took = SteadyClock::now() - start;
    o.check(untyped == 0, "capture: only typed errors");
    o.check(took < kFuzzBudget, "capture: 60 s budget");
    o.note("10000 captures (" + std::to_string(typed) + " typed errors) in " + ms(took));
  }
  {
    std::vector<std::string> seeds;
    for (auto name : app::kDocumentedPrefs)
      seeds.push_back(read_file(kAppRoot + "/" + std::string(app::kAppPackage) + "/shared_prefs/" + std::string(name)));
    std::size_t typed = 0, untyped = 0;
    const auto start = SteadyClock::now();
    for (int n = 0; n < 1000; ++n) {
      try {
        (void)app::to_json(app::parse_shared_prefs(mutate(seeds[n % seeds.size()], rng), "fuzz.xml"));
      } catch (const app::MalformedXml&) {
        ++typed;
      } catch (...) {
        ++untyped;
      }
    }
    const auto took = SteadyClock::now() - start;
    o.check(untyped == 0, "shared prefs: only MalformedXml");
    o.check(took < kFuzzBudget, "shared prefs: 60 s budget");
    o.note("1000 XML documents (" + std::to_string(typed) + " MalformedXml) in " + ms(took));
  }
  return o;
}

Outcome report_integrity() {
  Outcome o;
  const auto secret_set = secrets::fixture_secrets(kAppRoot);
  for (const auto& dir : g_reports) {
    const auto name = fs::path(dir).filename().string();
    const auto v = report::verify_report_dir(dir);
    o.check(v.digest_ok, name + ": digest");
    o.check(v.round_trip_ok, name + ": canonical round trip");
    o.check(v.payload_problems.empty(), name + ": payload hashes");
    o.check(v.redaction_problems.empty(), name + ": sensitive pointers redacted");
    const std::string text = read_file((fs::path(dir) / report::kReportFile).string());
    try {
      const auto r = report::deserialize(text);
      o.check(report::canonical_serialize(r) == text, name + ": serialize(deserialize) identity");
    } catch (const std::exception& e) {
      o.check(false, name + ": deserialize: " + e.what());
    }
    for (const auto& s : secrets::leaked(text, secret_set)) o.check(false, name + ": leaks " + s);
  }
  o.note(std::to_string(g_reports.size()) + " reports, " + std::to_string(secret_set.size()) +
         " fixture secrets grepped");
  return o;
}

}  // namespace

int main() {
  TempDir t;
  local_api::AcquisitionBundle active;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"endpoint coverage", [&] { return endpoint_coverage(t, active); }},
      {"passive purity", [&] { return passive_purity(t); }},
      {"port findings", [&] { return port_findings(t); }},
      {"app artifacts", [&] { return app_artifacts(t); }},
      {"alarm consistency", [&] { return alarm_consistency(active); }},
      {"carver", [&] { return carver(t); }},
      {"TLS triage", [&] { return tls_triage(t); }},
      {"fuzz robustness", [] { return fuzz(); }},
      {"report integrity", [] { return report_integrity(); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first;
    for (const auto& n : o.notes) std::cout << " | " << n;
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
