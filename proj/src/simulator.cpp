#include "ghf/simulator.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>

#include "ghf/local_api.hpp"

namespace ghf::sim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string sanitized_name(const FixtureKey& key) {
  std::string out = key.first;
  for (char c : key.second) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
  }
  return out + ".json";
}

/// Accepts connections and holds them open without speaking any protocol.
class DecoyListener {
 public:
  DecoyListener(int listen_fd, int port) : listen_fd_(listen_fd), port_(port) {
    if (pipe(wake_) != 0) throw std::runtime_error("pipe failed");
    thread_ = std::thread([this] { loop(); });
  }

  ~DecoyListener() { stop(); }

  int port() const { return port_; }

  void stop() {
    if (!thread_.joinable()) return;
    const char b = 1;
    [[maybe_unused]] auto n = write(wake_[1], &b, 1);
    thread_.join();
    for (int fd : held_) close(fd);
    held_.clear();
    close(listen_fd_);
    close(wake_[0]);
    close(wake_[1]);
  }

 private:
  void loop() {
    for (;;) {
      std::vector<pollfd> fds;
      fds.push_back({wake_[0], POLLIN, 0});
      fds.push_back({listen_fd_, POLLIN, 0});
      for (int fd : held_) fds.push_back({fd, POLLIN, 0});
      if (poll(fds.data(), fds.size(), -1) < 0) {
        if (errno == EINTR) continue;
        return;
      }
      if (fds[0].revents != 0) return;
      if (fds[1].revents & POLLIN) {
        int c = accept(listen_fd_, nullptr, nullptr);
        if (c >= 0) held_.push_back(c);
      }
      // Drain whatever peers send; drop peers that went away.
      std::vector<int> keep;
      for (std::size_t i = 2; i < fds.size(); ++i) {
        const int fd = fds[i].fd;
        if (fds[i].revents == 0) {
          keep.push_back(fd);
          continue;
        }
        char buf[512];
        const ssize_t n = recv(fd, buf, sizeof buf, MSG_DONTWAIT);
        if (n > 0 || (n < 0 && (errno == EAGAIN || errno == EINTR))) {
          keep.push_back(fd);
        } else {
          close(fd);
        }
      }
      held_ = std::move(keep);
    }
  }

  int listen_fd_;
  int port_;
  int wake_[2]{-1, -1};
  std::vector<int> held_;
  std::thread thread_;
};

/// Returns the listening fd and the bound port, or an error message.
std::variant<std::pair<int, int>, std::string> bind_tcp(const std::string& ip, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1) return "bad bind address " + ip;
  const int fd = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return std::string("socket: ") + std::strerror(errno);
  const int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || listen(fd, 64) != 0) {
    std::string err = std::strerror(errno);
    close(fd);
    return err;
  }
  socklen_t len = sizeof addr;
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return std::pair<int, int>{fd, ntohs(addr.sin_port)};
}

}  // namespace

bool FixtureSet::covers_documented_endpoints() const {
  for (const auto& e : local_api::endpoints()) {
    if (!responses.contains({std::string(local_api::method_name(e.method)), std::string(e.path)})) {
      return false;
    }
  }
  return true;
}

FixtureSet default_fixtures() {
  FixtureSet f;
  auto add = [&](const char* method, const char* path, Bytes body,
                 std::string content_type = "application/json") {
    f.responses[{method, path}] = FixtureResponse{200, std::move(body), std::move(content_type)};
  };
  add("GET", "/setup/eureka_info",
      R"js({"bssid":"90:9f:33:db:10:de","hotspot_bssid":"FA:8F:CA:98:A5:5B",)js"
      R"js("ip_address":"192.168.166.40","locale":"en-US",)js"
      R"js("location":{"country_code":"KR","latitude":255,"longitude":255},)js"
      R"js("mac_address":"20:DF:B9:4E:87:FE","name":"Living Room","ssid":"neo_house6",)js"
      R"js("timezone":"Asia/Seoul","uma_client_id":"cc918aa3-2bba-46d2-aa3c-bfe1fa3c275b"})js");
  add("GET", "/setup/offer",
      R"js({"token":"ADtqmfTJx82eFvi_wg3BOUFbcUmZgF_ik7veTnYR0hc9MTyJxXQZIJb_OY4B2CEvZizrabJqcZp4)js"
      R"js(DyjevCPBV53Ya1qJ05SdNiY5zxADnalB04sSiflT-IjZUj2yaowZFQxlQUFHliKDm"})js");
  add("GET", "/setup/supported_timezones",
      R"js([{"display_string":"Hawaii-Aleutian Standard Time (Honolulu)","timezone":"Pacific/Honolulu"},)js"
      R"js({"display_string":"Hawaii-Aleutian Daylight Time (Adak)","timezone":"America/Adak"},)js"
      R"js({"display_string":"Korean Standard Time (Seoul)","timezone":"Asia/Seoul"}])js");
  add("GET", "/setup/supported_locales",
      "[{\"display_string\":\"Amharic - \xe1\x8a\xa0\xe1\x88\x9b\xe1\x88\xad\xe1\x8a\x9b\","
      "\"locale\":\"am\"},"
      "{\"display_string\":\"Arabic - \xd8\xa7\xd9\x84\xd8\xb9\xd8\xb1\xd8\xa8\xd9\x8a\xd8\xa9\","
      "\"locale\":\"ar\"},"
      "{\"display_string\":\"English (United States)\",\"locale\":\"en-US\"},"
      "{\"display_string\":\"Korean - \xed\x95\x9c\xea\xb5\xad\xec\x96\xb4\",\"locale\":\"ko\"}]");
  add("GET", "/setup/assistant/alarms",
      R"js({"alarm":[{"date_pattern":{"day":1,"month":4,"year":2019},"fire_time":1554108270000,)js"
      R"js("id":"alarm/5d762a93-0000-20b9-9fa8-f4f5e80b89c8","status":1,)js"
      R"js("time_pattern":{"hour":17,"minute":44,"second":30}}],"timer":[]})js");
  add("GET", "/setup/configured_networks",
      R"js({"configured_networks":[{"ssid":"me"},{"ssid":"DESKTOP-ENIL7DS 3926"},{"ssid":"neo_house6"}],)js"
      R"js("connected_devices":[{"device_class":5898764,"mac_address":"10:92:66:13:c0:4a",)js"
      R"js("name":"Hallym Simon (Galaxy Note4)"}]})js");
  add("POST", "/setup/get_app_device_id", R"js({"app_device_id":"D2C293358C936F11757914443A7C3F57"})js");
  add("POST", "/setup/test_internet_download_speed",
      R"js({"bytes_received":31457280,"response_code":200,"time_for_data_fetch":21807,)js"
      R"js("time_for_http_response":819})js");
  add("POST", "/setup/scan_wifi", "", "text/plain");
  add("GET", "/setup/scan_results", R"js([{"bssid":"90:9f:33:db:10:de","ssid":"neo_house6"}])js");
  return f;
}

FixtureSet load_fixtures(const std::string& dir) {
  const json manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  FixtureSet f;
  f.scan_settle = std::chrono::milliseconds(manifest.value("scan_settle_ms", 500));
  if (manifest.contains("scan_results_idle")) {
    f.scan_results_idle =
        read_file((fs::path(dir) / manifest.at("scan_results_idle").get<std::string>()).string());
  }
  for (const json& e : manifest.at("endpoints")) {
    FixtureResponse r;
    r.status = e.value("status", 200);
    r.content_type = e.value("content_type", "application/json");
    r.body = read_file((fs::path(dir) / e.at("file").get<std::string>()).string());
    f.responses[{e.at("method").get<std::string>(), e.at("path").get<std::string>()}] =
        std::move(r);
  }
  return f;
}

void save_fixtures(const FixtureSet& fixtures, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["scan_settle_ms"] = fixtures.scan_settle.count();
  manifest["scan_results_idle"] = "GET_setup_scan_results.idle.json";
  write_file((fs::path(dir) / "GET_setup_scan_results.idle.json").string(),
             fixtures.scan_results_idle);
  json entries = json::array();
  for (const auto& [key, resp] : fixtures.responses) {
    const std::string file = sanitized_name(key);
    write_file((fs::path(dir) / file).string(), resp.body);
    entries.push_back({{"method", key.first},
                       {"path", key.second},
                       {"status", resp.status},
                       {"content_type", resp.content_type},
                       {"file", file}});
  }
  manifest["endpoints"] = std::move(entries);
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

BindFailure::BindFailure(std::vector<std::pair<int, std::string>> failures)
    : Error("BindFailure",
            [&] {
              std::string msg = "could not bind:";
              for (const auto& [port, why] : failures) {
                msg += " " + std::to_string(port) + " (" + why + ")";
              }
              return msg;
            }()),
      failures_(std::move(failures)) {}

struct Simulator::Impl {
  FixtureSet fixtures;
  httplib::Server server;
  std::thread server_thread;
  int api_port = 0;
  std::vector<std::unique_ptr<DecoyListener>> decoys;

  mutable std::mutex log_mutex;
  std::vector<LoggedRequest> log;

  std::mutex scan_mutex;
  std::optional<std::chrono::steady_clock::time_point> scan_triggered_at;

  bool stopped = false;

  void respond(const httplib::Request& req, httplib::Response& res) {
    const FixtureKey key{req.method, req.path};
    auto it = fixtures.responses.find(key);
    if (it == fixtures.responses.end()) {
      res.status = 404;
      res.set_content("", "text/plain");
    } else if (req.method == "GET" && req.path == "/setup/scan_results") {
      bool ready = false;
      {
        std::lock_guard lock(scan_mutex);
        ready = scan_triggered_at &&
                std::chrono::steady_clock::now() - *scan_triggered_at >= fixtures.scan_settle;
      }
      res.status = it->second.status;
      res.set_content(ready ? it->second.body : fixtures.scan_results_idle,
                      it->second.content_type);
    } else {
      if (req.method == "POST" && req.path == "/setup/scan_wifi") {
        std::lock_guard lock(scan_mutex);
        scan_triggered_at = std::chrono::steady_clock::now();
      }
      res.status = it->second.status;
      res.set_content(it->second.body, it->second.content_type);
    }
    std::lock_guard lock(log_mutex);
    log.push_back({system_now(), req.method, req.path, res.status});
  }
};

Simulator::Simulator(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

Simulator::~Simulator() { shutdown(); }

std::unique_ptr<Simulator> Simulator::start(FixtureSet fixtures, const ServeOptions& options) {
  auto impl = std::make_unique<Impl>();
  impl->fixtures = std::move(fixtures);
  std::vector<std::pair<int, std::string>> failures;

  Impl* raw = impl.get();
  // No SO_REUSEPORT: a second simulator must not silently share the port.
  impl->server.set_socket_options([](socket_t sock) {
    const int one = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  });
  impl->server.set_keep_alive_max_count(1);
  impl->server.set_keep_alive_timeout(1);
  impl->server.set_pre_routing_handler(
      [raw](const httplib::Request& req, httplib::Response& res) {
        raw->respond(req, res);
        return httplib::Server::HandlerResponse::Handled;
      });

  if (options.api_port == 0) {
    impl->api_port = impl->server.bind_to_any_port(options.bind_ip);
    if (impl->api_port <= 0) failures.emplace_back(0, "api port bind failed");
  } else if (impl->server.bind_to_port(options.bind_ip, options.api_port)) {
    impl->api_port = options.api_port;
  } else {
    failures.emplace_back(options.api_port, "api port bind failed");
  }

  for (int port : options.decoy_ports) {
    auto bound = bind_tcp(options.bind_ip, port);
    if (auto* err = std::get_if<std::string>(&bound)) {
      failures.emplace_back(port, *err);
    } else {
      auto [fd, actual] = std::get<std::pair<int, int>>(bound);
      impl->decoys.push_back(std::make_unique<DecoyListener>(fd, actual));
    }
  }

  if (!failures.empty()) {
    impl->decoys.clear();
    if (impl->api_port > 0) {
      // The API socket is already listening; run and stop the server so it is closed.
      std::thread t([raw] { raw->server.listen_after_bind(); });
      impl->server.wait_until_ready();
      impl->server.stop();
      t.join();
    }
    impl->stopped = true;
    throw BindFailure(std::move(failures));
  }

  impl->server_thread = std::thread([raw] { raw->server.listen_after_bind(); });
  impl->server.wait_until_ready();
  return std::unique_ptr<Simulator>(new Simulator(std::move(impl)));
}

int Simulator::api_port() const { return impl_->api_port; }

std::vector<int> Simulator::decoy_ports() const {
  std::vector<int> out;
  for (const auto& d : impl_->decoys) out.push_back(d->port());
  return out;
}

std::vector<LoggedRequest> Simulator::request_log() const {
  std::lock_guard lock(impl_->log_mutex);
  return impl_->log;
}

std::size_t Simulator::count_requests(std::string_view method) const {
  std::lock_guard lock(impl_->log_mutex);
  return static_cast<std::size_t>(std::count_if(impl_->log.begin(), impl_->log.end(),
                                                [&](const auto& r) { return r.method == method; }));
}

void Simulator::shutdown() {
  if (!impl_ || impl_->stopped) return;
  impl_->stopped = true;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
  for (auto& d : impl_->decoys) d->stop();
}

}  // namespace ghf::sim
