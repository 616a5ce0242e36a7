#pragma once

// Fixture-driven stand-in for the speaker's local surface: the /setup HTTP
// API on the API port plus accept-and-hold decoy listeners on the other
// known ports.

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ghf/common.hpp"

namespace ghf::sim {

struct FixtureResponse {
  int status = 200;
  Bytes body;
  std::string content_type = "application/json";

  bool operator==(const FixtureResponse&) const = default;
};

/// Key is (method, path), e.g. ("GET", "/setup/eureka_info").
using FixtureKey = std::pair<std::string, std::string>;

struct FixtureSet {
  std::map<FixtureKey, FixtureResponse> responses;
  /// Served for GET /setup/scan_results until a scan has been triggered and
  /// scan_settle has elapsed.
  Bytes scan_results_idle = "[]";
  std::chrono::milliseconds scan_settle{500};

  /// All ten documented (method, path) pairs have a response.
  bool covers_documented_endpoints() const;

  bool operator==(const FixtureSet&) const = default;
};

FixtureSet default_fixtures();

/// Directory layout: manifest.json plus one body file per endpoint, named by
/// the sanitized request line (GET_setup_eureka_info.json).
FixtureSet load_fixtures(const std::string& dir);
void save_fixtures(const FixtureSet& fixtures, const std::string& dir);

struct LoggedRequest {
  Instant at{};
  std::string method;
  std::string path;
  int status = 0;
};

class BindFailure : public Error {
 public:
  explicit BindFailure(std::vector<std::pair<int, std::string>> failures);
  const std::vector<std::pair<int, std::string>>& failures() const noexcept { return failures_; }

 private:
  std::vector<std::pair<int, std::string>> failures_;
};

struct ServeOptions {
  std::string bind_ip = "127.0.0.1";
  /// 0 picks an ephemeral port; see Simulator::api_port().
  int api_port = 8008;
  std::vector<int> decoy_ports{8009, 8443, 9000, 10001};
};

class Simulator {
 public:
  /// Binds every port before returning. Throws BindFailure listing each port
  /// that could not be bound; nothing is left running in that case.
  static std::unique_ptr<Simulator> start(FixtureSet fixtures, const ServeOptions& options);

  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  int api_port() const;
  std::vector<int> decoy_ports() const;
  std::vector<LoggedRequest> request_log() const;
  std::size_t count_requests(std::string_view method) const;

  /// Idempotent. Closes every listener and held connection.
  void shutdown();

  struct Impl;

 private:
  explicit Simulator(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace ghf::sim
