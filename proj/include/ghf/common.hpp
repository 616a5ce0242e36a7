#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ghf {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Raw evidence bytes. std::string is used as an opaque byte container so
/// bodies can flow between the HTTP layer, files and hashing without copies.
using Bytes = std::string;

using Digest = std::array<std::uint8_t, 32>;

/// UTC instant with microsecond resolution.
using Instant = std::chrono::sys_time<std::chrono::microseconds>;

/// Injectable clock. Tests pass a fixed clock for reproducible reports.
using Clock = std::function<Instant()>;

Instant system_now();
Clock system_clock();
Clock fixed_clock(Instant at);

Digest sha256(std::string_view data);
Digest sha256(std::span<const std::uint8_t> data);

/// Incremental SHA-256 for file-sized inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  Digest finish();

 private:
  void* ctx_;
};

std::string to_hex(const Digest& digest);
std::string to_hex(std::string_view bytes);

/// Parses 64 lowercase or uppercase hex characters.
Digest digest_from_hex(std::string_view hex);

/// "2019-04-01T08:44:30.000Z"; always millisecond precision.
std::string format_utc_ms(Instant t);

/// Inverse of format_utc_ms. Throws std::invalid_argument.
Instant parse_utc_ms(std::string_view text);

/// Base class of every typed error the toolkit raises. kind() is a stable
/// machine-readable name ("SchemaViolation", "BadMagic", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Reads a whole file. Throws std::runtime_error if unreadable.
Bytes read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

/// True for RFC 1918 private IPv4 addresses (dotted quad input).
bool is_rfc1918(std::string_view ipv4);

/// Escapes non-printable bytes as \xNN so binary matches are safe in JSON.
std::string printable(std::string_view bytes);

}  // namespace ghf
