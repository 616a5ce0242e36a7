#pragma once

// Streaming pattern scanner for chip-off images and carved files. Finds the
// known log lines plus Ogg / SQLite signatures and generic MAC and email
// strings. Detection only: nothing is repaired or decoded.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "ghf/common.hpp"

namespace ghf::carve {

enum class Category { DeviceIdentity, Network, PeerDevice, Os, FileSignature };
std::string_view to_string(Category c);

enum class MatcherKind {
  /// Literal prefix; the match extends to the end of its text line.
  LogLine,
  /// Literal bytes only (file magic).
  Signature,
  /// Six hex pairs separated by ':' or '-', not embedded in a longer run.
  MacAddress,
  /// local@domain.tld with a non-word byte before the local part.
  Email,
};

struct PatternRule {
  std::string id;
  MatcherKind kind = MatcherKind::LogLine;
  /// Required for LogLine and Signature.
  Bytes literal;
  Category category = Category::DeviceIdentity;
  std::string description;
};

/// No match (literal plus captured tail) is longer than this, so the
/// context window always contains the whole match.
inline constexpr std::size_t kMaxMatch = 128;
inline constexpr std::size_t kContextSize = 128;

std::vector<PatternRule> builtin_rules();

/// Throws std::invalid_argument for duplicate ids, empty literals or
/// literals longer than kMaxMatch.
void validate_rules(const std::vector<PatternRule>& rules);

struct CarvedFinding {
  std::string rule_id;
  Category category = Category::DeviceIdentity;
  std::string source;
  std::uint64_t offset = 0;
  /// Raw source bytes at [offset, offset + matched.size()).
  Bytes matched;
  std::uint64_t context_offset = 0;
  Bytes context;
  bool utf16le = false;
  /// Signatures only: bytes to the next signature finding or end of source.
  std::optional<std::uint64_t> length_to_next_signature;

  /// matched as text; UTF-16LE matches are narrowed to ASCII.
  std::string text() const;
  bool operator==(const CarvedFinding&) const = default;
};

struct ScanOptions {
  std::size_t chunk_size = 1 << 20;
  /// Also look for LogLine literals encoded as UTF-16LE.
  bool utf16le = false;
};

class SourceUnreadable : public Error {
 public:
  explicit SourceUnreadable(const std::string& what) : Error("SourceUnreadable", what) {}
};

class RootMissing : public Error {
 public:
  explicit RootMissing(const std::string& what) : Error("RootMissing", what) {}
};

/// Reads `in` in chunks of options.chunk_size, which must be at least twice
/// the longest span a match can need (std::invalid_argument otherwise).
/// Memory stays O(chunk_size). Findings sorted by (offset, rule_id).
std::vector<CarvedFinding> scan_stream(std::istream& in, const std::string& source,
                                       const std::vector<PatternRule>& rules,
                                       const ScanOptions& options = {});

/// Opens and scans one file. Throws SourceUnreadable.
std::vector<CarvedFinding> scan_file(const std::string& path, const std::string& source,
                                     const std::vector<PatternRule>& rules,
                                     const ScanOptions& options = {});

/// Single pass over an in-memory buffer; the reference for scan_stream.
std::vector<CarvedFinding> scan_buffer(std::string_view data, const std::string& source,
                                       const std::vector<PatternRule>& rules, bool utf16le = false);

/// Smallest chunk size scan_stream accepts for these rules.
std::size_t min_chunk_size(const std::vector<PatternRule>& rules, bool utf16le = false);

struct FolderScan {
  std::vector<CarvedFinding> findings;
  std::vector<std::string> warnings;
};

/// Scans every regular file below root; sources are root-relative paths.
/// Unreadable files become warnings. Throws RootMissing.
FolderScan scan_carved_folder(const std::string& root, const std::vector<PatternRule>& rules,
                              const ScanOptions& options = {});

}  // namespace ghf::carve
