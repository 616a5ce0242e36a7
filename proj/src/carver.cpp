#include "ghf/carver.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace ghf::carve {

namespace fs = std::filesystem;

namespace {

/// Bytes past a match start any matcher (or the context window) may read.
constexpr std::size_t kForward = kMaxMatch + 1;
/// Bytes kept before the next scan position for boundary checks and context.
constexpr std::size_t kBehind = kContextSize;

bool is_hex(unsigned char c) { return std::isxdigit(c) != 0; }
bool is_alnum(unsigned char c) { return c < 0x80 && std::isalnum(c) != 0; }
bool is_local_char(unsigned char c) {
  return is_alnum(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-';
}
bool is_domain_char(unsigned char c) { return is_alnum(c) || c == '.' || c == '-'; }
bool is_line_end(unsigned char c) { return c == '\n' || c == '\r' || c == '\0'; }

Bytes widen(std::string_view ascii) {
  Bytes out;
  for (char c : ascii) {
    out += c;
    out += '\0';
  }
  return out;
}

struct Candidate {
  std::size_t rule;
  bool utf16;
};

/// A window [base, base + data.size()) of the source. Positions beyond the
/// window are treated as end of source; callers keep kForward bytes of slack
/// unless the window really does end the source.
struct Window {
  std::string_view data;
  std::uint64_t base = 0;

  bool has(std::uint64_t pos) const { return pos >= base && pos < base + data.size(); }
  unsigned char at(std::uint64_t pos) const { return static_cast<unsigned char>(data[pos - base]); }
  std::string_view slice(std::uint64_t pos, std::size_t len) const {
    return data.substr(pos - base, len);
  }
  std::uint64_t end() const { return base + data.size(); }
};

class Engine {
 public:
  Engine(const std::vector<PatternRule>& rules, bool utf16) : rules_(rules) {
    validate_rules(rules);
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const auto& r = rules[i];
      switch (r.kind) {
        case MatcherKind::LogLine:
          add(static_cast<unsigned char>(r.literal[0]), {i, false});
          if (utf16) {
            wide_.emplace(i, widen(r.literal));
            add(static_cast<unsigned char>(r.literal[0]), {i, true});
          }
          break;
        case MatcherKind::Signature:
          add(static_cast<unsigned char>(r.literal[0]), {i, false});
          break;
        case MatcherKind::MacAddress:
          for (int c = 0; c < 256; ++c) {
            if (is_hex(static_cast<unsigned char>(c))) add(static_cast<unsigned char>(c), {i, false});
          }
          break;
        case MatcherKind::Email:
          for (int c = 0; c < 256; ++c) {
            if (is_local_char(static_cast<unsigned char>(c))) add(static_cast<unsigned char>(c), {i, false});
          }
          break;
      }
    }
  }

  /// Scans positions [from, to) of the window.
  void scan(const Window& w, std::uint64_t from, std::uint64_t to, const std::string& source,
            std::vector<CarvedFinding>& out) const {
    for (std::uint64_t p = from; p < to; ++p) {
      const auto& cands = table_[w.at(p)];
      for (const auto& c : cands) {
        const std::size_t len = match_at(w, p, c);
        if (len == 0) continue;
        CarvedFinding f;
        f.rule_id = rules_[c.rule].id;
        f.category = rules_[c.rule].category;
        f.source = source;
        f.offset = p;
        f.matched = Bytes(w.slice(p, len));
        f.utf16le = c.utf16;
        const std::uint64_t before = std::min<std::uint64_t>(p, (kContextSize - len) / 2);
        f.context_offset = p - before;
        const std::uint64_t ctx_end = std::min<std::uint64_t>(w.end(), f.context_offset + kContextSize);
        f.context = Bytes(w.slice(f.context_offset, ctx_end - f.context_offset));
        out.push_back(std::move(f));
      }
    }
  }

 private:
  void add(unsigned char first, Candidate c) { table_[first].push_back(c); }

  std::size_t match_at(const Window& w, std::uint64_t p, const Candidate& c) const {
    const auto& r = rules_[c.rule];
    switch (r.kind) {
      case MatcherKind::Signature:
        return starts_with(w, p, r.literal) ? r.literal.size() : 0;
      case MatcherKind::LogLine:
        return c.utf16 ? log_line_utf16(w, p, wide_.at(c.rule)) : log_line(w, p, r.literal);
      case MatcherKind::MacAddress:
        return mac(w, p);
      case MatcherKind::Email:
        return email(w, p);
    }
    return 0;
  }

  static bool starts_with(const Window& w, std::uint64_t p, std::string_view lit) {
    if (p + lit.size() > w.end()) return false;
    return w.slice(p, lit.size()) == lit;
  }

  static std::size_t log_line(const Window& w, std::uint64_t p, std::string_view lit) {
    if (!starts_with(w, p, lit)) return 0;
    std::size_t len = lit.size();
    while (len < kMaxMatch && w.has(p + len) && !is_line_end(w.at(p + len))) ++len;
    return len;
  }

  static std::size_t log_line_utf16(const Window& w, std::uint64_t p, std::string_view wide) {
    if (!starts_with(w, p, wide)) return 0;
    std::size_t len = wide.size();
    while (len + 2 <= kMaxMatch && w.has(p + len + 1)) {
      const unsigned char lo = w.at(p + len);
      if (w.at(p + len + 1) != 0 || is_line_end(lo) || lo >= 0x80) break;
      len += 2;
    }
    return len;
  }

  static std::size_t mac(const Window& w, std::uint64_t p) {
    constexpr std::size_t kLen = 17;
    if (p + kLen > w.end()) return 0;
    const unsigned char sep = w.at(p + 2);
    if (sep != ':' && sep != '-') return 0;
    for (std::size_t i = 0; i < kLen; ++i) {
      const unsigned char c = w.at(p + i);
      if (i % 3 == 2 ? c != sep : !is_hex(c)) return 0;
    }
    if (p > 0 && w.has(p - 1)) {
      const unsigned char b = w.at(p - 1);
      if (is_hex(b) || b == sep) return 0;
    }
    if (w.has(p + kLen)) {
      const unsigned char a = w.at(p + kLen);
      if (is_hex(a) || a == sep) return 0;
    }
    return kLen;
  }

  static std::size_t email(const Window& w, std::uint64_t p) {
    if (p > 0 && w.has(p - 1) && is_local_char(w.at(p - 1))) return 0;
    std::size_t i = 0;
    while (i < kMaxMatch && w.has(p + i) && is_local_char(w.at(p + i))) ++i;
    if (i == 0 || i >= kMaxMatch || !w.has(p + i) || w.at(p + i) != '@') return 0;
    const std::size_t at = i++;
    while (i <= kMaxMatch && w.has(p + i) && is_domain_char(w.at(p + i))) ++i;
    if (i > kMaxMatch) return 0;
    // Sentence punctuation after the address is not part of it.
    while (i > at + 1 && (w.at(p + i - 1) == '.' || w.at(p + i - 1) == '-')) --i;
    const std::string_view domain = w.slice(p + at + 1, i - at - 1);
    const auto dot = domain.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || domain.find("..") != std::string_view::npos) return 0;
    const std::string_view tld = domain.substr(dot + 1);
    if (tld.size() < 2) return 0;
    for (char c : tld) {
      if (!std::isalpha(static_cast<unsigned char>(c))) return 0;
    }
    return i;
  }

  const std::vector<PatternRule>& rules_;
  std::array<std::vector<Candidate>, 256> table_;
  std::map<std::size_t, Bytes> wide_;
};

void finish(std::vector<CarvedFinding>& findings, std::uint64_t source_size) {
  std::sort(findings.begin(), findings.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source, a.offset, a.rule_id, a.utf16le) <
           std::tie(b.source, b.offset, b.rule_id, b.utf16le);
  });
  CarvedFinding* prev = nullptr;
  for (auto& f : findings) {
    if (f.category != Category::FileSignature) continue;
    if (prev) prev->length_to_next_signature = f.offset - prev->offset;
    prev = &f;
  }
  if (prev) prev->length_to_next_signature = source_size - prev->offset;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::DeviceIdentity: return "device_identity";
    case Category::Network: return "network";
    case Category::PeerDevice: return "peer_device";
    case Category::Os: return "os";
    case Category::FileSignature: return "file_signature";
  }
  return "unknown";
}

std::string CarvedFinding::text() const {
  if (!utf16le) return matched;
  std::string out;
  for (std::size_t i = 0; i < matched.size(); i += 2) out += matched[i];
  return out;
}

std::vector<PatternRule> builtin_rules() {
  using K = MatcherKind;
  using C = Category;
  auto line = [](std::string id, std::string lit, C cat, std::string desc) {
    return PatternRule{std::move(id), K::LogLine, std::move(lit), cat, std::move(desc)};
  };
  return {
      line("ram_summary", "RAM: ", C::Os, "kernel memory summary"),
      line("nand_device", "NAND device: ", C::DeviceIdentity, "flash chip manufacturer and id"),
      line("product_name", "Product name: ", C::DeviceIdentity, "board code name"),
      line("product_model", "Product model: ", C::DeviceIdentity, "marketing model name"),
      line("wifi_interface", "Wifi.interface: ", C::Network, "wireless interface name"),
      line("wifi_ap_dev_name", "Wifi.ap.dev_name: ", C::Network, "access point device name"),
      line("wifi_ap_manufacturer", "Wifi.ap.manufacturer: ", C::Network, "access point vendor"),
      line("wifi_ap_model_name", "Wifi.ap.model.name: ", C::Network, "access point model"),
      // Spelled as logged by the firmware.
      line("wifi_ap_model_number", "Wifi.ap.modle_number: ", C::Network, "access point model number"),
      line("wifi_ap_vendor_prefix", "Wifi.ap.vendor_prefix: ", C::Network, "access point OUI"),
      line("os_platform", "OS platform: ", C::Os, "operating system"),
      line("user_name", "User name: ", C::PeerDevice, "paired phone owner"),
      line("phone_model", "Phone model: ", C::PeerDevice, "paired phone model"),
      line("mac_address_line", "MAC address: ", C::PeerDevice, "paired phone MAC"),
      PatternRule{"sig_ogg", K::Signature, "OggS", C::FileSignature, "Ogg page capture pattern"},
      PatternRule{"sig_sqlite", K::Signature, Bytes("SQLite format 3\0", 16), C::FileSignature,
                  "SQLite database header"},
      PatternRule{"mac_generic", K::MacAddress, "", C::Network, "any colon or dash separated MAC"},
      PatternRule{"email_generic", K::Email, "", C::PeerDevice, "any email address"},
  };
}

void validate_rules(const std::vector<PatternRule>& rules) {
  std::set<std::string> ids;
  for (const auto& r : rules) {
    if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate rule id " + r.id);
    const bool literal = r.kind == MatcherKind::LogLine || r.kind == MatcherKind::Signature;
    if (literal && r.literal.empty()) throw std::invalid_argument("empty literal in rule " + r.id);
    if (r.literal.size() * 2 > kMaxMatch) throw std::invalid_argument("literal too long in rule " + r.id);
  }
}

std::size_t min_chunk_size(const std::vector<PatternRule>&, bool) { return 2 * kForward; }

std::vector<CarvedFinding> scan_buffer(std::string_view data, const std::string& source,
                                       const std::vector<PatternRule>& rules, bool utf16le) {
  const Engine engine(rules, utf16le);
  std::vector<CarvedFinding> out;
  engine.scan(Window{data, 0}, 0, data.size(), source, out);
  finish(out, data.size());
  return out;
}

std::vector<CarvedFinding> scan_stream(std::istream& in, const std::string& source,
                                       const std::vector<PatternRule>& rules, const ScanOptions& options) {
  if (options.chunk_size < min_chunk_size(rules, options.utf16le)) {
    throw std::invalid_argument("chunk_size below " + std::to_string(min_chunk_size(rules, options.utf16le)));
  }
  const Engine engine(rules, options.utf16le);
  std::vector<CarvedFinding> out;
  Bytes buf;
  std::uint64_t base = 0;
  std::uint64_t next = 0;
  Bytes chunk(options.chunk_size, '\0');
  for (;;) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    if (in.bad()) throw SourceUnreadable(source + ": read error");
    const auto got = static_cast<std::size_t>(in.gcount());
    buf.append(chunk.data(), got);
    const bool eof = in.eof() || got == 0;
    const Window w{buf, base};
    const std::uint64_t limit = eof ? w.end() : std::max(next, w.end() > kForward ? w.end() - kForward : 0);
    engine.scan(w, next, limit, source, out);
    next = limit;
    if (eof) break;
    const std::uint64_t keep_from = next > kBehind ? std::max(base, next - kBehind) : base;
    buf.erase(0, keep_from - base);
    base = keep_from;
  }
  finish(out, base + buf.size());
  return out;
}

std::vector<CarvedFinding> scan_file(const std::string& path, const std::string& source,
                                     const std::vector<PatternRule>& rules, const ScanOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceUnreadable(path + ": cannot open");
  return scan_stream(in, source, rules, options);
}

FolderScan scan_carved_folder(const std::string& root, const std::vector<PatternRule>& rules,
                              const ScanOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw RootMissing(root + " is not a directory");
  std::vector<fs::path> paths;
  FolderScan result;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    std::error_code e2;
    if (it->is_directory(e2)) continue;
    paths.push_back(it->path());
  }
  if (ec) result.warnings.push_back("walk stopped early: " + ec.message());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    const std::string rel = fs::relative(p, root).generic_string();
    std::error_code e2;
    if (!fs::is_regular_file(p, e2)) {
      result.warnings.push_back(rel + ": not a readable regular file, skipped");
      continue;
    }
    try {
      auto found = scan_file(p.string(), rel, rules, options);
      result.findings.insert(result.findings.end(), std::make_move_iterator(found.begin()),
                             std::make_move_iterator(found.end()));
    } catch (const SourceUnreadable& e) {
      result.warnings.push_back(rel + ": " + e.what());
    }
  }
  return result;
}

}  // namespace ghf::carve
