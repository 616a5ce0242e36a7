#include "ghf/capture.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <cctype>
#include <set>
#include <stdexcept>

namespace ghf::pcap {

namespace {

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
constexpr std::uint32_t kLinkEthernet = 1;
/// Larger records than this are treated as header corruption.
constexpr std::uint32_t kMaxRecord = 256 * 1024;

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

std::uint32_t load_le32(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return std::uint32_t{u[0]} | std::uint32_t{u[1]} << 8 | std::uint32_t{u[2]} << 16 |
         std::uint32_t{u[3]} << 24;
}

/// Bounds-checked big-endian cursor. Every read fails softly.
class Cursor {
 public:
  explicit Cursor(std::string_view data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  bool skip(std::size_t n) {
    if (n > remaining()) return false;
    pos_ += n;
    return true;
  }
  bool u8(std::uint8_t& v) {
    if (remaining() < 1) return false;
    v = static_cast<std::uint8_t>(data_[pos_++]);
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (remaining() < 2) return false;
    v = static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_]) << 8 |
                                   static_cast<std::uint8_t>(data_[pos_ + 1]));
    pos_ += 2;
    return true;
  }
  bool u24(std::uint32_t& v) {
    std::uint8_t hi;
    std::uint16_t lo;
    if (!u8(hi) || !u16(lo)) return false;
    v = std::uint32_t{hi} << 16 | lo;
    return true;
  }
  bool u32(std::uint32_t& v) {
    std::uint16_t hi, lo;
    if (!u16(hi) || !u16(lo)) return false;
    v = std::uint32_t{hi} << 16 | lo;
    return true;
  }
  bool bytes(std::size_t n, std::string_view& out) {
    if (n > remaining()) return false;
    out = data_.substr(pos_, n);
    pos_ += n;
    return true;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

struct TcpSegment {
  Endpoint src;
  Endpoint dst;
  std::uint32_t seq = 0;
  bool syn = false;
  std::string_view payload;
};

enum class Decoded { Tcp, Udp, Ipv6, OtherIpv4, NonIp, Malformed };

Decoded decode(std::string_view frame, TcpSegment& seg) {
  Cursor c(frame);
  std::uint16_t ethertype;
  if (!c.skip(12) || !c.u16(ethertype)) return Decoded::Malformed;
  while (ethertype == 0x8100 || ethertype == 0x88a8) {
    if (!c.skip(2) || !c.u16(ethertype)) return Decoded::Malformed;
  }
  if (ethertype == 0x86dd) return Decoded::Ipv6;
  if (ethertype != 0x0800) return Decoded::NonIp;

  const std::size_t ip_start = c.pos();
  std::uint8_t ver_ihl, proto;
  std::uint16_t total_len, frag;
  std::uint32_t src_ip, dst_ip;
  if (!c.u8(ver_ihl) || !c.skip(1) || !c.u16(total_len) || !c.skip(2) || !c.u16(frag) ||
      !c.skip(1) || !c.u8(proto) || !c.skip(2) || !c.u32(src_ip) || !c.u32(dst_ip)) {
    return Decoded::Malformed;
  }
  const std::size_t ihl = (ver_ihl & 0x0f) * 4u;
  if ((ver_ihl >> 4) != 4 || ihl < 20 || total_len < ihl) return Decoded::Malformed;
  if (!c.skip(ihl - 20)) return Decoded::Malformed;
  // Captured bytes may be cut short by snaplen; never read past them.
  const std::size_t ip_avail = std::min<std::size_t>(total_len, frame.size() - ip_start);
  if (ip_avail < ihl) return Decoded::Malformed;
  const std::string_view l4 = frame.substr(ip_start + ihl, ip_avail - ihl);

  if (proto == 17) return Decoded::Udp;
  if (proto != 6) return Decoded::OtherIpv4;
  // Non-first fragments carry no TCP header.
  if ((frag & 0x1fff) != 0 || (frag & 0x2000) != 0) return Decoded::Malformed;

  Cursor t(l4);
  std::uint16_t sport, dport, flags_word;
  std::uint32_t seq;
  if (!t.u16(sport) || !t.u16(dport) || !t.u32(seq) || !t.skip(4) || !t.u16(flags_word)) {
    return Decoded::Malformed;
  }
  const std::size_t doff = (flags_word >> 12) * 4u;
  if (doff < 20 || doff > l4.size()) return Decoded::Malformed;
  seg.src = {src_ip, sport};
  seg.dst = {dst_ip, dport};
  seg.seq = seq;
  seg.syn = (flags_word & 0x02) != 0;
  seg.payload = l4.substr(doff);
  return Decoded::Tcp;
}

/// Set of covered half-open ranges; add() reports how many bytes were new.
class RangeSet {
 public:
  std::uint64_t add(std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t added = hi - lo;
    auto it = ranges_.upper_bound(lo);
    if (it != ranges_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= lo) it = prev;
    }
    while (it != ranges_.end() && it->first <= hi) {
      const std::uint64_t olo = std::max(lo, it->first);
      const std::uint64_t ohi = std::min(hi, it->second);
      if (ohi > olo) added -= ohi - olo;
      lo = std::min(lo, it->first);
      hi = std::max(hi, it->second);
      it = ranges_.erase(it);
    }
    ranges_.emplace(lo, hi);
    return added;
  }

 private:
  std::map<std::uint64_t, std::uint64_t> ranges_;
};

struct Direction {
  bool have_isn = false;
  std::uint32_t isn = 0;
  RangeSet seen;
  std::uint64_t unique = 0;
  Bytes stream;
  std::map<std::uint64_t, Bytes> pending;
  std::size_t pending_bytes = 0;
  bool dropped = false;

  void add(const TcpSegment& s, std::size_t cap) {
    if (s.syn && stream.empty() && pending.empty()) {
      isn = s.seq + 1;
      have_isn = true;
    }
    if (s.payload.empty()) return;
    if (!have_isn) {
      isn = s.seq;
      have_isn = true;
    }
    const std::uint32_t data_seq = s.syn ? s.seq + 1 : s.seq;
    std::string_view data = s.payload;
    std::uint32_t rel32 = data_seq - isn;
    if (rel32 >= 0x80000000u) {
      // Starts before the first byte we anchored on.
      const std::uint64_t before = 0x100000000ull - rel32;
      if (before >= data.size()) return;
      data.remove_prefix(before);
      rel32 = 0;
    }
    const std::uint64_t rel = rel32;
    unique += seen.add(rel, rel + data.size());

    if (rel >= cap) return;
    if (rel + data.size() > cap) data = data.substr(0, cap - rel);
    if (rel <= stream.size()) {
      append(rel, data);
      drain();
    } else if (pending_bytes + data.size() <= cap) {
      auto& slot = pending[rel];
      if (data.size() > slot.size()) {
        pending_bytes += data.size() - slot.size();
        slot = Bytes(data);
      }
    } else {
      dropped = true;
    }
  }

  void append(std::uint64_t rel, std::string_view data) {
    const std::uint64_t overlap = stream.size() - rel;
    if (overlap < data.size()) stream.append(data.substr(overlap));
  }

  void drain() {
    while (!pending.empty() && pending.begin()->first <= stream.size()) {
      auto node = pending.extract(pending.begin());
      pending_bytes -= node.mapped().size();
      append(node.key(), node.mapped());
    }
  }

  std::uint64_t unjoined() const { return pending_bytes; }
};

struct FlowState {
  TcpFlow flow;
  Direction ab;
  Direction ba;
};

// --- TLS ---

struct Hello {
  bool present = false;
  std::uint16_t version = 0;
  std::optional<std::string> sni;
  std::optional<std::vector<std::uint16_t>> supported_versions;
  std::optional<std::uint16_t> cipher;
};

bool valid_record_header(std::uint8_t type, std::uint16_t version, std::uint16_t len) {
  return type >= 20 && type <= 24 && (version >> 8) == 3 && (version & 0xff) <= 4 && len > 0 &&
         len <= (1 << 14) + 2048;
}

/// Concatenates the handshake-record fragments at the start of a stream.
/// Returns nullopt if the stream does not begin with a TLS record.
std::optional<Bytes> handshake_bytes(std::string_view stream) {
  Cursor c(stream);
  Bytes out;
  bool first = true;
  while (c.remaining() >= 5) {
    std::uint8_t type = 0;
    std::uint16_t version = 0, len = 0;
    c.u8(type);
    c.u16(version);
    c.u16(len);
    if (!valid_record_header(type, version, len)) {
      if (first) return std::nullopt;
      break;
    }
    first = false;
    std::string_view body;
    const bool whole = c.bytes(len, body);
    if (!whole) c.bytes(c.remaining(), body);
    if (type == 22) out.append(body);
    if (!whole || type == 23 || type == 21) break;
  }
  if (first) return std::nullopt;
  return out;
}

void parse_extensions(Cursor& c, bool server, Hello& h) {
  std::uint16_t total;
  std::string_view block;
  if (!c.u16(total) || !c.bytes(total, block)) return;
  Cursor e(block);
  std::uint16_t type, len;
  std::string_view body;
  while (e.u16(type) && e.u16(len) && e.bytes(len, body)) {
    Cursor b(body);
    if (type == 0 && !server) {
      std::uint16_t list_len;
      std::string_view list;
      if (!b.u16(list_len) || !b.bytes(list_len, list)) continue;
      Cursor l(list);
      std::uint8_t name_type;
      std::uint16_t name_len;
      std::string_view name;
      while (l.u8(name_type) && l.u16(name_len) && l.bytes(name_len, name)) {
        if (name_type == 0) {
          h.sni = std::string(name);
          break;
        }
      }
    } else if (type == 43) {
      std::vector<std::uint16_t> versions;
      std::uint16_t v;
      if (server) {
        if (b.u16(v)) versions.push_back(v);
      } else {
        std::uint8_t list_len;
        std::string_view list;
        if (!b.u8(list_len) || !b.bytes(list_len, list)) continue;
        Cursor l(list);
        while (l.u16(v)) versions.push_back(v);
      }
      h.supported_versions = std::move(versions);
    }
  }
}

/// Finds the first complete handshake message of `want` type (1 or 2).
Hello find_hello(std::string_view handshake, std::uint8_t want) {
  Hello h;
  Cursor c(handshake);
  std::uint8_t type;
  std::uint32_t len;
  std::string_view body;
  while (c.u8(type) && c.u24(len) && c.bytes(len, body)) {
    if (type != want) continue;
    Cursor m(body);
    std::uint8_t sid_len;
    std::string_view skip;
    if (!m.u16(h.version) || !m.skip(32) || !m.u8(sid_len) || !m.skip(sid_len)) return {};
    if (want == 1) {
      std::uint16_t cs_len;
      std::uint8_t comp_len;
      if (!m.u16(cs_len) || !m.bytes(cs_len, skip) || !m.u8(comp_len) || !m.skip(comp_len)) return {};
    } else {
      std::uint16_t cipher;
      if (!m.u16(cipher) || !m.skip(1)) return {};
      h.cipher = cipher;
    }
    if (m.remaining() > 0) parse_extensions(m, want == 2, h);
    h.present = true;
    return h;
  }
  return h;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string role_version_key(const FlowReport& f) {
  return std::string(to_string(f.role.role)) + "/" +
         (f.tls ? std::string(to_string(f.tls->negotiated)) : std::string("none"));
}

}  // namespace

std::string ipv4_to_string(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

std::uint32_t parse_ipv4(std::string_view dotted) {
  in_addr a{};
  if (inet_pton(AF_INET, std::string(dotted).c_str(), &a) != 1) {
    throw std::invalid_argument("not an IPv4 address: " + std::string(dotted));
  }
  return ntohl(a.s_addr);
}

std::string to_string(const Endpoint& e) { return ipv4_to_string(e.ip) + ":" + std::to_string(e.port); }

CaptureFile parse_capture(std::string_view bytes) {
  if (bytes.size() < 4) throw BadMagic("file shorter than the magic number");
  const std::uint32_t raw = load_le32(bytes.data());
  CaptureFile out;
  if (raw == kMagicMicros || raw == kMagicNanos) {
    out.byte_swapped = false;
  } else if (bswap32(raw) == kMagicMicros || bswap32(raw) == kMagicNanos) {
    out.byte_swapped = true;
  } else {
    throw BadMagic("unrecognized magic 0x" + to_hex(bytes.substr(0, 4)));
  }
  out.nanosecond = raw == kMagicNanos || bswap32(raw) == kMagicNanos;
  if (bytes.size() < 24) throw BadMagic("global header truncated");
  auto u32 = [&](std::size_t off) {
    const std::uint32_t v = load_le32(bytes.data() + off);
    return out.byte_swapped ? bswap32(v) : v;
  };
  out.snaplen = u32(16);
  const std::uint32_t link = u32(20) & 0x0fffffff;  // upper bits carry FCS info
  if (link != kLinkEthernet) throw UnsupportedLinkType(link);

  const std::uint32_t frac_limit = out.nanosecond ? 1000000000u : 1000000u;
  std::size_t pos = 24;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 16) {
      out.warnings.push_back("truncated record header at offset " + std::to_string(pos));
      break;
    }
    const std::uint32_t sec = u32(pos), frac = u32(pos + 4), incl = u32(pos + 8), orig = u32(pos + 12);
    if (incl > orig || incl > kMaxRecord || frac >= frac_limit) {
      out.warnings.push_back("corrupt record header at offset " + std::to_string(pos));
      break;
    }
    if (bytes.size() - pos - 16 < incl) {
      out.warnings.push_back("truncated record at offset " + std::to_string(pos));
      break;
    }
    PacketRecord r;
    const std::int64_t micros = out.nanosecond ? frac / 1000 : frac;
    r.timestamp = Instant(std::chrono::microseconds(std::int64_t{sec} * 1000000 + micros));
    r.captured_length = incl;
    r.original_length = orig;
    r.link_payload = Bytes(bytes.substr(pos + 16, incl));
    out.records.push_back(std::move(r));
    pos += 16 + incl;
  }
  return out;
}

FlowSet assemble_flows(const std::vector<PacketRecord>& packets, const FlowOptions& options) {
  std::map<std::pair<Endpoint, Endpoint>, FlowState> flows;
  FlowSet out;
  for (const auto& p : packets) {
    TcpSegment seg;
    switch (decode(p.link_payload, seg)) {
      case Decoded::Tcp: break;
      case Decoded::Udp: ++out.non_tcp.udp; continue;
      case Decoded::Ipv6: ++out.non_tcp.ipv6; continue;
      case Decoded::OtherIpv4: ++out.non_tcp.other_ipv4; continue;
      case Decoded::NonIp: ++out.non_tcp.non_ip; continue;
      case Decoded::Malformed: ++out.non_tcp.malformed; continue;
    }
    const bool forward = seg.src <= seg.dst;
    const auto key = forward ? std::pair(seg.src, seg.dst) : std::pair(seg.dst, seg.src);
    auto [it, fresh] = flows.try_emplace(key);
    FlowState& st = it->second;
    if (fresh) {
      st.flow.a = key.first;
      st.flow.b = key.second;
      st.flow.first_seen = st.flow.last_seen = p.timestamp;
    }
    st.flow.first_seen = std::min(st.flow.first_seen, p.timestamp);
    st.flow.last_seen = std::max(st.flow.last_seen, p.timestamp);
    ++st.flow.packet_count;
    (forward ? st.ab : st.ba).add(seg, options.retain_bytes);
  }
  if (out.non_tcp.ipv6) {
    out.warnings.push_back(std::to_string(out.non_tcp.ipv6) + " IPv6 packets not analysed");
  }
  for (auto& [key, st] : flows) {
    TcpFlow& f = st.flow;
    f.bytes_a_to_b = st.ab.unique;
    f.bytes_b_to_a = st.ba.unique;
    f.stream_a_to_b = std::move(st.ab.stream);
    f.stream_b_to_a = std::move(st.ba.stream);
    f.unjoined_a_to_b = st.ab.unjoined();
    f.unjoined_b_to_a = st.ba.unjoined();
    if (f.unjoined_a_to_b || f.unjoined_b_to_a || st.ab.dropped || st.ba.dropped) {
      out.warnings.push_back(to_string(f.a) + " <-> " + to_string(f.b) +
                             ": out-of-order data beyond a gap was not reassembled");
    }
    out.flows.push_back(std::move(f));
  }
  return out;
}

std::string_view to_string(Negotiated n) {
  switch (n) {
    case Negotiated::Tls12: return "TLS1_2";
    case Negotiated::Tls13: return "TLS1_3";
    case Negotiated::Other: return "other";
    case Negotiated::Incomplete: return "incomplete";
  }
  return "unknown";
}

TlsObservation extract_tls(const TcpFlow& flow) {
  const auto ab = handshake_bytes(flow.stream_a_to_b);
  const auto ba = handshake_bytes(flow.stream_b_to_a);
  if (!ab && !ba) throw NotTls(to_string(flow.a) + " <-> " + to_string(flow.b) + ": no TLS record header");

  const Hello ch_ab = ab ? find_hello(*ab, 1) : Hello{};
  const Hello ch_ba = ba ? find_hello(*ba, 1) : Hello{};
  bool client_is_a = true;
  if (ch_ab.present) {
    client_is_a = true;
  } else if (ch_ba.present) {
    client_is_a = false;
  } else if (ab && find_hello(*ab, 2).present) {
    client_is_a = false;  // only the server side was captured
  }
  const Hello& ch = client_is_a ? ch_ab : ch_ba;
  const auto& server_hs = client_is_a ? ba : ab;
  const Hello sh = server_hs ? find_hello(*server_hs, 2) : Hello{};

  TlsObservation obs;
  obs.client = client_is_a ? flow.a : flow.b;
  obs.server = client_is_a ? flow.b : flow.a;
  if (ch.present) {
    obs.sni = ch.sni;
    obs.client_legacy_version = ch.version;
    obs.client_supported_versions = ch.supported_versions;
  }
  if (sh.present) {
    obs.server_version = sh.version;
    obs.server_supported_versions = sh.supported_versions;
    obs.cipher_suite = sh.cipher;
  }
  if (!ch.present || !sh.present) {
    obs.negotiated = Negotiated::Incomplete;
  } else if (sh.supported_versions &&
             std::find(sh.supported_versions->begin(), sh.supported_versions->end(), 0x0304) !=
                 sh.supported_versions->end()) {
    obs.negotiated = Negotiated::Tls13;
  } else if (sh.version == 0x0303) {
    obs.negotiated = Negotiated::Tls12;
  } else {
    obs.negotiated = Negotiated::Other;
  }
  return obs;
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::AppToCloud: return "app_to_cloud";
    case Role::DeviceToCloud: return "device_to_cloud";
    case Role::Local: return "local";
    case Role::Other: return "other";
  }
  return "unknown";
}

std::string_view to_string(Basis b) {
  switch (b) {
    case Basis::SniMatch: return "sni_match";
    case Basis::IpMatch: return "ip_match";
    case Basis::None: return "none";
  }
  return "unknown";
}

bool host_matches(std::string_view host, std::string_view suffix) {
  const std::string h = lower(host), s = lower(suffix);
  if (s.empty()) return false;
  if (h == s) return true;
  return h.size() > s.size() && h.ends_with(s) && h[h.size() - s.size() - 1] == '.';
}

FlowRole classify_role(const TcpFlow& flow, const std::optional<TlsObservation>& obs,
                       const TriageConfig& config) {
  auto ip_of = [](const std::optional<std::string>& s) -> std::optional<std::uint32_t> {
    if (!s) return std::nullopt;
    try {
      return parse_ipv4(*s);
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };
  const auto device = ip_of(config.device_ip);
  const auto app = ip_of(config.app_ip);
  const std::uint32_t a = flow.a.ip, b = flow.b.ip;
  auto involves = [&](const std::optional<std::uint32_t>& ip) { return ip && (a == *ip || b == *ip); };
  auto other_end = [&](std::uint32_t ip) { return a == ip ? b : a; };

  const bool both_private = is_rfc1918(ipv4_to_string(a)) && is_rfc1918(ipv4_to_string(b));
  if (both_private && device && app && involves(device) && involves(app)) {
    return {Role::Local, Basis::IpMatch};
  }

  const auto party = [&]() -> std::optional<Role> {
    if (involves(device)) return Role::DeviceToCloud;
    if (involves(app)) return Role::AppToCloud;
    return std::nullopt;
  }();
  if (!party) return {};

  if (obs && obs->sni) {
    for (const auto& s : config.cloud_suffixes) {
      if (host_matches(*obs->sni, s)) return {*party, Basis::SniMatch};
    }
    return {};
  }
  // No SNI: the known endpoint talking to a public address.
  const std::uint32_t self = *party == Role::DeviceToCloud ? *device : *app;
  if (!is_rfc1918(ipv4_to_string(other_end(self)))) return {*party, Basis::IpMatch};
  return {};
}

CaptureSummary summarize_capture(std::string_view bytes, const TriageConfig& config,
                                 const FlowOptions& options) {
  const CaptureFile file = parse_capture(bytes);
  FlowSet set = assemble_flows(file.records, options);
  CaptureSummary s;
  s.total_records = file.records.size();
  s.non_tcp = set.non_tcp;
  s.warnings = file.warnings;
  s.warnings.insert(s.warnings.end(), set.warnings.begin(), set.warnings.end());
  std::set<std::string> hosts;
  for (const auto& f : set.flows) {
    FlowReport r;
    r.a = f.a;
    r.b = f.b;
    r.packets = f.packet_count;
    r.bytes_a_to_b = f.bytes_a_to_b;
    r.bytes_b_to_a = f.bytes_b_to_a;
    const auto& ports = config.tls_ports;
    const bool tls_port = std::find(ports.begin(), ports.end(), f.a.port) != ports.end() ||
                          std::find(ports.begin(), ports.end(), f.b.port) != ports.end();
    if (tls_port && (!f.stream_a_to_b.empty() || !f.stream_b_to_a.empty())) {
      try {
        r.tls = extract_tls(f);
        if (r.tls->sni) hosts.insert(*r.tls->sni);
        ++s.by_version[std::string(to_string(r.tls->negotiated))];
      } catch (const NotTls& e) {
        r.tls_error = e.what();
      }
    }
    r.role = classify_role(f, r.tls, config);
    ++s.by_role_version[role_version_key(r)];
    s.flows.push_back(std::move(r));
  }
  s.sni_hosts.assign(hosts.begin(), hosts.end());
  return s;
}

CaptureSummary summarize_capture_file(const std::string& path, const TriageConfig& config,
                                      const FlowOptions& options) {
  return summarize_capture(read_file(path), config, options);
}

json to_json(const TlsObservation& obs) {
  auto hex16 = [](std::uint16_t v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04x", v);
    return std::string(buf);
  };
  auto list = [&](const std::optional<std::vector<std::uint16_t>>& v) -> json {
    if (!v) return nullptr;
    json out = json::array();
    for (auto x : *v) out.push_back(hex16(x));
    return out;
  };
  json j{{"client", to_string(obs.client)},
         {"server", to_string(obs.server)},
         {"negotiated", to_string(obs.negotiated)},
         {"client_supported_versions", list(obs.client_supported_versions)},
         {"server_supported_versions", list(obs.server_supported_versions)}};
  j["sni"] = obs.sni ? json(printable(*obs.sni)) : json(nullptr);
  j["client_legacy_version"] = obs.client_legacy_version ? json(hex16(*obs.client_legacy_version)) : json(nullptr);
  j["server_version"] = obs.server_version ? json(hex16(*obs.server_version)) : json(nullptr);
  j["cipher_suite"] = obs.cipher_suite ? json(hex16(*obs.cipher_suite)) : json(nullptr);
  return j;
}

json to_json(const CaptureSummary& s) {
  json flows = json::array();
  for (const auto& f : s.flows) {
    json j{{"a", to_string(f.a)},
           {"b", to_string(f.b)},
           {"packets", f.packets},
           {"bytes_a_to_b", f.bytes_a_to_b},
           {"bytes_b_to_a", f.bytes_b_to_a},
           {"role", to_string(f.role.role)},
           {"basis", to_string(f.role.basis)}};
    j["tls"] = f.tls ? to_json(*f.tls) : json(nullptr);
    if (f.tls_error) j["tls_error"] = *f.tls_error;
    flows.push_back(std::move(j));
  }
  json hosts = json::array();
  for (const auto& h : s.sni_hosts) hosts.push_back(printable(h));
  return {{"total_records", s.total_records},
          {"flows", std::move(flows)},
          {"non_tcp",
           {{"udp", s.non_tcp.udp},
            {"ipv6", s.non_tcp.ipv6},
            {"other_ipv4", s.non_tcp.other_ipv4},
            {"non_ip", s.non_tcp.non_ip},
            {"malformed", s.non_tcp.malformed}}},
          {"by_version", s.by_version},
          {"by_role_version", s.by_role_version},
          {"sni_hosts", std::move(hosts)},
          {"warnings", s.warnings}};
}

}  // namespace ghf::pcap
