#pragma once

// Test-side capture writer and TLS handshake builder. Bytes are assembled
// field by field from the wire formats, independent of the parser.

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace pcapw {

using Bytes = std::string;

inline void put8(Bytes& b, unsigned v) { b += static_cast<char>(v & 0xff); }
inline void put16(Bytes& b, unsigned v) {
  put8(b, v >> 8);
  put8(b, v);
}
inline void put24(Bytes& b, unsigned v) {
  put8(b, v >> 16);
  put16(b, v);
}
inline void put32(Bytes& b, std::uint32_t v) {
  put16(b, v >> 16);
  put16(b, v);
}
inline void put32le(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) put8(b, v >> (8 * i));
}
inline void put16le(Bytes& b, unsigned v) {
  put8(b, v);
  put8(b, v >> 8);
}

inline std::uint32_t ip(unsigned a, unsigned b, unsigned c, unsigned d) { return a << 24 | b << 16 | c << 8 | d; }

struct Packet {
  std::uint32_t sec = 0;
  std::uint32_t usec = 0;
  Bytes frame;
  /// Extra bytes the original packet had beyond the captured frame.
  std::uint32_t cut = 0;
};

/// Classic capture file, little-endian unless big_endian.
inline Bytes capture_file(const std::vector<Packet>& packets, bool big_endian = false,
                          std::uint32_t link = 1) {
  Bytes out;
  auto w32 = [&](std::uint32_t v) { big_endian ? put32(out, v) : put32le(out, v); };
  auto w16 = [&](unsigned v) { big_endian ? put16(out, v) : put16le(out, v); };
  w32(0xa1b2c3d4);
  w16(2);
  w16(4);
  w32(0);
  w32(0);
  w32(65535);
  w32(link);
  for (const auto& p : packets) {
    w32(p.sec);
    w32(p.usec);
    w32(static_cast<std::uint32_t>(p.frame.size()));
    w32(static_cast<std::uint32_t>(p.frame.size()) + p.cut);
    out += p.frame;
  }
  return out;
}

inline Bytes ethernet(unsigned ethertype, const Bytes& payload) {
  Bytes f = Bytes("\x02\x00\x00\x00\x00\x01\x02\x00\x00\x00\x00\x02", 12);
  put16(f, ethertype);
  return f + payload;
}

inline Bytes ipv4(std::uint32_t src, std::uint32_t dst, unsigned proto, const Bytes& l4) {
  Bytes h;
  put8(h, 0x45);
  put8(h, 0);
  put16(h, static_cast<unsigned>(20 + l4.size()));
  put16(h, 0x1234);
  put16(h, 0x4000);  // DF
  put8(h, 64);
  put8(h, proto);
  put16(h, 0);  // checksum not verified by the parser
  put32(h, src);
  put32(h, dst);
  return h + l4;
}

enum Flags : unsigned { FIN = 0x01, SYN = 0x02, RST = 0x04, PSH = 0x08, ACK = 0x10 };

inline Bytes tcp(unsigned sport, unsigned dport, std::uint32_t seq, std::uint32_t ack, unsigned flags,
                 const Bytes& payload) {
  Bytes h;
  put16(h, sport);
  put16(h, dport);
  put32(h, seq);
  put32(h, ack);
  put16(h, (5u << 12) | flags);
  put16(h, 65535);
  put16(h, 0);
  put16(h, 0);
  return h + payload;
}

inline Bytes udp(unsigned sport, unsigned dport, const Bytes& payload) {
  Bytes h;
  put16(h, sport);
  put16(h, dport);
  put16(h, static_cast<unsigned>(8 + payload.size()));
  put16(h, 0);
  return h + payload;
}

inline Bytes tcp_frame(std::uint32_t src, unsigned sport, std::uint32_t dst, unsigned dport, std::uint32_t seq,
                       unsigned flags, const Bytes& payload = {}) {
  return ethernet(0x0800, ipv4(src, dst, 6, tcp(sport, dport, seq, 0, flags, payload)));
}

// --- TLS wire format ---

inline Bytes with_len16(const Bytes& body) {
  Bytes b;
  put16(b, static_cast<unsigned>(body.size()));
  return b + body;
}
inline Bytes with_len8(const Bytes& body) {
  Bytes b;
  put8(b, static_cast<unsigned>(body.size()));
  return b + body;
}

inline Bytes extension(unsigned type, const Bytes& body) {
  Bytes b;
  put16(b, type);
  return b + with_len16(body);
}

inline Bytes sni_extension(const std::string& host) {
  Bytes entry;
  put8(entry, 0);  // host_name
  entry += with_len16(host);
  return extension(0, with_len16(entry));
}

inline Bytes client_versions_extension(const std::vector<unsigned>& versions) {
  Bytes list;
  for (auto v : versions) put16(list, v);
  return extension(43, with_len8(list));
}

inline Bytes server_version_extension(unsigned v) {
  Bytes b;
  put16(b, v);
  return extension(43, b);
}

inline Bytes handshake(unsigned type, const Bytes& body) {
  Bytes b;
  put8(b, type);
  put24(b, static_cast<unsigned>(body.size()));
  return b + body;
}

inline Bytes client_hello(const std::string& sni, const std::vector<unsigned>& supported_versions) {
  Bytes body;
  put16(body, 0x0303);
  body += Bytes(32, '\x11');
  body += with_len8(Bytes(32, '\x22'));
  Bytes suites;
  for (unsigned s : {0x1301u, 0x1302u, 0xc02fu, 0xc030u}) put16(suites, s);
  body += with_len16(suites);
  body += with_len8(Bytes(1, '\0'));
  Bytes exts;
  if (!sni.empty()) exts += sni_extension(sni);
  exts += extension(10, Bytes("\x00\x02\x00\x1d", 4));
  if (!supported_versions.empty()) exts += client_versions_extension(supported_versions);
  body += with_len16(exts);
  return handshake(1, body);
}

/// selected == 0 omits supported_versions.
inline Bytes server_hello(unsigned legacy_version, unsigned selected, unsigned cipher) {
  Bytes body;
  put16(body, legacy_version);
  body += Bytes(32, '\x33');
  body += with_len8(Bytes(32, '\x22'));
  put16(body, cipher);
  put8(body, 0);
  Bytes exts = extension(0xff01, Bytes(1, '\0'));
  if (selected) exts += server_version_extension(selected);
  body += with_len16(exts);
  return handshake(2, body);
}

inline Bytes record(unsigned type, unsigned version, const Bytes& body) {
  Bytes b;
  put8(b, type);
  put16(b, version);
  return b + with_len16(body);
}

/// One TCP conversation: handshake packets, client data then server data.
struct Conversation {
  std::uint32_t client_ip;
  unsigned client_port;
  std::uint32_t server_ip;
  unsigned server_port;
  Bytes client_stream;
  Bytes server_stream;
  /// Segment size used to split each stream.
  std::size_t mss = 1400;
};

inline std::vector<Packet> packets_for(const Conversation& c, std::uint32_t start_sec) {
  std::vector<Packet> out;
  std::uint32_t t = 0;
  auto add = [&](Bytes frame) { out.push_back({start_sec, t++ * 1000, std::move(frame)}); };
  const std::uint32_t cisn = 1000, sisn = 5000;
  add(tcp_frame(c.client_ip, c.client_port, c.server_ip, c.server_port, cisn, SYN));
  add(tcp_frame(c.server_ip, c.server_port, c.client_ip, c.client_port, sisn, SYN | ACK));
  add(tcp_frame(c.client_ip, c.client_port, c.server_ip, c.server_port, cisn + 1, ACK));
  for (std::size_t off = 0; off < c.client_stream.size(); off += c.mss) {
    add(tcp_frame(c.client_ip, c.client_port, c.server_ip, c.server_port,
                  cisn + 1 + static_cast<std::uint32_t>(off), PSH | ACK, c.client_stream.substr(off, c.mss)));
  }
  for (std::size_t off = 0; off < c.server_stream.size(); off += c.mss) {
    add(tcp_frame(c.server_ip, c.server_port, c.client_ip, c.client_port,
                  sisn + 1 + static_cast<std::uint32_t>(off), PSH | ACK, c.server_stream.substr(off, c.mss)));
  }
  return out;
}

enum class Intent { Tls12, Tls13 };

/// Client and server byte streams for a handshake of the given intent. Both
/// use record-layer version 0x0303, as real TLS 1.3 stacks do.
inline std::pair<Bytes, Bytes> tls_streams(Intent intent, const std::string& sni) {
  const bool v13 = intent == Intent::Tls13;
  Bytes client = record(22, 0x0301, client_hello(sni, v13 ? std::vector<unsigned>{0x0304, 0x0303}
                                                           : std::vector<unsigned>{}));
  Bytes server = record(22, 0x0303, server_hello(0x0303, v13 ? 0x0304 : 0, v13 ? 0x1301 : 0xc02f));
  server += record(20, 0x0303, Bytes(1, '\x01'));
  server += record(23, 0x0303, Bytes(64, '\x5a'));
  client += record(23, 0x0303, Bytes(48, '\x6b'));
  return {client, server};
}

}  // namespace pcapw

namespace pcapw {

struct FlowIntent {
  std::uint32_t client_ip;
  unsigned client_port;
  std::uint32_t server_ip;
  unsigned server_port;
  /// Empty for plain (non-TLS) flows.
  std::string sni;
  bool tls = true;
  Intent version = Intent::Tls12;
  /// Expected role label: "device_to_cloud", "app_to_cloud", "local", "other".
  std::string role;
};

inline const std::uint32_t kDeviceIp = ip(192, 168, 166, 40);
inline const std::uint32_t kAppIp = ip(192, 168, 166, 11);

/// A topology like the lab setup: speaker and phone on one Wi-Fi network,
/// both talking to Google front ends, plus one local API request.
inline std::vector<FlowIntent> corpus_intents(int tls12, int tls13) {
  const std::vector<FlowIntent> v12{
      {kDeviceIp, 40001, ip(216, 58, 197, 234), 443, "googleapis.l.google.com", true, Intent::Tls12,
       "device_to_cloud"},
      {kAppIp, 40002, ip(172, 217, 25, 74), 443, "googlehomefoyer-pa.googleapis.com", true, Intent::Tls12,
       "app_to_cloud"},
      {kDeviceIp, 40003, ip(172, 217, 161, 46), 443, "clients3.google.com", true, Intent::Tls12,
       "device_to_cloud"},
      {kAppIp, 40006, ip(203, 0, 113, 9), 443, "cdn.example.net", true, Intent::Tls12, "other"},
  };
  const std::vector<FlowIntent> v13{
      {kAppIp, 40004, ip(216, 58, 220, 138), 443, "www.googleapis.com", true, Intent::Tls13, "app_to_cloud"},
      {kDeviceIp, 40005, ip(172, 217, 31, 238), 8443, "tools.l.google.com", true, Intent::Tls13,
       "device_to_cloud"},
      {kDeviceIp, 40007, ip(216, 58, 197, 238), 443, "", true, Intent::Tls13, "device_to_cloud"},
  };
  std::vector<FlowIntent> out(v12.begin(), v12.begin() + tls12);
  out.insert(out.end(), v13.begin(), v13.begin() + tls13);
  out.push_back({kAppIp, 40100, kDeviceIp, 8008, "", false, Intent::Tls12, "local"});
  return out;
}

struct Corpus {
  std::vector<Packet> packets;
  std::vector<FlowIntent> intents;
  std::size_t non_tcp = 0;
};

inline Corpus build_corpus(int tls12, int tls13) {
  Corpus c;
  c.intents = corpus_intents(tls12, tls13);
  std::uint32_t sec = 1554108000;
  for (const auto& f : c.intents) {
    Conversation conv{f.client_ip, f.client_port, f.server_ip, f.server_port, {}, {}};
    if (f.tls) {
      std::tie(conv.client_stream, conv.server_stream) = tls_streams(f.version, f.sni);
    } else {
      conv.client_stream = "GET /setup/eureka_info HTTP/1.1\r\nHost: 192.168.166.40:8008\r\n\r\n";
      conv.server_stream = "HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\n{}";
    }
    for (auto& p : packets_for(conv, sec++)) c.packets.push_back(std::move(p));
  }
  // mDNS query and an ARP frame: counted, not flow-tracked.
  c.packets.push_back({sec, 0, ethernet(0x0800, ipv4(kAppIp, ip(224, 0, 0, 251), 17, udp(5353, 5353, Bytes(12, '\0'))))});
  c.packets.push_back({sec, 1, ethernet(0x0806, Bytes(28, '\x01'))});
  c.non_tcp = 2;
  return c;
}

}  // namespace pcapw
