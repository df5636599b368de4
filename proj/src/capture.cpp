#include "ntpowd/capture.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ntpowd {

namespace {

constexpr std::uint32_t kMagicUs = 0xa1b2c3d4;
constexpr std::uint32_t kMagicUsSwap = 0xd4c3b2a1;
constexpr std::uint32_t kMagicNs = 0xa1b23c4d;
constexpr std::uint32_t kMagicNsSwap = 0x4d3cb2a1;

constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRawIp = 101;
constexpr std::uint32_t kLinkSll = 113;

std::uint32_t swap32(std::uint32_t v) { return __builtin_bswap32(v); }
std::uint16_t swap16(std::uint16_t v) { return __builtin_bswap16(v); }

struct ByteCursor {
  const std::uint8_t* p;
  std::size_t len;
  bool have(std::size_t n) const { return len >= n; }
  std::uint16_t be16(std::size_t off) const {
    return static_cast<std::uint16_t>((p[off] << 8) | p[off + 1]);
  }
};

// Parses one link-layer frame into a CaptureRecord if it is UDP port 123.
// Returns true when a record was produced.
bool parse_frame(std::uint32_t linktype, const std::uint8_t* data, std::size_t len,
                 TimeSpec ts, CaptureRecord& out) {
  std::size_t off = 0;
  int ethertype = -1;

  switch (linktype) {
    case kLinkEthernet: {
      if (len < 14) return false;
      ethertype = (data[12] << 8) | data[13];
      off = 14;
      while ((ethertype == 0x8100 || ethertype == 0x88a8) && len >= off + 4) {
        ethertype = (data[off + 2] << 8) | data[off + 3];
        off += 4;
      }
      break;
    }
    case kLinkSll: {
      if (len < 16) return false;
      ethertype = (data[14] << 8) | data[15];
      off = 16;
      break;
    }
    case kLinkRawIp: {
      if (len < 1) return false;
      ethertype = ((data[0] >> 4) == 4) ? 0x0800 : 0x86dd;
      off = 0;
      break;
    }
    default:
      return false;
  }

  const std::uint8_t* ip = data + off;
  std::size_t iplen = len - off;
  IpAddress src, dst;
  std::size_t udp_off = 0;

  if (ethertype == 0x0800) {
    if (iplen < 20) return false;
    if ((ip[0] >> 4) != 4) return false;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || iplen < ihl) return false;
    const std::uint16_t fragword = static_cast<std::uint16_t>((ip[6] << 8) | ip[7]);
    if ((fragword & 0x2000) != 0 || (fragword & 0x1fff) != 0) return false;  // fragment
    if (ip[9] != 17) return false;                                           // not UDP
    const std::size_t total = static_cast<std::size_t>((ip[2] << 8) | ip[3]);
    if (total >= 20 && total < iplen) iplen = total;
    src = IpAddress::v4(ip[12], ip[13], ip[14], ip[15]);
    dst = IpAddress::v4(ip[16], ip[17], ip[18], ip[19]);
    udp_off = ihl;
  } else if (ethertype == 0x86dd) {
    if (iplen < 40) return false;
    if ((ip[0] >> 4) != 6) return false;
    std::uint8_t next = ip[6];
    std::size_t hoff = 40;
    // walk hop-by-hop / destination options; a fragment header means fragment
    while (next == 0 || next == 60) {
      if (iplen < hoff + 8) return false;
      const std::uint8_t nn = ip[hoff];
      const std::size_t hl = 8u + 8u * ip[hoff + 1];
      hoff += hl;
      next = nn;
    }
    if (next == 44) return false;  // fragment
    if (next != 17) return false;
    std::array<std::uint8_t, 16> s{}, d{};
    std::memcpy(s.data(), ip + 8, 16);
    std::memcpy(d.data(), ip + 24, 16);
    src = IpAddress::v6(s);
    dst = IpAddress::v6(d);
    udp_off = hoff;
  } else {
    return false;
  }

  if (iplen < udp_off + 8) return false;
  const std::uint8_t* udp = ip + udp_off;
  const std::uint16_t sport = static_cast<std::uint16_t>((udp[0] << 8) | udp[1]);
  const std::uint16_t dport = static_cast<std::uint16_t>((udp[2] << 8) | udp[3]);
  if (sport != 123 && dport != 123) return false;
  std::size_t udplen = static_cast<std::size_t>((udp[4] << 8) | udp[5]);
  if (udplen < 8) return false;
  if (udplen > iplen - udp_off) udplen = iplen - udp_off;

  out.ts = ts;
  out.src = src;
  out.dst = dst;
  out.sport = sport;
  out.dport = dport;
  out.payload.assign(udp + 8, udp + udplen);
  return true;
}

ReadStats read_pcap(const std::vector<std::uint8_t>& buf,
                    const std::function<void(CaptureRecord&&)>& sink) {
  ReadStats stats;
  if (buf.size() < 24) throw BadMagic("pcap shorter than its global header");

  std::uint32_t magic;
  std::memcpy(&magic, buf.data(), 4);
  bool swapped = false, nanos = false;
  if (magic == kMagicUs) {
  } else if (magic == kMagicUsSwap) {
    swapped = true;
  } else if (magic == kMagicNs) {
    nanos = true;
  } else if (magic == kMagicNsSwap) {
    swapped = true;
    nanos = true;
  } else {
    throw BadMagic("unrecognized pcap magic");
  }

  auto rd32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + off, 4);
    return swapped ? swap32(v) : v;
  };

  const std::uint32_t linktype = rd32(20);
  std::size_t pos = 24;
  while (pos + 16 <= buf.size()) {
    const std::uint32_t ts_sec = rd32(pos);
    const std::uint32_t ts_frac = rd32(pos + 4);
    const std::uint32_t incl = rd32(pos + 8);
    pos += 16;
    if (incl > buf.size() - pos) {
      stats.truncated = true;
      return stats;
    }
    TimeSpec ts{static_cast<std::int64_t>(ts_sec),
                nanos ? ts_frac : ts_frac * 1000u};
    CaptureRecord rec;
    if (parse_frame(linktype, buf.data() + pos, incl, ts, rec)) {
      ++stats.yielded;
      sink(std::move(rec));
    } else {
      ++stats.skipped;
    }
    pos += incl;
  }
  if (pos != buf.size()) stats.truncated = true;
  return stats;
}

std::vector<std::uint8_t> hex_decode(const std::string& hex) {
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    const int hi = nib(hex[i]), lo = nib(hex[i + 1]);
    if (hi < 0 || lo < 0) throw std::runtime_error("bad hex in payload_hex");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string hex_encode(const std::vector<std::uint8_t>& data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

ReadStats read_jsonl(const std::string& path,
                     const std::function<void(CaptureRecord&&)>& sink) {
  ReadStats stats;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CaptureRecord rec;
      rec.ts.sec = j.at("ts_sec").get<std::int64_t>();
      rec.ts.nsec = j.at("ts_nsec").get<std::uint32_t>();
      auto src = IpAddress::parse(j.at("src").get<std::string>());
      auto dst = IpAddress::parse(j.at("dst").get<std::string>());
      if (!src || !dst) throw std::runtime_error("bad address");
      rec.src = *src;
      rec.dst = *dst;
      rec.sport = j.at("sport").get<std::uint16_t>();
      rec.dport = j.at("dport").get<std::uint16_t>();
      rec.payload = hex_decode(j.at("payload_hex").get<std::string>());
      if (rec.sport != 123 && rec.dport != 123) {
        ++stats.skipped;
        continue;
      }
      ++stats.yielded;
      sink(std::move(rec));
    } catch (const std::exception&) {
      stats.truncated = true;
      return stats;
    }
  }
  return stats;
}

void udp_checksum_v6(std::uint8_t* ip6_hdr, std::uint8_t* udp, std::size_t udplen) {
  std::uint64_t sum = 0;
  auto add16 = [&](std::uint16_t v) { sum += v; };
  for (int i = 0; i < 32; i += 2)
    add16(static_cast<std::uint16_t>((ip6_hdr[8 + i] << 8) | ip6_hdr[8 + i + 1]));
  add16(static_cast<std::uint16_t>(udplen >> 16));
  add16(static_cast<std::uint16_t>(udplen & 0xffff));
  add16(17);
  udp[6] = udp[7] = 0;
  for (std::size_t i = 0; i + 1 < udplen; i += 2)
    add16(static_cast<std::uint16_t>((udp[i] << 8) | udp[i + 1]));
  if (udplen & 1) add16(static_cast<std::uint16_t>(udp[udplen - 1] << 8));
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  std::uint16_t ck = static_cast<std::uint16_t>(~sum);
  if (ck == 0) ck = 0xffff;
  udp[6] = static_cast<std::uint8_t>(ck >> 8);
  udp[7] = static_cast<std::uint8_t>(ck & 0xff);
}

}  // namespace

ReadStats read_capture(const std::string& path,
                       const std::function<void(CaptureRecord&&)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> head(4);
  in.read(reinterpret_cast<char*>(head.data()), 4);
  const auto got = in.gcount();
  if (got == 4) {
    std::uint32_t magic;
    std::memcpy(&magic, head.data(), 4);
    if (magic == kMagicUs || magic == kMagicUsSwap || magic == kMagicNs ||
        magic == kMagicNsSwap) {
      in.seekg(0);
      std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
      return read_pcap(buf, sink);
    }
  }
  in.close();
  // not pcap: must start like a JSONL object
  std::ifstream probe(path);
  std::string first;
  while (std::getline(probe, first) && first.empty()) {
  }
  if (first.empty() && probe.eof()) return ReadStats{};  // empty trace
  if (first.empty() || first[0] != '{')
    throw BadMagic("neither pcap magic nor JSONL trace");
  return read_jsonl(path, sink);
}

std::vector<CaptureRecord> read_capture_all(const std::string& path, ReadStats* stats) {
  std::vector<CaptureRecord> out;
  ReadStats s = read_capture(path, [&](CaptureRecord&& r) { out.push_back(std::move(r)); });
  if (stats) *stats = s;
  return out;
}

struct PcapWriter::Impl {
  std::ofstream out;
};

PcapWriter::PcapWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw std::runtime_error("cannot open " + path + " for writing");
  std::uint8_t hdr[24] = {};
  const std::uint32_t magic = kMagicUs;
  std::memcpy(hdr, &magic, 4);
  hdr[4] = 2;  // version 2.4, native endianness
  hdr[6] = 4;
  const std::uint32_t snaplen = 65535, link = kLinkEthernet;
  std::memcpy(hdr + 16, &snaplen, 4);
  std::memcpy(hdr + 20, &link, 4);
  impl_->out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
}

PcapWriter::~PcapWriter() {
  close();
  delete impl_;
}

void PcapWriter::close() {
  if (impl_ && impl_->out.is_open()) impl_->out.close();
}

void PcapWriter::write(const CaptureRecord& rec) {
  std::vector<std::uint8_t> frame;
  const bool v4 = rec.src.kind == IpAddress::Kind::V4;
  const std::size_t udplen = 8 + rec.payload.size();

  frame.resize(14);
  for (int i = 0; i < 6; ++i) frame[i] = 0x02;        // dst mac
  for (int i = 6; i < 12; ++i) frame[i] = 0x04;       // src mac
  frame[12] = v4 ? 0x08 : 0x86;
  frame[13] = v4 ? 0x00 : 0xdd;

  if (v4) {
    std::uint8_t ip[20] = {};
    const std::size_t total = 20 + udplen;
    ip[0] = 0x45;
    ip[2] = static_cast<std::uint8_t>(total >> 8);
    ip[3] = static_cast<std::uint8_t>(total & 0xff);
    ip[6] = 0x40;  // DF
    ip[8] = 64;
    ip[9] = 17;
    std::memcpy(ip + 12, rec.src.bytes.data(), 4);
    std::memcpy(ip + 16, rec.dst.bytes.data(), 4);
    std::uint32_t sum = 0;
    for (int i = 0; i < 20; i += 2) sum += static_cast<std::uint32_t>((ip[i] << 8) | ip[i + 1]);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    const std::uint16_t ck = static_cast<std::uint16_t>(~sum);
    ip[10] = static_cast<std::uint8_t>(ck >> 8);
    ip[11] = static_cast<std::uint8_t>(ck & 0xff);
    frame.insert(frame.end(), ip, ip + 20);
  } else {
    std::uint8_t ip[40] = {};
    ip[0] = 0x60;
    ip[4] = static_cast<std::uint8_t>(udplen >> 8);
    ip[5] = static_cast<std::uint8_t>(udplen & 0xff);
    ip[6] = 17;
    ip[7] = 64;
    std::memcpy(ip + 8, rec.src.bytes.data(), 16);
    std::memcpy(ip + 24, rec.dst.bytes.data(), 16);
    frame.insert(frame.end(), ip, ip + 40);
  }

  std::vector<std::uint8_t> udp(udplen);
  udp[0] = static_cast<std::uint8_t>(rec.sport >> 8);
  udp[1] = static_cast<std::uint8_t>(rec.sport & 0xff);
  udp[2] = static_cast<std::uint8_t>(rec.dport >> 8);
  udp[3] = static_cast<std::uint8_t>(rec.dport & 0xff);
  udp[4] = static_cast<std::uint8_t>(udplen >> 8);
  udp[5] = static_cast<std::uint8_t>(udplen & 0xff);
  std::memcpy(udp.data() + 8, rec.payload.data(), rec.payload.size());
  if (!v4) {
    // v6 demands a real UDP checksum; compute against the header we just built
    udp_checksum_v6(frame.data() + 14, udp.data(), udplen);
  }
  frame.insert(frame.end(), udp.begin(), udp.end());

  std::uint8_t rh[16];
  const std::uint32_t sec = static_cast<std::uint32_t>(rec.ts.sec);
  const std::uint32_t usec = rec.ts.nsec / 1000u;
  const std::uint32_t incl = static_cast<std::uint32_t>(frame.size());
  std::memcpy(rh + 0, &sec, 4);
  std::memcpy(rh + 4, &usec, 4);
  std::memcpy(rh + 8, &incl, 4);
  std::memcpy(rh + 12, &incl, 4);
  impl_->out.write(reinterpret_cast<const char*>(rh), sizeof rh);
  impl_->out.write(reinterpret_cast<const char*>(frame.data()),
                   static_cast<std::streamsize>(frame.size()));
}

struct JsonlWriter::Impl {
  std::ofstream out;
};

JsonlWriter::JsonlWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::trunc);
  if (!impl_->out) throw std::runtime_error("cannot open " + path + " for writing");
}

JsonlWriter::~JsonlWriter() {
  close();
  delete impl_;
}

void JsonlWriter::close() {
  if (impl_ && impl_->out.is_open()) impl_->out.close();
}

void JsonlWriter::write(const CaptureRecord& rec) {
  nlohmann::json j{{"ts_sec", rec.ts.sec},   {"ts_nsec", rec.ts.nsec},
                   {"src", rec.src.to_string()}, {"dst", rec.dst.to_string()},
                   {"sport", rec.sport},     {"dport", rec.dport},
                   {"payload_hex", hex_encode(rec.payload)}};
  impl_->out << j.dump() << '\n';
}

}  // namespace ntpowd
