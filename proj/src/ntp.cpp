#include "ntpowd/ntp.hpp"

#include <cmath>

namespace ntpowd {

namespace {

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void put_be32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

NtpTimestamp ts_at(const std::uint8_t* p) {
  return NtpTimestamp{be32(p), be32(p + 4)};
}

}  // namespace

NtpTimestamp NtpTimestamp::from_unix(TimeSpec t) {
  const auto sec = static_cast<std::uint32_t>(
      static_cast<std::uint64_t>(t.sec) + kNtpUnixOffset);
  // nsec -> 2^-32 units, round to nearest: (nsec * 2^32 + 5e8) / 1e9
  const auto frac64 =
      ((static_cast<std::uint64_t>(t.nsec) << 32) + 500000000ull) / 1000000000ull;
  if (frac64 >= (1ull << 32))  // nsec == 999999999.. rounds up into the next second
    return NtpTimestamp{sec + 1, 0};
  return NtpTimestamp{sec, static_cast<std::uint32_t>(frac64)};
}

long double NtpTimestamp::to_seconds(std::uint32_t era_pivot) const {
  const long double era = (seconds < era_pivot) ? 4294967296.0L : 0.0L;
  return era + static_cast<long double>(seconds) +
         static_cast<long double>(fraction) / 4294967296.0L;
}

double ntp_diff_seconds(NtpTimestamp a, NtpTimestamp b) {
  const auto diff = static_cast<std::int64_t>(a.raw() - b.raw());
  return static_cast<double>(diff) / 4294967296.0;
}

double fixed_16_16_to_seconds(std::int32_t raw) {
  return static_cast<double>(raw) / 65536.0;
}

std::int32_t seconds_to_fixed_16_16(double seconds) {
  const double scaled = seconds * 65536.0;
  if (!(scaled >= -2147483648.0 && scaled < 2147483647.5))
    throw FieldOutOfRange("16.16 value out of range");
  return static_cast<std::int32_t>(std::llround(scaled));
}

std::int32_t seconds_to_fixed_16_16_ceil_plus(double seconds) {
  const double scaled = seconds * 65536.0;
  if (!(scaled >= -2147483648.0 && scaled < 2147483646.0))
    throw FieldOutOfRange("16.16 value out of range");
  auto v = static_cast<std::int64_t>(std::ceil(scaled));
  if (static_cast<double>(v) <= scaled) ++v;
  return static_cast<std::int32_t>(v);
}

NtpPacket decode_packet(std::span<const std::uint8_t> payload, const CaptureRecord& meta) {
  if (payload.size() < 48) throw TruncatedPacket("payload shorter than 48 bytes");
  const std::uint8_t* p = payload.data();

  NtpPacket out;
  out.leap = static_cast<std::uint8_t>(p[0] >> 6);
  out.version = static_cast<std::uint8_t>((p[0] >> 3) & 0x07);
  out.mode = static_cast<std::uint8_t>(p[0] & 0x07);
  if (out.version == 0 || out.version > 4)
    throw UnsupportedVersion("NTP version " + std::to_string(out.version));
  out.stratum = p[1];
  out.poll_exponent = static_cast<std::int8_t>(p[2]);
  out.precision = static_cast<std::int8_t>(p[3]);
  out.root_delay = static_cast<std::int32_t>(be32(p + 4));
  out.root_dispersion = be32(p + 8);
  out.ref_id = {p[12], p[13], p[14], p[15]};
  out.reference_ts = ts_at(p + 16);
  out.origin_ts = ts_at(p + 24);
  out.receive_ts = ts_at(p + 32);
  out.transmit_ts = ts_at(p + 40);

  out.capture_ts = meta.ts;
  out.src_addr = meta.src;
  out.dst_addr = meta.dst;
  out.src_port = meta.sport;
  out.dst_port = meta.dport;
  return out;
}

std::array<std::uint8_t, 48> encode_packet(const NtpPacket& p) {
  if (p.leap > 3) throw FieldOutOfRange("leap > 3");
  if (p.version == 0 || p.version > 4) throw FieldOutOfRange("version not in 1..4");
  if (p.mode > 7) throw FieldOutOfRange("mode > 7");

  std::array<std::uint8_t, 48> out{};
  out[0] = static_cast<std::uint8_t>((p.leap << 6) | (p.version << 3) | p.mode);
  out[1] = p.stratum;
  out[2] = static_cast<std::uint8_t>(p.poll_exponent);
  out[3] = static_cast<std::uint8_t>(p.precision);
  put_be32(out.data() + 4, static_cast<std::uint32_t>(p.root_delay));
  put_be32(out.data() + 8, p.root_dispersion);
  out[12] = p.ref_id[0];
  out[13] = p.ref_id[1];
  out[14] = p.ref_id[2];
  out[15] = p.ref_id[3];
  put_be32(out.data() + 16, p.reference_ts.seconds);
  put_be32(out.data() + 20, p.reference_ts.fraction);
  put_be32(out.data() + 24, p.origin_ts.seconds);
  put_be32(out.data() + 28, p.origin_ts.fraction);
  put_be32(out.data() + 32, p.receive_ts.seconds);
  put_be32(out.data() + 36, p.receive_ts.fraction);
  put_be32(out.data() + 40, p.transmit_ts.seconds);
  put_be32(out.data() + 44, p.transmit_ts.fraction);
  return out;
}

}  // namespace ntpowd
