#pragma once
// NTP wire format: 48-byte header, 32.32 fixed-point timestamps.
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ntpowd/net.hpp"

namespace ntpowd {

inline constexpr std::uint64_t kNtpUnixOffset = 2208988800ull;  // 1900-01-01 -> 1970-01-01
// Seconds values below this are read as NTP era 1 (post-2036). Half the
// 1900->1970 offset: traces this side of 2004 never produce such values in era 0.
inline constexpr std::uint32_t kDefaultEraPivot = 1104494400u;

// Capture-clock instant, Unix epoch.
struct TimeSpec {
  std::int64_t sec{0};
  std::uint32_t nsec{0};
  friend auto operator<=>(const TimeSpec&, const TimeSpec&) = default;
};

struct NtpTimestamp {
  std::uint32_t seconds{0};   // since 1900, era 0
  std::uint32_t fraction{0};  // units of 2^-32 s

  bool unset() const { return seconds == 0 && fraction == 0; }
  std::uint64_t raw() const { return (std::uint64_t{seconds} << 32) | fraction; }
  static NtpTimestamp from_raw(std::uint64_t r) {
    return {static_cast<std::uint32_t>(r >> 32), static_cast<std::uint32_t>(r)};
  }
  // Capture clock -> NTP, fraction rounded to nearest.
  static NtpTimestamp from_unix(TimeSpec t);
  // Seconds-since-1900 including the era disambiguation; exact (64-bit mantissa).
  long double to_seconds(std::uint32_t era_pivot = kDefaultEraPivot) const;

  friend bool operator==(const NtpTimestamp&, const NtpTimestamp&) = default;
};

// Signed a-b in seconds. Modulo-2^64 arithmetic keeps the difference correct
// across the 2036 era boundary for |a-b| < 2^31 s, no pivot needed.
double ntp_diff_seconds(NtpTimestamp a, NtpTimestamp b);

double fixed_16_16_to_seconds(std::int32_t raw);
std::int32_t seconds_to_fixed_16_16(double seconds);  // round to nearest
// Smallest 16.16 value strictly greater than `seconds`; used when an encoded
// bound must still dominate after re-decoding.
std::int32_t seconds_to_fixed_16_16_ceil_plus(double seconds);

struct TruncatedPacket : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedVersion : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FieldOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NtpPacket {
  std::uint8_t leap{0};     // 0..3
  std::uint8_t version{4};  // 1..4 accepted
  std::uint8_t mode{3};     // 3 = client request, 4 = server response
  std::uint8_t stratum{0};
  std::int8_t poll_exponent{0};
  std::int8_t precision{0};
  std::int32_t root_delay{0};         // signed 16.16 s
  std::uint32_t root_dispersion{0};   // unsigned 16.16 s
  std::array<std::uint8_t, 4> ref_id{};
  NtpTimestamp reference_ts, origin_ts, receive_ts, transmit_ts;

  // capture metadata (not on the wire)
  TimeSpec capture_ts;
  IpAddress src_addr, dst_addr;
  std::uint16_t src_port{0}, dst_port{0};

  friend bool operator==(const NtpPacket&, const NtpPacket&) = default;
};

struct CaptureRecord {
  TimeSpec ts;
  IpAddress src, dst;
  std::uint16_t sport{0}, dport{0};
  std::vector<std::uint8_t> payload;
};

// Decodes the first 48 bytes; extension fields and MACs beyond are ignored.
NtpPacket decode_packet(std::span<const std::uint8_t> payload, const CaptureRecord& meta);
std::array<std::uint8_t, 48> encode_packet(const NtpPacket& p);

}  // namespace ntpowd
