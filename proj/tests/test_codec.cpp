#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ntpowd/ntp.hpp"

using namespace ntpowd;

namespace {

NtpPacket random_packet(std::mt19937_64& rng) {
  NtpPacket p;
  p.leap = static_cast<std::uint8_t>(rng() % 4);
  p.version = static_cast<std::uint8_t>(1 + rng() % 4);
  p.mode = static_cast<std::uint8_t>(rng() % 8);
  p.stratum = static_cast<std::uint8_t>(rng());
  p.poll_exponent = static_cast<std::int8_t>(rng());
  p.precision = static_cast<std::int8_t>(rng());
  p.root_delay = static_cast<std::int32_t>(rng());
  p.root_dispersion = static_cast<std::uint32_t>(rng());
  for (auto& b : p.ref_id) b = static_cast<std::uint8_t>(rng());
  p.reference_ts = NtpTimestamp::from_raw(rng());
  p.origin_ts = NtpTimestamp::from_raw(rng());
  p.receive_ts = NtpTimestamp::from_raw(rng());
  p.transmit_ts = NtpTimestamp::from_raw(rng());
  return p;
}

}  // namespace

TEST_CASE("zeroed SNTP request decodes to unset fields") {
  std::array<std::uint8_t, 48> buf{};
  buf[0] = 0x23;  // LI 0, VN 4, mode 3
  auto p = decode_packet(buf, CaptureRecord{});
  CHECK(p.leap == 0);
  CHECK(p.version == 4);
  CHECK(p.mode == 3);
  CHECK(p.stratum == 0);
  CHECK(p.origin_ts.unset());
  CHECK(p.receive_ts.unset());
  CHECK(p.transmit_ts.unset());
  CHECK(p.reference_ts.unset());

  auto wire = encode_packet(p);
  CHECK(wire[0] == 0x23);
  for (std::size_t i = 1; i < wire.size(); ++i) CHECK(wire[i] == 0);
}

TEST_CASE("16.16 fixed point") {
  CHECK(fixed_16_16_to_seconds(0x00010000) == 1.0);
  CHECK(fixed_16_16_to_seconds(0x00008000) == 0.5);
  CHECK(fixed_16_16_to_seconds(static_cast<std::int32_t>(0xFFFF0000)) == -1.0);
  CHECK(seconds_to_fixed_16_16(1.0) == 0x00010000);
  CHECK(seconds_to_fixed_16_16(0.015625) == 0x0400);

  std::array<std::uint8_t, 48> buf{};
  buf[0] = 0x23;
  auto p = decode_packet(buf, CaptureRecord{});
  p.poll_exponent = 6;
  p.root_delay = seconds_to_fixed_16_16(0.015625);
  auto wire = encode_packet(p);
  CHECK(wire[4] == 0x00);
  CHECK(wire[5] == 0x00);
  CHECK(wire[6] == 0x04);
  CHECK(wire[7] == 0x00);
}

TEST_CASE("ceil-plus encoding dominates after re-decode") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    double s = static_cast<double>(rng() % 2000000) / 7919.0 * 1e-3;
    auto enc = seconds_to_fixed_16_16_ceil_plus(s);
    CHECK(fixed_16_16_to_seconds(enc) > s);
    CHECK(fixed_16_16_to_seconds(enc) <= s + 2.0 / 65536.0 + 1e-12);
  }
}

TEST_CASE("epoch constant") {
  NtpTimestamp t{0x83AA7E80u, 0};
  CHECK(t.seconds == 2208988800u);
  CHECK(static_cast<double>(t.to_seconds()) == 2208988800.0);
  // Unix epoch maps onto exactly that value.
  auto u = NtpTimestamp::from_unix(TimeSpec{0, 0});
  CHECK(u.seconds == 0x83AA7E80u);
  CHECK(u.fraction == 0);
}

TEST_CASE("from_unix fraction rounding") {
  auto half = NtpTimestamp::from_unix(TimeSpec{0, 500000000});
  CHECK(half.fraction == 0x80000000u);
  // the largest legal nsec rounds up but stays inside the second
  auto top = NtpTimestamp::from_unix(TimeSpec{1, 999999999});
  CHECK(top.seconds == 0x83AA7E80u + 1);
  CHECK(top.fraction == 4294967292u);
}

TEST_CASE("era disambiguation and differences") {
  // seconds below the pivot are era 1
  NtpTimestamp late_era0{0xFFFFFFF0u, 0};
  NtpTimestamp early_era1{0x10u, 0};
  CHECK(static_cast<double>(early_era1.to_seconds()) ==
        static_cast<double>(late_era0.to_seconds()) + 0x20);
  CHECK(ntp_diff_seconds(early_era1, late_era0) == doctest::Approx(32.0));
  CHECK(ntp_diff_seconds(late_era0, early_era1) == doctest::Approx(-32.0));

  // monotone within an era
  NtpTimestamp a{0x90000000u, 5}, b{0x90000000u, 6};
  CHECK(a.to_seconds() < b.to_seconds());
  CHECK(ntp_diff_seconds(b, a) > 0);
}

TEST_CASE("decode round-trip over random valid packets") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 3000; ++i) {
    auto p = random_packet(rng);
    auto wire = encode_packet(p);
    auto q = decode_packet(wire, CaptureRecord{});
    CHECK(q == p);
  }
}

TEST_CASE("encode round-trip over random valid buffers") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 3000; ++i) {
    std::array<std::uint8_t, 48> buf;
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    buf[0] = static_cast<std::uint8_t>((buf[0] & 0xC7) | ((1 + rng() % 4) << 3));
    auto p = decode_packet(buf, CaptureRecord{});
    auto wire = encode_packet(p);
    CHECK(wire == buf);
  }
}

TEST_CASE("typed decode errors") {
  std::array<std::uint8_t, 48> buf{};
  buf[0] = 0x23;
  CHECK_THROWS_AS(decode_packet(std::span(buf.data(), 47), CaptureRecord{}),
                  TruncatedPacket);
  buf[0] = 0x03;  // version 0
  CHECK_THROWS_AS(decode_packet(buf, CaptureRecord{}), UnsupportedVersion);
  buf[0] = 0x2B;  // version 5
  CHECK_THROWS_AS(decode_packet(buf, CaptureRecord{}), UnsupportedVersion);
}

TEST_CASE("encode validates field ranges") {
  NtpPacket p;
  p.version = 5;
  CHECK_THROWS_AS(encode_packet(p), FieldOutOfRange);
  p.version = 0;
  CHECK_THROWS_AS(encode_packet(p), FieldOutOfRange);
  p.version = 4;
  p.leap = 4;
  CHECK_THROWS_AS(encode_packet(p), FieldOutOfRange);
}

TEST_CASE("fuzz smoke: arbitrary buffers never crash") {
  std::mt19937_64 rng(4242);
  int decoded = 0, rejected = 0;
  for (int i = 0; i < 3000; ++i) {
    std::size_t len = rng() % 96;
    std::vector<std::uint8_t> buf(len);
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    try {
      (void)decode_packet(buf, CaptureRecord{});
      ++decoded;
    } catch (const TruncatedPacket&) {
      ++rejected;
    } catch (const UnsupportedVersion&) {
      ++rejected;
    } catch (const FieldOutOfRange&) {
      ++rejected;
    }
  }
  CHECK(decoded + rejected == 3000);
}

TEST_CASE("capture metadata is carried onto the packet") {
  std::array<std::uint8_t, 48> buf{};
  buf[0] = 0x23;
  CaptureRecord rec;
  rec.ts = TimeSpec{1700000000, 42};
  rec.src = IpAddress::v4(10, 0, 0, 1);
  rec.dst = IpAddress::v4(192, 0, 2, 1);
  rec.sport = 123;
  rec.dport = 123;
  auto p = decode_packet(buf, rec);
  CHECK(p.capture_ts == rec.ts);
  CHECK(p.src_addr == rec.src);
  CHECK(p.dst_addr == rec.dst);
  CHECK(p.src_port == 123);
  CHECK(p.dst_port == 123);
}
