#pragma once
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace ntpowd {

// IPv4 or IPv6 address held as raw network-order bytes.
struct IpAddress {
  enum class Kind : std::uint8_t { V4, V6 };
  Kind kind{Kind::V4};
  std::array<std::uint8_t, 16> bytes{};  // v4 occupies bytes[0..3], rest zero

  static std::optional<IpAddress> parse(const std::string& text);
  static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
  static IpAddress v6(const std::array<std::uint8_t, 16>& raw);

  std::string to_string() const;
  std::size_t raw_len() const { return kind == Kind::V4 ? 4u : 16u; }

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
};

// The ref-id a synchronized client advertises for a server address:
// the four address bytes for IPv4, the first four bytes of MD5(address)
// for IPv6.
std::array<std::uint8_t, 4> ref_id_for(const IpAddress& addr);

}  // namespace ntpowd
