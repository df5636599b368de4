#include "ntpowd/net.hpp"

#include <arpa/inet.h>
#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace ntpowd {

std::optional<IpAddress> IpAddress::parse(const std::string& text) {
  IpAddress out;
  in_addr a4{};
  if (inet_pton(AF_INET, text.c_str(), &a4) == 1) {
    out.kind = Kind::V4;
    std::memcpy(out.bytes.data(), &a4, 4);
    return out;
  }
  in6_addr a6{};
  if (inet_pton(AF_INET6, text.c_str(), &a6) == 1) {
    out.kind = Kind::V6;
    std::memcpy(out.bytes.data(), &a6, 16);
    return out;
  }
  return std::nullopt;
}

IpAddress IpAddress::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  IpAddress out;
  out.kind = Kind::V4;
  out.bytes = {a, b, c, d};
  return out;
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& raw) {
  IpAddress out;
  out.kind = Kind::V6;
  out.bytes = raw;
  return out;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (kind == Kind::V4) {
    inet_ntop(AF_INET, bytes.data(), buf, sizeof buf);
  } else {
    inet_ntop(AF_INET6, bytes.data(), buf, sizeof buf);
  }
  return buf;
}

std::array<std::uint8_t, 4> ref_id_for(const IpAddress& addr) {
  std::array<std::uint8_t, 4> out{};
  if (addr.kind == IpAddress::Kind::V4) {
    std::memcpy(out.data(), addr.bytes.data(), 4);
    return out;
  }
  unsigned char digest[EVP_MAX_MD_SIZE] = {};
  unsigned int len = 0;
  if (EVP_Digest(addr.bytes.data(), 16, digest, &len, EVP_md5(), nullptr) != 1 || len < 4)
    throw std::runtime_error("md5 digest failed");
  std::memcpy(out.data(), digest, 4);
  return out;
}

}  // namespace ntpowd
