#include "normforge/version.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <vector>

namespace normforge {

namespace {

// minimal SHA-1, enough for git's "blob <len>\0<content>" hashing
std::array<std::uint32_t, 5> sha1(const std::vector<unsigned char>& message) {
  std::array<std::uint32_t, 5> h = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                                    0xC3D2E1F0u};
  std::vector<unsigned char> data = message;
  const std::uint64_t bit_len = static_cast<std::uint64_t>(data.size()) * 8;
  data.push_back(0x80);
  while (data.size() % 64 != 56) data.push_back(0x00);
  for (int i = 7; i >= 0; --i) data.push_back(static_cast<unsigned char>(bit_len >> (8 * i)));

  auto rotl = [](std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); };
  for (std::size_t chunk = 0; chunk < data.size(); chunk += 64) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
      w[i] = (static_cast<std::uint32_t>(data[chunk + 4 * i]) << 24) |
             (static_cast<std::uint32_t>(data[chunk + 4 * i + 1]) << 16) |
             (static_cast<std::uint32_t>(data[chunk + 4 * i + 2]) << 8) |
             static_cast<std::uint32_t>(data[chunk + 4 * i + 3]);
    }
    for (int i = 16; i < 80; ++i) w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }
  return h;
}

}  // namespace

const char* version_string() { return "normforge 0.1.0"; }

std::string version_content_hash() {
  const std::string content = version_string();
  std::string header = "blob " + std::to_string(content.size());
  std::vector<unsigned char> buf(header.begin(), header.end());
  buf.push_back('\0');
  buf.insert(buf.end(), content.begin(), content.end());
  const auto digest = sha1(buf);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(40);
  for (std::uint32_t word : digest) {
    for (int i = 7; i >= 0; --i) out.push_back(hex[(word >> (4 * i)) & 0xF]);
  }
  return out;
}

}  // namespace normforge
