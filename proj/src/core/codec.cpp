#include "core/codec.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>

#include "core/error.hpp"

namespace mt2ie {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G',
                                                       '\r', '\n', 0x1a, '\n'};

void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> d, std::size_t at) {
  return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) |
         (std::uint32_t{d[at + 2]} << 8) | std::uint32_t{d[at + 3]};
}

void put_chunk(Bytes& out, const char (&type)[5], std::span<const std::uint8_t> body) {
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  const auto type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  const auto crc = crc32(0L, out.data() + type_at, static_cast<uInt>(body.size() + 4));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
  }
  if (clean.size() % 4 != 0) fail(ErrorCode::kMalformedReply, "base64 length is not a multiple of 4");
  Bytes out(3 * clean.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) fail(ErrorCode::kMalformedReply, "invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height,
                     std::span<const std::uint8_t> rgb) {
  require(width > 0 && height > 0, "png dimensions must be positive");
  require(rgb.size() == std::size_t{width} * height * 3, "png pixel buffer size mismatch");

  Bytes raw;
  raw.reserve((std::size_t{width} * 3 + 1) * height);
  for (std::uint32_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    const auto row = rgb.subspan(std::size_t{y} * width * 3, std::size_t{width} * 3);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  Bytes z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    fail(ErrorCode::kIo, "zlib compression failed");
  }
  z.resize(zlen);

  Bytes out(kPngSignature.begin(), kPngSignature.end());
  Bytes ihdr;
  put_u32(ihdr, width);
  put_u32(ihdr, height);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolor, deflate, no filter, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

PngInfo inspect_png(std::span<const std::uint8_t> data) {
  if (data.size() < kPngSignature.size() ||
      !std::equal(kPngSignature.begin(), kPngSignature.end(), data.begin())) {
    fail(ErrorCode::kParse, "not a PNG: bad signature");
  }
  PngInfo info;
  bool seen_ihdr = false;
  bool seen_idat = false;
  std::size_t at = kPngSignature.size();
  while (true) {
    if (at + 12 > data.size()) fail(ErrorCode::kParse, "truncated PNG chunk header");
    const auto len = get_u32(data, at);
    if (at + 12 + std::size_t{len} > data.size()) fail(ErrorCode::kParse, "truncated PNG chunk body");
    const std::string type(reinterpret_cast<const char*>(data.data() + at + 4), 4);
    const auto crc = crc32(0L, data.data() + at + 4, static_cast<uInt>(len + 4));
    if (static_cast<std::uint32_t>(crc) != get_u32(data, at + 8 + len)) {
      fail(ErrorCode::kParse, "PNG chunk " + type + " has a bad CRC");
    }
    if (!seen_ihdr) {
      if (type != "IHDR" || len != 13) fail(ErrorCode::kParse, "PNG does not start with IHDR");
      info.width = get_u32(data, at + 8);
      info.height = get_u32(data, at + 12);
      if (info.width == 0 || info.height == 0) fail(ErrorCode::kParse, "PNG has zero dimension");
      seen_ihdr = true;
    } else if (type == "IDAT") {
      seen_idat = true;
    } else if (type == "IEND") {
      if (!seen_idat) fail(ErrorCode::kParse, "PNG has no image data");
      return info;
    }
    at += 12 + std::size_t{len};
  }
}

Bytes read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace mt2ie
