#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mt2ie {

using Bytes = std::vector<std::uint8_t>;

// Lowercase hex SHA-256 of the input.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> data);
// Throws Error{kMalformedReply} on invalid input.
Bytes base64_decode(std::string_view text);

// Encodes an 8-bit RGB image as PNG. rgb.size() must equal width*height*3.
Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height,
                     std::span<const std::uint8_t> rgb);

struct PngInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

// Walks the chunk stream checking signature, chunk CRCs, IHDR and IEND.
// Throws Error{kParse} when the bytes are not a well-formed PNG.
PngInfo inspect_png(std::span<const std::uint8_t> data);

Bytes read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace mt2ie
