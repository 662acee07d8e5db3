#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace seedseg::server::detail {

/// 8-bit grayscale PNG, one IDAT chunk, filter type 0 on every row.
std::string encode_png_gray8(int width, int height, std::span<const std::uint8_t> pixels);

} // namespace seedseg::server::detail
