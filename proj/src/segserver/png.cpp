#include "png.hpp"

#include <stdexcept>
#include <vector>

#include <zlib.h>

namespace seedseg::server::detail {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    out += static_cast<char>(v >> 24);
    out += static_cast<char>(v >> 16);
    out += static_cast<char>(v >> 8);
    out += static_cast<char>(v);
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

} // namespace

std::string encode_png_gray8(int width, int height, std::span<const std::uint8_t> pixels) {
    if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("PNG dimensions do not match the pixel buffer");

    std::string raw;
    raw.reserve(static_cast<std::size_t>(width + 1) * height);
    for (int r = 0; r < height; ++r) {
        raw += '\0';
        raw.append(reinterpret_cast<const char*>(pixels.data()) + static_cast<std::size_t>(r) * width, width);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<Bytef> packed(packed_size);
    if (compress2(packed.data(), &packed_size, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION) != Z_OK)
        throw std::runtime_error("zlib compress failed");

    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += '\x08'; // bit depth
    ihdr += '\x00'; // grayscale
    ihdr += '\x00'; // deflate
    ihdr += '\x00'; // adaptive filtering
    ihdr += '\x00'; // no interlace

    std::string out("\x89PNG\r\n\x1a\n", 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", std::string(reinterpret_cast<const char*>(packed.data()), packed_size));
    put_chunk(out, "IEND", {});
    return out;
}

} // namespace seedseg::server::detail
