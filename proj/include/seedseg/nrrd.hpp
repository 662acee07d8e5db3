#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "seedseg/volume.hpp"

// Minimal NRRD reader/writer. Supported subset: 3 dimensions; types uchar,
// short, ushort, int, float; raw or gzip encoding; little-endian; geometry
// from diagonal `space directions` or `spacings`, plus `space origin`.
// Unknown fields are ignored; a known field with a value outside the subset is
// rejected with UnsupportedFormatError naming the field.
namespace seedseg::io {

enum class PixelType { uint8, int16, uint16, int32, float32 };
enum class Encoding { raw, gzip };

std::string_view to_string(PixelType t);
std::string_view to_string(Encoding e);
std::size_t bytes_per_voxel(PixelType t);

struct NrrdImage {
    ScalarVolume volume;
    PixelType type = PixelType::float32;
    Encoding encoding = Encoding::raw;

    /// Throws DomainError unless every value is an integer in [0,255].
    LabelVolume to_labels() const;
};

NrrdImage parse_nrrd(std::string_view bytes);
NrrdImage read_nrrd(const std::filesystem::path& path);

/// Serialises a scalar volume as `type`. Integer types require every value to
/// be an integer inside the type's range (DomainError otherwise).
std::string encode_nrrd(const ScalarVolume& vol, Encoding encoding, PixelType type = PixelType::float32);
/// Label volumes are always written as uchar.
std::string encode_nrrd(const LabelVolume& vol, Encoding encoding);

void write_nrrd(const ScalarVolume& vol, const std::filesystem::path& path, Encoding encoding = Encoding::gzip,
                PixelType type = PixelType::float32);
void write_nrrd(const LabelVolume& vol, const std::filesystem::path& path, Encoding encoding = Encoding::gzip);

std::string gzip_compress(std::string_view data);
/// Accepts gzip or zlib framing. Throws CorruptFileError on a damaged stream.
std::string gzip_decompress(std::string_view data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

} // namespace seedseg::io
