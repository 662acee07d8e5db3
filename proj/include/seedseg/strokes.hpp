#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg::io {

/// Seed strokes document:
///   {"volume_dims": [nx, ny, nz],
///    "strokes": [{"label": 1, "voxels": [[x, y, z], ...]}, ...]}
struct StrokeFile {
    std::optional<Dims> volume_dims;
    std::vector<SeedStroke> strokes;

    friend bool operator==(const StrokeFile&, const StrokeFile&) = default;
};

/// Parses and validates a strokes document. Errors (malformed JSON, bad
/// label, empty or out-of-bounds stroke) raise ValidationError carrying the
/// stroke index. Repeated voxels within a label are dropped after their first
/// occurrence; a stroke left empty by that is removed.
StrokeFile parse_strokes(std::string_view json, bool require_dims = true);
std::string serialize_strokes(const StrokeFile& file);

StrokeFile read_strokes(const std::filesystem::path& path);
void write_strokes(const StrokeFile& file, const std::filesystem::path& path);

} // namespace seedseg::io
