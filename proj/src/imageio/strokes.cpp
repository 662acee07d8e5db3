#include "seedseg/strokes.hpp"

#include <map>
#include <set>

#include <json.hpp>

#include "seedseg/error.hpp"
#include "seedseg/nrrd.hpp"

namespace seedseg::io {

using nlohmann::json;

namespace {

int as_int(const json& v, const std::string& where, int item) {
    if (!v.is_number_integer())
        throw ValidationError(where + ": expected an integer", item);
    const auto n = v.get<long long>();
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max())
        throw ValidationError(where + ": integer out of range", item);
    return static_cast<int>(n);
}

Dims parse_dims(const json& v) {
    if (!v.is_array() || v.size() != 3)
        throw ValidationError("volume_dims must be an array [nx, ny, nz]");
    Dims d{as_int(v[0], "volume_dims", -1), as_int(v[1], "volume_dims", -1), as_int(v[2], "volume_dims", -1)};
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw ValidationError("volume_dims must be positive");
    return d;
}

} // namespace

StrokeFile parse_strokes(std::string_view text, bool require_dims) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("strokes document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ValidationError("strokes document must be a JSON object");

    StrokeFile file;
    if (doc.contains("volume_dims"))
        file.volume_dims = parse_dims(doc["volume_dims"]);
    else if (require_dims)
        throw ValidationError("strokes document lacks volume_dims");

    if (!doc.contains("strokes") || !doc["strokes"].is_array())
        throw ValidationError("strokes document lacks a 'strokes' array");

    const auto& strokes = doc["strokes"];
    for (std::size_t i = 0; i < strokes.size(); ++i) {
        const int item = static_cast<int>(i);
        const std::string where = "stroke " + std::to_string(i);
        const auto& s = strokes[i];
        if (!s.is_object() || !s.contains("label") || !s.contains("voxels"))
            throw ValidationError(where + ": expected {label, voxels}", item);
        const int label = as_int(s["label"], where + " label", item);
        if (label < 1 || label > 255)
            throw ValidationError(where + ": label must be in 1..255", item);
        if (!s["voxels"].is_array())
            throw ValidationError(where + ": voxels must be an array", item);

        SeedStroke stroke;
        stroke.label = static_cast<Label>(label);
        for (const auto& v : s["voxels"]) {
            if (!v.is_array() || v.size() != 3)
                throw ValidationError(where + ": each voxel must be [x, y, z]", item);
            stroke.voxels.push_back({as_int(v[0], where, item), as_int(v[1], where, item), as_int(v[2], where, item)});
        }
        file.strokes.push_back(std::move(stroke));
    }

    if (file.volume_dims)
        validate_strokes(file.strokes, *file.volume_dims);
    else
        for (std::size_t i = 0; i < file.strokes.size(); ++i) {
            if (file.strokes[i].voxels.empty())
                throw ValidationError("stroke " + std::to_string(i) + ": no voxels", static_cast<int>(i));
            for (const auto& v : file.strokes[i].voxels)
                if (v.x < 0 || v.y < 0 || v.z < 0)
                    throw ValidationError("stroke " + std::to_string(i) + ": negative voxel index", static_cast<int>(i));
        }

    // Deduplicate per label, keeping first occurrences.
    std::map<Label, std::set<Index3>> seen;
    std::vector<SeedStroke> kept;
    for (auto& s : file.strokes) {
        auto& labelled = seen[s.label];
        std::vector<Index3> unique;
        for (const auto& v : s.voxels)
            if (labelled.insert(v).second)
                unique.push_back(v);
        if (!unique.empty())
            kept.push_back({s.label, std::move(unique)});
    }
    file.strokes = std::move(kept);
    return file;
}

std::string serialize_strokes(const StrokeFile& file) {
    json doc = json::object();
    if (file.volume_dims)
        doc["volume_dims"] = {file.volume_dims->nx, file.volume_dims->ny, file.volume_dims->nz};
    json strokes = json::array();
    for (const auto& s : file.strokes) {
        json voxels = json::array();
        for (const auto& v : s.voxels)
            voxels.push_back({v.x, v.y, v.z});
        strokes.push_back({{"label", s.label}, {"voxels", std::move(voxels)}});
    }
    doc["strokes"] = std::move(strokes);
    return doc.dump() + "\n";
}

StrokeFile read_strokes(const std::filesystem::path& path) { return parse_strokes(read_file(path)); }

void write_strokes(const StrokeFile& file, const std::filesystem::path& path) {
    write_file(path, serialize_strokes(file));
}

} // namespace seedseg::io
