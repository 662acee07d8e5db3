#include "seedseg/nrrd.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "seedseg/error.hpp"

static_assert(std::endian::native == std::endian::little, "NRRD payloads are read as little-endian");

namespace seedseg::io {

std::string_view to_string(PixelType t) {
    switch (t) {
    case PixelType::uint8:
        return "uchar";
    case PixelType::int16:
        return "short";
    case PixelType::uint16:
        return "ushort";
    case PixelType::int32:
        return "int";
    case PixelType::float32:
        break;
    }
    return "float";
}

std::string_view to_string(Encoding e) { return e == Encoding::gzip ? "gzip" : "raw"; }

std::size_t bytes_per_voxel(PixelType t) {
    switch (t) {
    case PixelType::uint8:
        return 1;
    case PixelType::int16:
    case PixelType::uint16:
        return 2;
    case PixelType::int32:
    case PixelType::float32:
        break;
    }
    return 4;
}

// ---------------------------------------------------------------------------
// gzip

std::string gzip_compress(std::string_view data) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("zlib deflateInit2 failed");
    std::string out;
    out.resize(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw Error("zlib deflate failed");
    out.resize(produced);
    return out;
}

std::string gzip_decompress(std::string_view data) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw Error("zlib inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    std::string out;
    char buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw CorruptFileError("gzip payload is damaged or truncated");
        }
        out.append(buf, sizeof buf - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw CorruptFileError("gzip payload is truncated");
        }
    }
    inflateEnd(&zs);
    return out;
}

// ---------------------------------------------------------------------------
// file helpers

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IoError("error while reading '" + path.string() + "'");
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw IoError("error while writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// header parsing

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        if (i > start)
            out.push_back(s.substr(start, i - start));
    }
    return out;
}

[[noreturn]] void unsupported(const std::string& field, const std::string& detail) {
    throw UnsupportedFormatError(field, "unsupported NRRD " + field + ": " + detail);
}

double parse_double(std::string_view s, const std::string& field) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        unsupported(field, "cannot parse number '" + std::string(s) + "'");
    return v;
}

long long parse_int(std::string_view s, const std::string& field) {
    s = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        unsupported(field, "cannot parse integer '" + std::string(s) + "'");
    return v;
}

// "(a,b,c)" -> {a,b,c}
std::vector<double> parse_vector(std::string_view s, const std::string& field) {
    s = trim(s);
    if (s.size() < 2 || s.front() != '(' || s.back() != ')')
        unsupported(field, "expected a parenthesised vector, got '" + std::string(s) + "'");
    s = s.substr(1, s.size() - 2);
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(parse_double(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start), field));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

// Splits "(..) (..) (..)" into vector tokens; parentheses may contain spaces.
std::vector<std::string_view> split_vectors(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        if (i >= s.size())
            break;
        const std::size_t start = i;
        if (s[i] == '(') {
            const auto close = s.find(')', i);
            i = close == std::string_view::npos ? s.size() : close + 1;
        } else {
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])))
                ++i;
        }
        out.push_back(s.substr(start, i - start));
    }
    return out;
}

PixelType parse_type(std::string_view raw) {
    const std::string t = lower(trim(raw));
    if (t == "uchar" || t == "unsigned char" || t == "uint8" || t == "uint8_t")
        return PixelType::uint8;
    if (t == "short" || t == "short int" || t == "signed short" || t == "signed short int" || t == "int16" ||
        t == "int16_t")
        return PixelType::int16;
    if (t == "ushort" || t == "unsigned short" || t == "unsigned short int" || t == "uint16" || t == "uint16_t")
        return PixelType::uint16;
    if (t == "int" || t == "signed int" || t == "int32" || t == "int32_t")
        return PixelType::int32;
    if (t == "float")
        return PixelType::float32;
    unsupported("type", "'" + std::string(trim(raw)) + "'");
}

template <class T>
void convert(const char* payload, std::size_t n, std::vector<float>& out) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, payload + i * sizeof(T), sizeof(T));
        out[i] = static_cast<float>(v);
    }
}

} // namespace

NrrdImage parse_nrrd(std::string_view bytes) {
    // Header: magic line, field lines, blank line, payload.
    std::size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= bytes.size())
            return std::nullopt;
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos)
            return std::nullopt;
        auto line = bytes.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        pos = nl + 1;
        return line;
    };

    const auto magic = next_line();
    if (!magic || magic->size() != 8 || !magic->starts_with("NRRD000") || (*magic)[7] < '1' || (*magic)[7] > '5')
        unsupported("magic", "missing or unknown NRRD magic line");

    std::map<std::string, std::string> fields;
    bool terminated = false;
    while (auto line = next_line()) {
        if (line->empty()) {
            terminated = true;
            break;
        }
        if (line->front() == '#')
            continue;
        if (line->find(":=") != std::string_view::npos)
            continue; // key/value pairs carry no geometry
        const auto sep = line->find(": ");
        if (sep == std::string_view::npos)
            throw CorruptFileError("malformed NRRD header line '" + std::string(*line) + "'");
        fields[lower(trim(line->substr(0, sep)))] = std::string(trim(line->substr(sep + 2)));
    }
    if (!terminated)
        throw CorruptFileError("NRRD header is not terminated by a blank line");

    auto require = [&](const std::string& key) -> const std::string& {
        const auto it = fields.find(key);
        if (it == fields.end())
            throw CorruptFileError("NRRD header lacks required field '" + key + "'");
        return it->second;
    };

    if (fields.contains("data file") || fields.contains("datafile"))
        unsupported("data file", "detached payloads are not supported");
    for (const char* skip : {"line skip", "lineskip", "byte skip", "byteskip"})
        if (const auto it = fields.find(skip); it != fields.end() && parse_int(it->second, skip) != 0)
            unsupported(skip, "non-zero skips are not supported");

    const PixelType type = parse_type(require("type"));
    if (const auto dim = parse_int(require("dimension"), "dimension"); dim != 3)
        unsupported("dimension", std::to_string(dim) + " (only 3 is supported)");

    const auto size_tokens = split_ws(require("sizes"));
    if (size_tokens.size() != 3)
        unsupported("sizes", "expected 3 sizes");
    Dims dims;
    int* targets[3] = {&dims.nx, &dims.ny, &dims.nz};
    for (int i = 0; i < 3; ++i) {
        const auto v = parse_int(size_tokens[i], "sizes");
        if (v <= 0 || v > std::numeric_limits<int>::max())
            unsupported("sizes", "sizes must be positive");
        *targets[i] = static_cast<int>(v);
    }

    const std::string encoding_name = lower(require("encoding"));
    Encoding encoding;
    if (encoding_name == "raw")
        encoding = Encoding::raw;
    else if (encoding_name == "gzip" || encoding_name == "gz")
        encoding = Encoding::gzip;
    else
        unsupported("encoding", "'" + encoding_name + "'");

    if (bytes_per_voxel(type) > 1) {
        const auto it = fields.find("endian");
        if (it == fields.end())
            unsupported("endian", "missing for a multi-byte type");
        if (lower(it->second) != "little")
            unsupported("endian", "'" + it->second + "' (only little is supported)");
    }

    Geometry geometry;
    if (const auto it = fields.find("space directions"); it != fields.end()) {
        const auto vecs = split_vectors(it->second);
        if (vecs.size() != 3)
            unsupported("space directions", "expected 3 direction vectors");
        for (int axis = 0; axis < 3; ++axis) {
            if (vecs[axis] == "none")
                unsupported("space directions", "'none' axis in a 3D volume");
            const auto v = parse_vector(vecs[axis], "space directions");
            if (v.size() != 3)
                unsupported("space directions", "vectors must have 3 components");
            for (int c = 0; c < 3; ++c)
                if (c != axis && v[c] != 0.0)
                    unsupported("space directions", "only diagonal (axis-aligned) directions are supported");
            if (!(v[axis] > 0.0))
                unsupported("space directions", "spacing must be positive");
            geometry.spacing[axis] = v[axis];
        }
    } else if (const auto sp = fields.find("spacings"); sp != fields.end()) {
        const auto tokens = split_ws(sp->second);
        if (tokens.size() != 3)
            unsupported("spacings", "expected 3 values");
        for (int axis = 0; axis < 3; ++axis) {
            const double s = parse_double(tokens[axis], "spacings");
            if (!(s > 0.0))
                unsupported("spacings", "spacing must be positive");
            geometry.spacing[axis] = s;
        }
    }
    if (const auto it = fields.find("space origin"); it != fields.end()) {
        const auto v = parse_vector(it->second, "space origin");
        if (v.size() != 3)
            unsupported("space origin", "expected 3 components");
        geometry.origin = {v[0], v[1], v[2]};
    }

    std::string_view payload = bytes.substr(pos);
    std::string inflated;
    if (encoding == Encoding::gzip) {
        inflated = gzip_decompress(payload);
        payload = inflated;
    }
    const std::size_t n = dims.voxel_count();
    const std::size_t need = n * bytes_per_voxel(type);
    if (payload.size() < need)
        throw CorruptFileError("NRRD payload truncated: " + std::to_string(payload.size()) + " of " +
                               std::to_string(need) + " bytes");

    std::vector<float> values;
    switch (type) {
    case PixelType::uint8:
        convert<std::uint8_t>(payload.data(), n, values);
        break;
    case PixelType::int16:
        convert<std::int16_t>(payload.data(), n, values);
        break;
    case PixelType::uint16:
        convert<std::uint16_t>(payload.data(), n, values);
        break;
    case PixelType::int32:
        convert<std::int32_t>(payload.data(), n, values);
        break;
    case PixelType::float32:
        convert<float>(payload.data(), n, values);
        if (!std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); }))
            throw CorruptFileError("NRRD payload contains non-finite values");
        break;
    }
    return {ScalarVolume(dims, geometry, std::move(values)), type, encoding};
}

NrrdImage read_nrrd(const std::filesystem::path& path) { return parse_nrrd(read_file(path)); }

LabelVolume NrrdImage::to_labels() const {
    std::vector<Label> labels(volume.data().size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const float v = volume[i];
        if (v < 0.0f || v > 255.0f || v != std::floor(v))
            throw DomainError("volume value " + std::to_string(v) + " is not a label id in 0..255");
        labels[i] = static_cast<Label>(v);
    }
    return LabelVolume(volume.dims(), volume.geometry(), std::move(labels));
}

// ---------------------------------------------------------------------------
// writing

namespace {

std::string num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string header(const Dims& d, const Geometry& g, PixelType type, Encoding encoding) {
    std::string h = "NRRD0004\n";
    h += "# Complete NRRD file format specification at:\n";
    h += "# http://teem.sourceforge.net/nrrd/format.html\n";
    h += "type: " + std::string(to_string(type)) + "\n";
    h += "dimension: 3\n";
    h += "space: left-posterior-superior\n";
    h += "sizes: " + std::to_string(d.nx) + " " + std::to_string(d.ny) + " " + std::to_string(d.nz) + "\n";
    h += "space directions: (" + num(g.spacing[0]) + ",0,0) (0," + num(g.spacing[1]) + ",0) (0,0," + num(g.spacing[2]) + ")\n";
    h += "kinds: domain domain domain\n";
    if (bytes_per_voxel(type) > 1)
        h += "endian: little\n";
    h += "encoding: " + std::string(to_string(encoding)) + "\n";
    h += "space origin: (" + num(g.origin[0]) + "," + num(g.origin[1]) + "," + num(g.origin[2]) + ")\n";
    h += "\n";
    return h;
}

template <class T>
std::string pack(std::span<const float> values) {
    std::string out(values.size() * sizeof(T), '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        if constexpr (std::is_integral_v<T>) {
            if (v != std::floor(v) || double(v) < static_cast<double>(std::numeric_limits<T>::min()) ||
                double(v) > static_cast<double>(std::numeric_limits<T>::max()))
                throw DomainError("value " + std::to_string(v) + " does not fit NRRD type");
        }
        const T t = static_cast<T>(v);
        std::memcpy(out.data() + i * sizeof(T), &t, sizeof(T));
    }
    return out;
}

std::string finish(std::string head, std::string payload, Encoding encoding) {
    if (encoding == Encoding::gzip)
        payload = gzip_compress(payload);
    return head + payload;
}

} // namespace

std::string encode_nrrd(const ScalarVolume& vol, Encoding encoding, PixelType type) {
    std::string payload;
    switch (type) {
    case PixelType::uint8:
        payload = pack<std::uint8_t>(vol.data());
        break;
    case PixelType::int16:
        payload = pack<std::int16_t>(vol.data());
        break;
    case PixelType::uint16:
        payload = pack<std::uint16_t>(vol.data());
        break;
    case PixelType::int32:
        payload = pack<std::int32_t>(vol.data());
        break;
    case PixelType::float32:
        payload = pack<float>(vol.data());
        break;
    }
    return finish(header(vol.dims(), vol.geometry(), type, encoding), std::move(payload), encoding);
}

std::string encode_nrrd(const LabelVolume& vol, Encoding encoding) {
    const auto data = vol.data();
    std::string payload(reinterpret_cast<const char*>(data.data()), data.size());
    return finish(header(vol.dims(), vol.geometry(), PixelType::uint8, encoding), std::move(payload), encoding);
}

void write_nrrd(const ScalarVolume& vol, const std::filesystem::path& path, Encoding encoding, PixelType type) {
    write_file(path, encode_nrrd(vol, encoding, type));
}

void write_nrrd(const LabelVolume& vol, const std::filesystem::path& path, Encoding encoding) {
    write_file(path, encode_nrrd(vol, encoding));
}

} // namespace seedseg::io
