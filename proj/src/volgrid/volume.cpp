#include "seedseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seedseg/error.hpp"

namespace seedseg {

namespace {

std::vector<Index3> make_offsets(bool full) {
    std::vector<Index3> out;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0)
                    continue;
                if (!full && manhattan != 1)
                    continue;
                out.push_back({dx, dy, dz});
            }
    return out;
}

const std::vector<Index3> k_offsets6 = make_offsets(false);
const std::vector<Index3> k_offsets26 = make_offsets(true);

void check_dims(const Dims& d) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw PreconditionError("volume dimensions must be positive, got " + std::to_string(d.nx) + "x" +
                                std::to_string(d.ny) + "x" + std::to_string(d.nz));
}

void check_geometry(const Geometry& g) {
    for (double s : g.spacing)
        if (!(s > 0.0) || !std::isfinite(s))
            throw PreconditionError("voxel spacing must be finite and strictly positive");
    for (double o : g.origin)
        if (!std::isfinite(o))
            throw PreconditionError("volume origin must be finite");
}

void check_index(const Dims& d, const Index3& v) {
    if (!d.contains(v))
        throw BoundsError("voxel (" + std::to_string(v.x) + "," + std::to_string(v.y) + "," + std::to_string(v.z) +
                          ") outside volume " + std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" +
                          std::to_string(d.nz));
}

template <class T>
Slice<T> slice_of(const Dims& d, const Geometry& g, std::span<const T> data, Axis axis, int index) {
    const int extent = axis_extent(d, axis);
    if (index < 0 || index >= extent)
        throw BoundsError("slice index " + std::to_string(index) + " outside " + std::string(to_string(axis)) +
                          " extent " + std::to_string(extent));
    Slice<T> s;
    switch (axis) {
    case Axis::axial:
        s.rows = d.ny;
        s.cols = d.nx;
        s.row_spacing = g.spacing[1];
        s.col_spacing = g.spacing[0];
        break;
    case Axis::sagittal:
        s.rows = d.nz;
        s.cols = d.ny;
        s.row_spacing = g.spacing[2];
        s.col_spacing = g.spacing[1];
        break;
    case Axis::coronal:
        s.rows = d.nz;
        s.cols = d.nx;
        s.row_spacing = g.spacing[2];
        s.col_spacing = g.spacing[0];
        break;
    }
    s.values.resize(static_cast<std::size_t>(s.rows) * s.cols);
    for (int r = 0; r < s.rows; ++r)
        for (int c = 0; c < s.cols; ++c)
            s.values[static_cast<std::size_t>(r) * s.cols + c] = data[d.linear(slice_pixel_to_voxel(axis, index, r, c))];
    return s;
}

} // namespace

Connectivity connectivity_from_int(int n) {
    if (n == 6)
        return Connectivity::six;
    if (n == 26)
        return Connectivity::twenty_six;
    throw ValidationError("connectivity must be 6 or 26, got " + std::to_string(n));
}

std::span<const Index3> neighbor_offsets(Connectivity c) {
    return c == Connectivity::six ? std::span<const Index3>(k_offsets6) : std::span<const Index3>(k_offsets26);
}

ScalarVolume::ScalarVolume(Dims dims, Geometry geometry, std::vector<float> intensities)
    : m_dims(dims)
    , m_geometry(geometry)
    , m_data(std::move(intensities)) {
    check_dims(m_dims);
    check_geometry(m_geometry);
    if (m_data.size() != m_dims.voxel_count())
        throw PreconditionError("intensity buffer holds " + std::to_string(m_data.size()) + " values, dims need " +
                                std::to_string(m_dims.voxel_count()));
    if (!std::all_of(m_data.begin(), m_data.end(), [](float v) { return std::isfinite(v); }))
        throw DomainError("volume contains non-finite intensities");
}

float ScalarVolume::at(const Index3& v) const {
    check_index(m_dims, v);
    return m_data[m_dims.linear(v)];
}

LabelVolume::LabelVolume(Dims dims, Geometry geometry)
    : m_dims(dims)
    , m_geometry(geometry) {
    check_dims(m_dims);
    check_geometry(m_geometry);
    m_labels.assign(m_dims.voxel_count(), 0);
}

LabelVolume::LabelVolume(Dims dims, Geometry geometry, std::vector<Label> labels)
    : m_dims(dims)
    , m_geometry(geometry)
    , m_labels(std::move(labels)) {
    check_dims(m_dims);
    check_geometry(m_geometry);
    if (m_labels.size() != m_dims.voxel_count())
        throw PreconditionError("label buffer holds " + std::to_string(m_labels.size()) + " values, dims need " +
                                std::to_string(m_dims.voxel_count()));
}

Label LabelVolume::at(const Index3& v) const {
    check_index(m_dims, v);
    return m_labels[m_dims.linear(v)];
}

bool LabelVolume::is_binary() const {
    return std::all_of(m_labels.begin(), m_labels.end(), [](Label l) { return l <= 1; });
}

void validate_strokes(std::span<const SeedStroke> strokes, const Dims& dims) {
    for (std::size_t i = 0; i < strokes.size(); ++i) {
        const auto& s = strokes[i];
        const int item = static_cast<int>(i);
        if (s.label == 0)
            throw ValidationError("stroke " + std::to_string(i) + ": label 0 is reserved for unlabeled voxels", item);
        if (s.voxels.empty())
            throw ValidationError("stroke " + std::to_string(i) + ": no voxels", item);
        for (const auto& v : s.voxels)
            if (!dims.contains(v))
                throw ValidationError("stroke " + std::to_string(i) + ": voxel (" + std::to_string(v.x) + "," +
                                          std::to_string(v.y) + "," + std::to_string(v.z) + ") outside volume",
                                      item);
    }
}

Axis axis_from_string(std::string_view name) {
    if (name == "axial")
        return Axis::axial;
    if (name == "sagittal")
        return Axis::sagittal;
    if (name == "coronal")
        return Axis::coronal;
    throw ValidationError("unknown axis '" + std::string(name) + "' (expected axial, sagittal or coronal)");
}

std::string_view to_string(Axis axis) {
    switch (axis) {
    case Axis::axial:
        return "axial";
    case Axis::sagittal:
        return "sagittal";
    case Axis::coronal:
        return "coronal";
    }
    return "?";
}

int fixed_coordinate(Axis axis) {
    switch (axis) {
    case Axis::sagittal:
        return 0;
    case Axis::coronal:
        return 1;
    case Axis::axial:
        break;
    }
    return 2;
}

int axis_extent(const Dims& dims, Axis axis) {
    switch (axis) {
    case Axis::sagittal:
        return dims.nx;
    case Axis::coronal:
        return dims.ny;
    case Axis::axial:
        break;
    }
    return dims.nz;
}

Index3 slice_pixel_to_voxel(Axis axis, int index, int row, int col) {
    switch (axis) {
    case Axis::sagittal:
        return {index, col, row};
    case Axis::coronal:
        return {col, index, row};
    case Axis::axial:
        break;
    }
    return {col, row, index};
}

Vec3 voxel_to_world(const Index3& v, const Dims& dims, const Geometry& geometry) {
    check_index(dims, v);
    return {geometry.origin[0] + v.x * geometry.spacing[0], geometry.origin[1] + v.y * geometry.spacing[1],
            geometry.origin[2] + v.z * geometry.spacing[2]};
}

Vec3 voxel_to_world(const Index3& v, const ScalarVolume& vol) {
    return voxel_to_world(v, vol.dims(), vol.geometry());
}

Slice<float> extract_slice(const ScalarVolume& vol, Axis axis, int index) {
    return slice_of(vol.dims(), vol.geometry(), vol.data(), axis, index);
}

Slice<Label> extract_slice(const LabelVolume& vol, Axis axis, int index) {
    return slice_of(vol.dims(), vol.geometry(), vol.data(), axis, index);
}

std::size_t count_label(const LabelVolume& vol, Label label) {
    const auto data = vol.data();
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), label));
}

LabelVolume select_label(const LabelVolume& vol, Label label) {
    std::vector<Label> out(vol.data().size());
    std::transform(vol.data().begin(), vol.data().end(), out.begin(),
                   [label](Label l) { return static_cast<Label>(l == label ? 1 : 0); });
    return LabelVolume(vol.dims(), vol.geometry(), std::move(out));
}

LabelVolume rasterize_strokes(std::span<const SeedStroke> strokes, const Dims& dims, const Geometry& geometry) {
    std::vector<Label> out(dims.voxel_count(), 0);
    for (const auto& s : strokes)
        for (const auto& v : s.voxels) {
            check_index(dims, v);
            out[dims.linear(v)] = s.label;
        }
    return LabelVolume(dims, geometry, std::move(out));
}

} // namespace seedseg
