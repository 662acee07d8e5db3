#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace seedseg {

using Label = std::uint8_t;
using Vec3 = std::array<double, 3>;

struct Index3 {
    int x = 0;
    int y = 0;
    int z = 0;

    friend auto operator<=>(const Index3&, const Index3&) = default;
};

/// Voxel extents. Storage everywhere is x-fastest:
/// index = x + nx * (y + ny * z).
struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool contains(const Index3& v) const {
        return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < nx && v.y < ny && v.z < nz;
    }
    std::size_t linear(const Index3& v) const {
        return static_cast<std::size_t>(v.x) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(v.y) + static_cast<std::size_t>(ny) * v.z);
    }
    Index3 coords(std::size_t i) const {
        const auto plane = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
        const auto z = i / plane;
        const auto rem = i - z * plane;
        return {static_cast<int>(rem % nx), static_cast<int>(rem / nx), static_cast<int>(z)};
    }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Physical placement of a grid: millimetres per voxel and the world position
/// of voxel (0,0,0).
struct Geometry {
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Neighbourhood used by the automaton, morphology and connected components.
enum class Connectivity { six = 6, twenty_six = 26 };

Connectivity connectivity_from_int(int n);

/// Neighbour offsets in the canonical enumeration order: ascending linear
/// offset (dz major, then dy, then dx). Offset k and offset size-1-k are
/// opposites.
std::span<const Index3> neighbor_offsets(Connectivity c);

/// 3D intensity grid. Values are stored as float whatever the source encoding.
/// Immutable once constructed.
class ScalarVolume {
  public:
    ScalarVolume(Dims dims, Geometry geometry, std::vector<float> intensities);

    const Dims& dims() const { return m_dims; }
    const Geometry& geometry() const { return m_geometry; }
    const Vec3& spacing() const { return m_geometry.spacing; }
    const Vec3& origin() const { return m_geometry.origin; }
    std::span<const float> data() const { return m_data; }

    float operator[](std::size_t i) const { return m_data[i]; }
    float at(const Index3& v) const;

    friend bool operator==(const ScalarVolume&, const ScalarVolume&) = default;

  private:
    Dims m_dims;
    Geometry m_geometry;
    std::vector<float> m_data;
};

/// 3D grid of small-integer labels; 0 means unlabeled. Binary masks are label
/// volumes restricted to {0,1}.
class LabelVolume {
  public:
    explicit LabelVolume(Dims dims, Geometry geometry = {});
    LabelVolume(Dims dims, Geometry geometry, std::vector<Label> labels);

    const Dims& dims() const { return m_dims; }
    const Geometry& geometry() const { return m_geometry; }
    std::span<const Label> data() const { return m_labels; }

    Label operator[](std::size_t i) const { return m_labels[i]; }
    Label at(const Index3& v) const;

    bool is_binary() const;

    friend bool operator==(const LabelVolume&, const LabelVolume&) = default;

  private:
    Dims m_dims;
    Geometry m_geometry;
    std::vector<Label> m_labels;
};

/// Axis-aligned voxel box, both corners inclusive.
struct RegionOfInterest {
    Index3 min;
    Index3 max;

    Dims extent() const { return {max.x - min.x + 1, max.y - min.y + 1, max.z - min.z + 1}; }
    bool contains(const Index3& v) const {
        return v.x >= min.x && v.y >= min.y && v.z >= min.z && v.x <= max.x && v.y <= max.y && v.z <= max.z;
    }
    bool covers(const Dims& d) const {
        return min == Index3{} && max == Index3{d.nx - 1, d.ny - 1, d.nz - 1};
    }

    friend bool operator==(const RegionOfInterest&, const RegionOfInterest&) = default;
};

/// User-painted seeds of a single label.
struct SeedStroke {
    Label label = 0;
    std::vector<Index3> voxels;

    friend bool operator==(const SeedStroke&, const SeedStroke&) = default;
};

/// Throws ValidationError (with the stroke index) when a stroke is empty,
/// carries label 0, or leaves the volume.
void validate_strokes(std::span<const SeedStroke> strokes, const Dims& dims);

enum class Axis { axial, sagittal, coronal };

Axis axis_from_string(std::string_view name);
std::string_view to_string(Axis axis);

/// Index of the voxel coordinate held constant by a slice along `axis`:
/// axial = z, sagittal = x, coronal = y.
int fixed_coordinate(Axis axis);
int axis_extent(const Dims& dims, Axis axis);

/// A 2D cut through a volume, row-major. Axial slices have rows along y and
/// columns along x; sagittal rows along z, columns along y; coronal rows along
/// z, columns along x.
template <class T>
struct Slice {
    int rows = 0;
    int cols = 0;
    double row_spacing = 1.0;
    double col_spacing = 1.0;
    std::vector<T> values;

    T at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Voxel index of the slice pixel (row, col) on slice `index` along `axis`.
Index3 slice_pixel_to_voxel(Axis axis, int index, int row, int col);

Vec3 voxel_to_world(const Index3& v, const ScalarVolume& vol);
Vec3 voxel_to_world(const Index3& v, const Dims& dims, const Geometry& geometry);

Slice<float> extract_slice(const ScalarVolume& vol, Axis axis, int index);
Slice<Label> extract_slice(const LabelVolume& vol, Axis axis, int index);

std::size_t count_label(const LabelVolume& vol, Label label);

/// Binary mask of voxels equal to `label`.
LabelVolume select_label(const LabelVolume& vol, Label label);

/// Paints strokes into a label volume of the given shape (conflicts are the
/// caller's concern; later strokes overwrite earlier ones).
LabelVolume rasterize_strokes(std::span<const SeedStroke> strokes, const Dims& dims, const Geometry& geometry = {});

} // namespace seedseg
