#pragma once

#include <cstddef>

#include "seedseg/volume.hpp"

// Tumour volume estimation: exact voxel summation, per-slice area summation,
// and the geometric approximation models used in clinical follow-up.
// Lengths are millimetres, volumes mm^3.
namespace seedseg::volumetry {

struct VoxelVolume {
    std::size_t voxel_count = 0;
    double volume_mm3 = 0.0;

    double volume_cm3() const { return volume_mm3 / 1000.0; }
};

VoxelVolume voxel_volume(const LabelVolume& mask, const Vec3& spacing);

/// Sum over slices along `axis` of (pixel count * area per pixel * thickness).
double slice_sum_volume(const LabelVolume& mask, Axis axis, double slice_thickness_mm, double area_per_pixel_mm2);

/// pi d^3 / 6 for the diameter d of the maximum cross-section.
double sphere_model(double d);

enum class AxisMode { semi_axes, diameters };

/// 4/3 pi a b c. With AxisMode::diameters the arguments are full extents and
/// are halved first.
double ellipsoid_model(double a, double b, double c, AxisMode mode = AxisMode::semi_axes);

/// Sphere with the mean of three orthogonal radii: 4/3 pi ((rx+ry+rz)/3)^3.
double mean_radius_sphere(double r_x, double r_y, double r_z);

/// pi a b^2 / 6 for the largest diameter a and the perpendicular diameter b
/// (requires a >= b).
double caliper_model(double a, double b);

/// Bidimensional tumour size: largest cross-sectional diameter times the
/// largest diameter perpendicular to it (requires d1 >= d2).
double macdonald_area(double d1, double d2);

enum class Response { response, no_response };

/// Response means the product shrank to at most half its baseline.
Response macdonald_response(double area_before, double area_after);

/// Diameters read off a mask, all in mm.
struct GeometricMeasurements {
    double d = 0.0;      // max cross-section diameter
    double d_perp = 0.0; // perpendicular diameter on the same slice
    double a = 0.0;      // semi-axes along x, y, z
    double b = 0.0;
    double c = 0.0;
};

/// Approximate measurement extraction. d is the bounding-box diagonal of the
/// axial slice with the largest area and d_perp the shorter side of that box;
/// a, b, c are half the mask's bounding-box extents. These are bounding-box
/// approximations, not calliper-exact Feret diameters. Throws DomainError on
/// an empty mask.
GeometricMeasurements measure(const LabelVolume& mask, const Vec3& spacing);

} // namespace seedseg::volumetry
