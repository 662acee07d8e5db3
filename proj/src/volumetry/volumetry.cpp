#include "seedseg/volumetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "seedseg/error.hpp"

namespace seedseg::volumetry {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string(what) + " must be positive and finite");
}

void require_binary(const LabelVolume& mask) {
    if (!mask.is_binary())
        throw DomainError("volumetry expects a binary {0,1} mask");
}

} // namespace

VoxelVolume voxel_volume(const LabelVolume& mask, const Vec3& spacing) {
    require_binary(mask);
    for (double s : spacing)
        require_positive(s, "voxel spacing");
    const std::size_t n = count_label(mask, 1);
    return {n, static_cast<double>(n) * spacing[0] * spacing[1] * spacing[2]};
}

double slice_sum_volume(const LabelVolume& mask, Axis axis, double slice_thickness_mm, double area_per_pixel_mm2) {
    require_binary(mask);
    require_positive(slice_thickness_mm, "slice thickness");
    require_positive(area_per_pixel_mm2, "pixel area");
    double total = 0.0;
    for (int k = 0; k < axis_extent(mask.dims(), axis); ++k) {
        const auto s = extract_slice(mask, axis, k);
        const auto pixels = std::count(s.values.begin(), s.values.end(), Label{1});
        total += static_cast<double>(pixels) * area_per_pixel_mm2 * slice_thickness_mm;
    }
    return total;
}

double sphere_model(double d) {
    require_positive(d, "diameter");
    return std::numbers::pi * d * d * d / 6.0;
}

double ellipsoid_model(double a, double b, double c, AxisMode mode) {
    require_positive(a, "axis a");
    require_positive(b, "axis b");
    require_positive(c, "axis c");
    if (mode == AxisMode::diameters) {
        a /= 2.0;
        b /= 2.0;
        c /= 2.0;
    }
    return 4.0 / 3.0 * std::numbers::pi * a * b * c;
}

double mean_radius_sphere(double r_x, double r_y, double r_z) {
    require_positive(r_x, "radius r_x");
    require_positive(r_y, "radius r_y");
    require_positive(r_z, "radius r_z");
    const double r = (r_x + r_y + r_z) / 3.0;
    return 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

double caliper_model(double a, double b) {
    require_positive(a, "largest diameter a");
    require_positive(b, "perpendicular diameter b");
    if (b > a)
        throw PreconditionError("caliper model expects the largest diameter first (a >= b)");
    return std::numbers::pi * a * b * b / 6.0;
}

double macdonald_area(double d1, double d2) {
    require_positive(d1, "diameter d1");
    require_positive(d2, "diameter d2");
    if (d2 > d1)
        throw PreconditionError("Macdonald area expects the largest diameter first (d1 >= d2)");
    return d1 * d2;
}

Response macdonald_response(double area_before, double area_after) {
    require_positive(area_before, "baseline area");
    // a vanished lesion (area 0) is a valid follow-up
    if (!(area_after >= 0.0) || !std::isfinite(area_after))
        throw DomainError("follow-up area must be non-negative and finite");
    return area_after <= 0.5 * area_before ? Response::response : Response::no_response;
}

GeometricMeasurements measure(const LabelVolume& mask, const Vec3& spacing) {
    require_binary(mask);
    const Dims& d = mask.dims();
    Index3 lo{d.nx, d.ny, d.nz};
    Index3 hi{-1, -1, -1};
    std::vector<std::size_t> area(d.nz, 0);
    for (std::size_t p = 0; p < mask.data().size(); ++p) {
        if (mask[p] == 0)
            continue;
        const Index3 c = d.coords(p);
        lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), std::min(lo.z, c.z)};
        hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), std::max(hi.z, c.z)};
        ++area[c.z];
    }
    if (hi.x < 0)
        throw DomainError("cannot measure an empty mask");

    GeometricMeasurements m;
    m.a = (hi.x - lo.x + 1) * spacing[0] / 2.0;
    m.b = (hi.y - lo.y + 1) * spacing[1] / 2.0;
    m.c = (hi.z - lo.z + 1) * spacing[2] / 2.0;

    const int z = static_cast<int>(std::max_element(area.begin(), area.end()) - area.begin());
    int x0 = d.nx, x1 = -1, y0 = d.ny, y1 = -1;
    for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x)
            if (mask[d.linear({x, y, z})] != 0) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    const double w = (x1 - x0 + 1) * spacing[0];
    const double h = (y1 - y0 + 1) * spacing[1];
    m.d = std::hypot(w, h);
    m.d_perp = std::min(w, h);
    return m;
}

} // namespace seedseg::volumetry
