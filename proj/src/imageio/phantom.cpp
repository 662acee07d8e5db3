#include "seedseg/phantom.hpp"

#include <cmath>
#include <random>
#include <string>

#include "seedseg/error.hpp"

namespace seedseg::io {

namespace {

bool inside(const PhantomSpec& spec, int x, int y, int z) {
    const double dx = x - spec.center.x;
    const double dy = y - spec.center.y;
    const double dz = z - spec.center.z;
    if (spec.shape == PhantomShape::cube)
        return std::fabs(dx) <= spec.size && std::fabs(dy) <= spec.size && std::fabs(dz) <= spec.size;
    return dx * dx + dy * dy + dz * dz <= spec.size * spec.size;
}

void check(const PhantomSpec& spec) {
    if (spec.fg_intensity == spec.bg_intensity)
        throw PreconditionError("phantom foreground and background intensities must differ");
    if (!(spec.size >= 0.0))
        throw PreconditionError("phantom shape size must be >= 0");
    if (!(spec.noise_sigma >= 0.0))
        throw PreconditionError("phantom noise sigma must be >= 0");
    const int reach = static_cast<int>(std::floor(spec.size));
    const Index3& c = spec.center;
    if (c.x - reach < 0 || c.y - reach < 0 || c.z - reach < 0 || c.x + reach >= spec.dims.nx ||
        c.y + reach >= spec.dims.ny || c.z + reach >= spec.dims.nz)
        throw PreconditionError("phantom shape of size " + std::to_string(spec.size) + " around (" +
                                std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) +
                                ") exceeds the volume");
}

} // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
    check(spec);
    const Dims& d = spec.dims;
    std::vector<float> image(d.voxel_count());
    std::vector<Label> truth(d.voxel_count());
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t p = d.linear({x, y, z});
                const bool in = inside(spec, x, y, z);
                truth[p] = in ? 1 : 0;
                image[p] = in ? spec.fg_intensity : spec.bg_intensity;
            }
    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.rng_seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (auto& v : image)
            v = static_cast<float>(v + noise(rng));
    }
    const Geometry geometry{spec.spacing, {0.0, 0.0, 0.0}};
    return {ScalarVolume(d, geometry, std::move(image)), LabelVolume(d, geometry, std::move(truth))};
}

std::vector<SeedStroke> phantom_strokes(const PhantomSpec& spec) {
    check(spec);
    const Dims& d = spec.dims;
    const Index3& c = spec.center;

    SeedStroke fg{1, {}};
    const int r = std::max(1, static_cast<int>(spec.size / 2.0));
    for (int z = c.z - r; z <= c.z + r; ++z)
        for (int y = c.y - r; y <= c.y + r; ++y)
            for (int x = c.x - r; x <= c.x + r; ++x) {
                const int dx = x - c.x, dy = y - c.y, dz = z - c.z;
                if (dx * dx + dy * dy + dz * dz <= r * r && d.contains({x, y, z}) && inside(spec, x, y, z))
                    fg.voxels.push_back({x, y, z});
            }
    if (fg.voxels.empty())
        fg.voxels.push_back(c);

    SeedStroke bg{2, {}};
    auto add = [&](int x, int y, int z) {
        if (!inside(spec, x, y, z))
            bg.voxels.push_back({x, y, z});
    };
    for (int x = 0; x < d.nx; ++x)
        add(x, 0, 0);
    for (int y = 1; y < d.ny; ++y)
        add(d.nx - 1, y, 0);
    for (int z = 1; z < d.nz; ++z)
        add(d.nx - 1, d.ny - 1, z);
    if (bg.voxels.empty())
        throw PreconditionError("phantom object covers every background stroke voxel");
    return {fg, bg};
}

} // namespace seedseg::io
