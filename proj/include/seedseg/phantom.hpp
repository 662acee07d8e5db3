#pragma once

#include <cstdint>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg::io {

enum class PhantomShape { cube, ball };

/// Synthetic test volume: one bright object on a flat background plus
/// optional Gaussian noise.
struct PhantomSpec {
    Dims dims{32, 32, 32};
    PhantomShape shape = PhantomShape::cube;
    Index3 center{16, 16, 16};
    // Cube: half edge length in voxels (edge = 2*size + 1). Ball: radius.
    double size = 6.0;
    float fg_intensity = 100.0f;
    float bg_intensity = 0.0f;
    double noise_sigma = 0.0;
    std::uint64_t rng_seed = 0;
    Vec3 spacing{1.0, 1.0, 1.0};
};

struct Phantom {
    ScalarVolume image;
    LabelVolume truth; // exact rasterised shape, {0,1}
};

/// Deterministic for a given spec. Throws PreconditionError when the shape
/// does not fit inside the volume or foreground equals background.
Phantom generate_phantom(const PhantomSpec& spec);

/// A typical user initialisation for a phantom: label 1 on a small blob around
/// the object's centre and label 2 on a stroke running along three edges of
/// the volume box (so the region of interest spans the whole volume).
std::vector<SeedStroke> phantom_strokes(const PhantomSpec& spec);

} // namespace seedseg::io
