#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg::growcut::detail {

/// Validated seed set as (linear volume index, label), sorted by index and
/// deduplicated. Throws on out-of-bounds voxels, fewer than two labels, or a
/// voxel claimed by two labels.
std::vector<std::pair<std::size_t, Label>> collect_seeds(std::span<const SeedStroke> seeds, const Dims& dims);

} // namespace seedseg::growcut::detail
