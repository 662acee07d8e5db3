#include <algorithm>
#include <chrono>

#include "seedseg/growcut.hpp"
#include "seeds.hpp"

namespace seedseg::growcut {

// Deliberately plain: every voxel of the volume visits all of its neighbours
// in every iteration, similarities are recomputed each time, and the two
// state buffers are swapped wholesale.
RunResult run_naive(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config) {
    const auto t0 = std::chrono::steady_clock::now();
    config.validate();
    const Dims& d = vol.dims();
    const auto seed_list = detail::collect_seeds(seeds, d);

    std::vector<Label> labels(d.voxel_count(), 0);
    std::vector<float> strength(d.voxel_count(), 0.0f);
    for (const auto& [index, label] : seed_list) {
        labels[index] = label;
        strength[index] = 1.0f;
    }
    const auto [lo, hi] = std::minmax_element(vol.data().begin(), vol.data().end());
    const float max_delta = *hi - *lo;
    const auto offsets = neighbor_offsets(config.neighborhood);

    RunStats stats;
    stats.roi = {{0, 0, 0}, {d.nx - 1, d.ny - 1, d.nz - 1}};
    const int cap = config.max_iterations.value_or(default_max_iterations(stats.roi));

    std::vector<Label> next_labels = labels;
    std::vector<float> next_strength = strength;
    while (stats.iterations < cap) {
        std::size_t changed = 0;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    const std::size_t p = d.linear({x, y, z});
                    float best = -1.0f;
                    Label best_label = 0;
                    for (const auto& o : offsets) {
                        const Index3 n{x + o.x, y + o.y, z + o.z};
                        if (!d.contains(n))
                            continue;
                        const std::size_t q = d.linear(n);
                        if (strength[q] <= 0.0f)
                            continue;
                        const float attack = similarity(vol[p], vol[q], max_delta) * strength[q];
                        if (attack > best || (attack == best && labels[q] < best_label)) {
                            best = attack;
                            best_label = labels[q];
                        }
                    }
                    if (best > strength[p]) {
                        next_labels[p] = best_label;
                        next_strength[p] = best;
                        ++changed;
                    } else {
                        next_labels[p] = labels[p];
                        next_strength[p] = strength[p];
                    }
                }
        labels.swap(next_labels);
        strength.swap(next_strength);
        ++stats.iterations;
        stats.changed_per_iteration.push_back(changed);
        if (changed == 0) {
            stats.converged = true;
            break;
        }
    }

    stats.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {LabelVolume(d, vol.geometry(), std::move(labels)), std::move(stats)};
}

} // namespace seedseg::growcut
