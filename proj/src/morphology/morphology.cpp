#include "seedseg/morphology.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "seedseg/error.hpp"

namespace seedseg::morphology {

namespace {

void require_binary(const LabelVolume& mask, const char* op) {
    if (!mask.is_binary())
        throw DomainError(std::string(op) + " expects a binary {0,1} mask");
}

void require_iterations(int n) {
    if (n < 1)
        throw PreconditionError("morphology iterations must be >= 1");
}

// One pass of either operator. `target` is the value a voxel takes when any
// neighbour holds it (1 for dilation, 0 for erosion); out-of-volume neighbours
// count as 0.
std::vector<Label> pass(const Dims& d, std::span<const Label> in, Connectivity c, Label target) {
    const auto offsets = neighbor_offsets(c);
    std::vector<Label> out(in.begin(), in.end());
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t p = d.linear({x, y, z});
                if (in[p] == target)
                    continue;
                for (const auto& o : offsets) {
                    const Index3 n{x + o.x, y + o.y, z + o.z};
                    const Label v = d.contains(n) ? in[d.linear(n)] : Label{0};
                    if (v == target) {
                        out[p] = target;
                        break;
                    }
                }
            }
    return out;
}

LabelVolume repeat(const LabelVolume& mask, Connectivity c, int iterations, Label target) {
    std::vector<Label> cur(mask.data().begin(), mask.data().end());
    for (int i = 0; i < iterations; ++i)
        cur = pass(mask.dims(), cur, c, target);
    return LabelVolume(mask.dims(), mask.geometry(), std::move(cur));
}

} // namespace

LabelVolume dilate(const LabelVolume& mask, Connectivity connectivity, int iterations) {
    require_binary(mask, "dilate");
    require_iterations(iterations);
    return repeat(mask, connectivity, iterations, 1);
}

LabelVolume erode(const LabelVolume& mask, Connectivity connectivity, int iterations) {
    require_binary(mask, "erode");
    require_iterations(iterations);
    return repeat(mask, connectivity, iterations, 0);
}

Components connected_components(const LabelVolume& mask, Connectivity connectivity) {
    require_binary(mask, "connected_components");
    const Dims& d = mask.dims();
    const auto offsets = neighbor_offsets(connectivity);
    Components out;
    out.ids.assign(d.voxel_count(), 0);

    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < d.voxel_count(); ++seed) {
        if (mask[seed] == 0 || out.ids[seed] != 0)
            continue;
        const auto id = static_cast<std::uint32_t>(out.sizes.size() + 1);
        std::size_t size = 0;
        out.ids[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++size;
            const Index3 c = d.coords(p);
            for (const auto& o : offsets) {
                const Index3 n{c.x + o.x, c.y + o.y, c.z + o.z};
                if (!d.contains(n))
                    continue;
                const std::size_t q = d.linear(n);
                if (mask[q] != 0 && out.ids[q] == 0) {
                    out.ids[q] = id;
                    stack.push_back(q);
                }
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

LabelVolume remove_islands(const LabelVolume& mask, Connectivity connectivity, IslandPolicy policy) {
    const Components cc = connected_components(mask, connectivity);
    const Dims& d = mask.dims();
    std::vector<bool> keep(cc.sizes.size() + 1, false);

    if (policy.kind == IslandPolicy::Kind::min_size) {
        for (std::size_t i = 0; i < cc.sizes.size(); ++i)
            keep[i + 1] = cc.sizes[i] >= policy.min_size;
    } else if (!cc.sizes.empty()) {
        // Smallest (x, y, z) voxel per component, for tie-breaking.
        std::vector<Index3> first(cc.sizes.size(), Index3{d.nx, d.ny, d.nz});
        for (std::size_t p = 0; p < cc.ids.size(); ++p)
            if (cc.ids[p] != 0) {
                const Index3 c = d.coords(p);
                auto& f = first[cc.ids[p] - 1];
                if (std::tie(c.x, c.y, c.z) < std::tie(f.x, f.y, f.z))
                    f = c;
            }
        std::size_t best = 0;
        for (std::size_t i = 1; i < cc.sizes.size(); ++i) {
            const auto& a = first[i];
            const auto& b = first[best];
            if (cc.sizes[i] > cc.sizes[best] ||
                (cc.sizes[i] == cc.sizes[best] && std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z)))
                best = i;
        }
        keep[best + 1] = true;
    }

    std::vector<Label> out(d.voxel_count(), 0);
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = keep[cc.ids[p]] && cc.ids[p] != 0 ? 1 : 0;
    return LabelVolume(d, mask.geometry(), std::move(out));
}

} // namespace seedseg::morphology
