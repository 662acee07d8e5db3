#include "seedseg/growcut.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <thread>

#include "seedseg/error.hpp"
#include "seeds.hpp"

namespace seedseg::growcut {

void Config::validate() const {
    if (roi_margin < 0)
        throw PreconditionError("ROI margin must be >= 0");
    if (max_iterations && *max_iterations < 1)
        throw PreconditionError("max_iterations must be >= 1");
    if (workers < 1)
        throw PreconditionError("workers must be >= 1");
}

RegionOfInterest compute_roi(std::span<const SeedStroke> seeds, int margin, const Dims& dims) {
    if (margin < 0)
        throw PreconditionError("ROI margin must be >= 0");
    bool any = false;
    RegionOfInterest box{{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                          std::numeric_limits<int>::max()},
                         {std::numeric_limits<int>::min(), std::numeric_limits<int>::min(),
                          std::numeric_limits<int>::min()}};
    for (const auto& stroke : seeds)
        for (const auto& v : stroke.voxels) {
            any = true;
            box.min = {std::min(box.min.x, v.x), std::min(box.min.y, v.y), std::min(box.min.z, v.z)};
            box.max = {std::max(box.max.x, v.x), std::max(box.max.y, v.y), std::max(box.max.z, v.z)};
        }
    if (!any)
        throw PreconditionError("cannot compute a region of interest without seed voxels");

    box.min = {std::max(0, box.min.x - margin), std::max(0, box.min.y - margin), std::max(0, box.min.z - margin)};
    box.max = {std::min(dims.nx - 1, box.max.x + margin), std::min(dims.ny - 1, box.max.y + margin),
               std::min(dims.nz - 1, box.max.z + margin)};
    return box;
}

float similarity(float cp, float cq, float max_delta) {
    if (!(max_delta > 0.0f))
        return 1.0f;
    const float g = 1.0f - std::fabs(cp - cq) / max_delta;
    return std::clamp(g, 0.0f, 1.0f);
}

int default_max_iterations(const RegionOfInterest& roi) {
    const auto e = roi.extent();
    const double diagonal = std::sqrt(double(e.nx) * e.nx + double(e.ny) * e.ny + double(e.nz) * e.nz);
    return std::max(1, 2 * static_cast<int>(std::ceil(diagonal)));
}

namespace detail {

std::vector<std::pair<std::size_t, Label>> collect_seeds(std::span<const SeedStroke> seeds, const Dims& dims) {
    validate_strokes(seeds, dims);

    std::vector<std::pair<std::size_t, Label>> out;
    for (const auto& s : seeds)
        for (const auto& v : s.voxels)
            out.emplace_back(dims.linear(v), s.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());

    std::vector<Index3> conflicts;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].first == out[i - 1].first && (conflicts.empty() || dims.linear(conflicts.back()) != out[i].first))
            conflicts.push_back(dims.coords(out[i].first));
    if (!conflicts.empty()) {
        std::string msg = "seed strokes assign different labels to " + std::to_string(conflicts.size()) + " voxel(s):";
        for (std::size_t i = 0; i < conflicts.size() && i < 8; ++i)
            msg += " (" + std::to_string(conflicts[i].x) + "," + std::to_string(conflicts[i].y) + "," +
                   std::to_string(conflicts[i].z) + ")";
        if (conflicts.size() > 8)
            msg += " ...";
        throw ConflictError(msg, std::move(conflicts));
    }

    std::set<Label> labels;
    for (const auto& [index, label] : out)
        labels.insert(label);
    if (labels.size() < 2)
        throw PreconditionError("GrowCut needs seeds with at least two different labels, got " +
                                std::to_string(labels.size()));
    return out;
}

} // namespace detail

namespace {

// Visits the in-box neighbours of local voxel p as (offset index, neighbour).
template <class Fn>
inline void for_each_neighbor(const Dims& e, std::span<const Index3> offsets, std::span<const std::ptrdiff_t> linear,
                              std::uint32_t p, Fn&& fn) {
    const Index3 c = e.coords(p);
    const bool interior = c.x > 0 && c.y > 0 && c.z > 0 && c.x < e.nx - 1 && c.y < e.ny - 1 && c.z < e.nz - 1;
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        if (!interior) {
            const Index3 n{c.x + offsets[k].x, c.y + offsets[k].y, c.z + offsets[k].z};
            if (!e.contains(n))
                continue;
        }
        fn(k, static_cast<std::uint32_t>(static_cast<std::ptrdiff_t>(p) + linear[k]));
    }
}

} // namespace

AutomatonState initialize(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config) {
    config.validate();
    const auto seed_list = detail::collect_seeds(seeds, vol.dims());

    AutomatonState st;
    st.m_roi = compute_roi(seeds, config.roi_margin, vol.dims());
    st.m_extent = st.m_roi.extent();
    st.m_neighborhood = config.neighborhood;
    st.m_workers = config.workers;

    const Dims& e = st.m_extent;
    const std::size_t n = e.voxel_count();
    if (n > std::numeric_limits<std::uint32_t>::max())
        throw PreconditionError("region of interest too large");

    st.m_features.resize(n);
    for (int z = 0; z < e.nz; ++z)
        for (int y = 0; y < e.ny; ++y)
            for (int x = 0; x < e.nx; ++x)
                st.m_features[e.linear({x, y, z})] =
                    vol[vol.dims().linear({x + st.m_roi.min.x, y + st.m_roi.min.y, z + st.m_roi.min.z})];
    const auto [lo, hi] = std::minmax_element(st.m_features.begin(), st.m_features.end());
    st.m_max_delta = *hi - *lo;

    st.m_labels.assign(n, 0);
    st.m_strengths.assign(n, 0.0f);
    st.m_queued.assign(n, 0);

    const auto offsets = neighbor_offsets(config.neighborhood);
    for (const auto& o : offsets)
        st.m_linear_offsets.push_back(o.x + static_cast<std::ptrdiff_t>(e.nx) * (o.y + static_cast<std::ptrdiff_t>(e.ny) * o.z));

    constexpr std::uint32_t initial_stamp = 1;
    for (const auto& [index, label] : seed_list) {
        const Index3 g = vol.dims().coords(index);
        const auto p = static_cast<std::uint32_t>(e.linear({g.x - st.m_roi.min.x, g.y - st.m_roi.min.y, g.z - st.m_roi.min.z}));
        st.m_labels[p] = label;
        st.m_strengths[p] = 1.0f;
        if (st.m_queued[p] != initial_stamp) {
            st.m_queued[p] = initial_stamp;
            st.m_active.push_back(p);
        }
        for_each_neighbor(e, offsets, st.m_linear_offsets, p, [&](std::size_t, std::uint32_t q) {
            if (st.m_queued[q] != initial_stamp) {
                st.m_queued[q] = initial_stamp;
                st.m_active.push_back(q);
            }
        });
    }
    std::sort(st.m_active.begin(), st.m_active.end());

    if (config.precompute_similarity)
        st.build_similarity_table();
    return st;
}

void AutomatonState::build_similarity_table() {
    const auto offsets = neighbor_offsets(m_neighborhood);
    const std::size_t half = offsets.size() / 2;
    m_edges.assign(m_extent.voxel_count() * half, 0.0f);
    for (std::uint32_t p = 0; p < m_extent.voxel_count(); ++p)
        for_each_neighbor(m_extent, offsets, m_linear_offsets, p, [&](std::size_t k, std::uint32_t q) {
            if (k >= half)
                m_edges[static_cast<std::size_t>(p) * half + (k - half)] = similarity(m_features[p], m_features[q], m_max_delta);
        });
}

float AutomatonState::edge(std::uint32_t p, std::uint32_t q, std::size_t k) const {
    if (m_edges.empty())
        return similarity(m_features[p], m_features[q], m_max_delta);
    const std::size_t count = m_linear_offsets.size();
    const std::size_t half = count / 2;
    if (k >= half)
        return m_edges[static_cast<std::size_t>(p) * half + (k - half)];
    // Backward neighbour: the pair is stored at q under the opposite offset.
    return m_edges[static_cast<std::size_t>(q) * half + (count - 1 - k - half)];
}

void AutomatonState::evaluate(std::span<const std::uint32_t> voxels, std::vector<Change>& out) const {
    const auto offsets = neighbor_offsets(m_neighborhood);
    for (const std::uint32_t p : voxels) {
        float best = -1.0f;
        Label best_label = 0;
        for_each_neighbor(m_extent, offsets, m_linear_offsets, p, [&](std::size_t k, std::uint32_t q) {
            const float theta_q = m_strengths[q];
            if (theta_q <= 0.0f)
                return;
            const float attack = edge(p, q, k) * theta_q;
            if (attack > best || (attack == best && m_labels[q] < best_label)) {
                best = attack;
                best_label = m_labels[q];
            }
        });
        if (best > m_strengths[p])
            out.push_back({p, best_label, best});
    }
}

std::size_t step(AutomatonState& st) {
    ++st.m_iteration;
    if (st.m_active.empty())
        return 0;

    // Contiguous z-slabs of the ROI, one per worker. Reads during evaluation
    // touch only the committed state, so slabs need no synchronisation.
    const int slabs = std::max(1, std::min(st.m_workers, st.m_extent.nz));
    const std::size_t plane = static_cast<std::size_t>(st.m_extent.nx) * st.m_extent.ny;
    std::vector<std::span<const std::uint32_t>> ranges;
    auto begin = st.m_active.cbegin();
    for (int s = 0; s < slabs; ++s) {
        const auto z_end = static_cast<std::size_t>(st.m_extent.nz) * (s + 1) / slabs;
        const auto end = s + 1 == slabs ? st.m_active.cend()
                                        : std::lower_bound(begin, st.m_active.cend(), static_cast<std::uint32_t>(z_end * plane));
        ranges.emplace_back(begin, end);
        begin = end;
    }

    std::vector<std::vector<AutomatonState::Change>> changes(ranges.size());
    if (ranges.size() == 1) {
        st.evaluate(ranges[0], changes[0]);
    } else {
        std::vector<std::jthread> team;
        team.reserve(ranges.size());
        for (std::size_t s = 0; s < ranges.size(); ++s)
            team.emplace_back([&st, &ranges, &changes, s] { st.evaluate(ranges[s], changes[s]); });
    }

    const auto stamp = static_cast<std::uint32_t>(st.m_iteration + 1);
    const auto offsets = neighbor_offsets(st.m_neighborhood);
    std::vector<std::uint32_t> next;
    std::size_t changed = 0;
    auto enqueue = [&](std::uint32_t v) {
        if (st.m_queued[v] != stamp) {
            st.m_queued[v] = stamp;
            next.push_back(v);
        }
    };
    for (const auto& slab : changes)
        for (const auto& c : slab) {
            st.m_labels[c.index] = c.label;
            st.m_strengths[c.index] = c.strength;
            ++changed;
            enqueue(c.index);
            for_each_neighbor(st.m_extent, offsets, st.m_linear_offsets, c.index,
                              [&](std::size_t, std::uint32_t q) { enqueue(q); });
        }
    std::sort(next.begin(), next.end());
    st.m_active = std::move(next);
    return changed;
}

LabelVolume AutomatonState::to_label_volume(const Dims& dims, const Geometry& geometry) const {
    std::vector<Label> out(dims.voxel_count(), 0);
    for (int z = 0; z < m_extent.nz; ++z)
        for (int y = 0; y < m_extent.ny; ++y)
            for (int x = 0; x < m_extent.nx; ++x)
                out[dims.linear({x + m_roi.min.x, y + m_roi.min.y, z + m_roi.min.z})] = m_labels[m_extent.linear({x, y, z})];
    return LabelVolume(dims, geometry, std::move(out));
}

RunResult run(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config) {
    const auto t0 = std::chrono::steady_clock::now();
    AutomatonState state = initialize(vol, seeds, config);

    RunStats stats;
    stats.roi = state.roi();
    const int cap = config.max_iterations.value_or(default_max_iterations(state.roi()));
    while (stats.iterations < cap) {
        const std::size_t changed = step(state);
        ++stats.iterations;
        stats.changed_per_iteration.push_back(changed);
        if (changed == 0) {
            stats.converged = true;
            break;
        }
    }
    auto labels = state.to_label_volume(vol.dims(), vol.geometry());
    stats.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(labels), std::move(stats)};
}

} // namespace seedseg::growcut
