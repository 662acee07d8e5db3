#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seedseg/error.hpp"
#include "seedseg/morphology.hpp"

namespace seedseg::morphology {

namespace {

// 1D squared distance transform (lower envelope of parabolas) of the samples
// f[offset + i*stride], written back in place.
void distance_1d(std::vector<double>& f, std::size_t offset, std::size_t stride, int n, std::vector<double>& d,
                 std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto at = [&](int q) { return f[offset + static_cast<std::size_t>(q) * stride]; };
    auto intersect = [&](int q, int p) {
        return ((at(q) + double(q) * q) - (at(p) + double(p) * p)) / (2.0 * q - 2.0 * p);
    };
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        double s = intersect(q, v[k]);
        while (s <= z[k]) {
            --k;
            s = intersect(q, v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        d[q] = double(q - v[k]) * (q - v[k]) + at(v[k]);
    }
    for (int q = 0; q < n; ++q)
        f[offset + static_cast<std::size_t>(q) * stride] = d[q];
}

// Squared Euclidean distance from each pixel to the nearest pixel where
// `target(pixel)` holds.
template <class Pred>
std::vector<double> squared_edt(const Slice<Label>& s, Pred target) {
    // Large finite sentinel keeps the envelope arithmetic free of inf - inf.
    constexpr double far = 1e20;
    std::vector<double> f(s.values.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = target(s.values[i]) ? 0.0 : far;
    const int n = std::max(s.rows, s.cols);
    std::vector<double> d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    for (int r = 0; r < s.rows; ++r)
        distance_1d(f, static_cast<std::size_t>(r) * s.cols, 1, s.cols, d, v, z);
    for (int c = 0; c < s.cols; ++c)
        distance_1d(f, c, s.cols, s.rows, d, v, z);
    return f;
}

} // namespace

std::vector<double> signed_distance(const Slice<Label>& slice) {
    const double saturate = std::hypot(double(slice.rows), double(slice.cols)) + 1.0;
    const auto fg = std::count_if(slice.values.begin(), slice.values.end(), [](Label l) { return l != 0; });
    if (fg == 0)
        return std::vector<double>(slice.values.size(), -saturate);
    if (static_cast<std::size_t>(fg) == slice.values.size())
        return std::vector<double>(slice.values.size(), saturate);

    const auto to_bg = squared_edt(slice, [](Label l) { return l == 0; });
    const auto to_fg = squared_edt(slice, [](Label l) { return l != 0; });
    std::vector<double> out(slice.values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = slice.values[i] != 0 ? std::sqrt(to_bg[i]) : -std::sqrt(to_fg[i]);
    return out;
}

LabelVolume interpolate_slices(const LabelVolume& mask, Axis axis, std::span<const int> segmented_indices) {
    if (!mask.is_binary())
        throw DomainError("interpolate_slices expects a binary {0,1} mask");
    if (segmented_indices.size() < 2)
        throw PreconditionError("slice interpolation needs at least two segmented slices");
    const Dims& d = mask.dims();
    const int extent = axis_extent(d, axis);
    for (std::size_t i = 0; i < segmented_indices.size(); ++i) {
        const int s = segmented_indices[i];
        if (s < 0 || s >= extent)
            throw BoundsError("segmented slice " + std::to_string(s) + " outside " + std::string(to_string(axis)) +
                              " extent " + std::to_string(extent));
        if (i > 0 && s <= segmented_indices[i - 1])
            throw PreconditionError("segmented slice indices must be strictly increasing");
    }

    std::vector<bool> segmented(extent, false);
    for (int s : segmented_indices)
        segmented[s] = true;
    for (int k = 0; k < extent; ++k) {
        if (segmented[k])
            continue;
        const auto sl = extract_slice(mask, axis, k);
        if (std::any_of(sl.values.begin(), sl.values.end(), [](Label l) { return l != 0; }))
            throw PreconditionError("mask has foreground on unsegmented " + std::string(to_string(axis)) + " slice " +
                                    std::to_string(k));
    }

    std::vector<Label> out(mask.data().begin(), mask.data().end());
    for (std::size_t g = 0; g + 1 < segmented_indices.size(); ++g) {
        const int lo = segmented_indices[g];
        const int hi = segmented_indices[g + 1];
        if (hi - lo < 2)
            continue;
        const auto a = extract_slice(mask, axis, lo);
        const auto sd_lo = signed_distance(a);
        const auto sd_hi = signed_distance(extract_slice(mask, axis, hi));
        for (int k = lo + 1; k < hi; ++k) {
            const double w = double(k - lo) / double(hi - lo);
            for (int r = 0; r < a.rows; ++r)
                for (int c = 0; c < a.cols; ++c) {
                    const std::size_t i = static_cast<std::size_t>(r) * a.cols + c;
                    const double v = (1.0 - w) * sd_lo[i] + w * sd_hi[i];
                    out[d.linear(slice_pixel_to_voxel(axis, k, r, c))] = v >= 0.0 ? 1 : 0;
                }
        }
    }
    return LabelVolume(d, mask.geometry(), std::move(out));
}

} // namespace seedseg::morphology
