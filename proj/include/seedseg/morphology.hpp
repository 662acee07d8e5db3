#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seedseg/volume.hpp"

// Binary post-editing of segmentation masks. The structuring element is the
// connectivity neighbourhood; voxels outside the volume count as background.
namespace seedseg::morphology {

LabelVolume dilate(const LabelVolume& mask, Connectivity connectivity, int iterations = 1);
LabelVolume erode(const LabelVolume& mask, Connectivity connectivity, int iterations = 1);

struct IslandPolicy {
    enum class Kind { keep_largest, min_size };
    Kind kind = Kind::keep_largest;
    std::size_t min_size = 0;

    static IslandPolicy keep_largest() { return {}; }
    static IslandPolicy at_least(std::size_t k) { return {Kind::min_size, k}; }
};

struct Components {
    // Component id per voxel, 0 for background; ids start at 1 in order of
    // each component's first voxel in storage order.
    std::vector<std::uint32_t> ids;
    // sizes[id - 1]
    std::vector<std::size_t> sizes;
};

Components connected_components(const LabelVolume& mask, Connectivity connectivity);

/// keep_largest keeps one component of maximal size; among equal sizes the one
/// holding the lexicographically smallest (x, y, z) voxel wins.
LabelVolume remove_islands(const LabelVolume& mask, Connectivity connectivity, IslandPolicy policy);

/// Fills the slices between consecutive segmented slices by blending the 2D
/// signed distance maps of the two bounding slices linearly and keeping the
/// non-negative level set. Segmented slices are copied; slices outside the
/// segmented range stay empty.
LabelVolume interpolate_slices(const LabelVolume& mask, Axis axis, std::span<const int> segmented_indices);

/// Signed Euclidean distance map of a 2D binary image, in pixels: inside
/// pixels hold the distance to the nearest background pixel (>= 1), outside
/// pixels minus the distance to the nearest foreground pixel. Uniform images
/// saturate at +-(diagonal + 1).
std::vector<double> signed_distance(const Slice<Label>& slice);

/// One stage of a post-edit pipeline such as "dilate:1,erode:1,islands:keep_largest".
struct PostEditOp {
    enum class Kind { dilate, erode, islands };
    Kind kind = Kind::dilate;
    int iterations = 1;
    IslandPolicy islands;

    std::string to_string() const;
};

/// Parses a comma-separated pipeline. Accepted tokens: dilate:N, erode:N,
/// islands:keep_largest, islands:min_size=K. An empty string is an empty
/// pipeline. Unknown tokens raise ValidationError naming the token.
std::vector<PostEditOp> parse_pipeline(std::string_view text);

LabelVolume apply_pipeline(const LabelVolume& mask, std::span<const PostEditOp> ops, Connectivity connectivity);

} // namespace seedseg::morphology
