#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg::growcut {

struct Config {
    Connectivity neighborhood = Connectivity::twenty_six;
    int roi_margin = 5;
    // Unset means 2 * ROI diagonal (in voxels), rounded up.
    std::optional<int> max_iterations;
    int workers = 1;
    bool precompute_similarity = true;

    void validate() const;
};

/// Bounding box of all seed voxels grown by `margin` on every face and clipped
/// to the volume. The box always contains the convex hull of the seeds.
RegionOfInterest compute_roi(std::span<const SeedStroke> seeds, int margin, const Dims& dims);

/// Pixel similarity g = 1 - |cp - cq| / max_delta, clamped to [0,1].
/// A constant image (max_delta == 0) is perfectly similar everywhere.
float similarity(float cp, float cq, float max_delta);

int default_max_iterations(const RegionOfInterest& roi);

/// Per-voxel automaton state over the ROI. Arrays are indexed by ROI-local
/// linear index (x-fastest over roi().extent()).
class AutomatonState {
  public:
    const RegionOfInterest& roi() const { return m_roi; }
    const Dims& extent() const { return m_extent; }
    Connectivity neighborhood() const { return m_neighborhood; }
    int workers() const { return m_workers; }
    float max_delta() const { return m_max_delta; }
    int iteration() const { return m_iteration; }

    std::span<const Label> labels() const { return m_labels; }
    std::span<const float> strengths() const { return m_strengths; }
    std::span<const float> features() const { return m_features; }
    /// Sorted ROI-local indices scheduled for the next step. Voxels outside it
    /// are saturated: none of their neighbours changed last step.
    std::span<const std::uint32_t> active() const { return m_active; }
    bool has_similarity_table() const { return !m_edges.empty(); }

    /// Labels over the full volume; voxels outside the ROI are 0.
    LabelVolume to_label_volume(const Dims& dims, const Geometry& geometry) const;

    friend AutomatonState initialize(const ScalarVolume&, std::span<const SeedStroke>, const Config&);
    friend std::size_t step(AutomatonState&);

  private:
    struct Change {
        std::uint32_t index;
        Label label;
        float strength;
    };

    void build_similarity_table();
    void evaluate(std::span<const std::uint32_t> voxels, std::vector<Change>& out) const;
    float edge(std::uint32_t p, std::uint32_t q, std::size_t offset) const;

    RegionOfInterest m_roi;
    Dims m_extent;
    Connectivity m_neighborhood = Connectivity::twenty_six;
    int m_workers = 1;
    float m_max_delta = 0.0f;
    int m_iteration = 0;

    std::vector<Label> m_labels;
    std::vector<float> m_strengths;
    std::vector<float> m_features;
    std::vector<std::uint32_t> m_active;
    // Per voxel, g for each forward (positive linear offset) neighbour.
    std::vector<float> m_edges;
    // Signed ROI-local linear offset per neighbour, canonical order.
    std::vector<std::ptrdiff_t> m_linear_offsets;
    // Marks voxels already queued for the next step.
    std::vector<std::uint32_t> m_queued;
};

/// Seeds the automaton. Requires at least two distinct labels; a voxel painted
/// with two different labels raises ConflictError listing every such voxel.
AutomatonState initialize(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config);

/// One synchronous iteration over the active set; returns how many voxels
/// changed label or strength.
///
/// Every active voxel p reads only the previous iteration's labels and
/// strengths. Each labelled neighbour q attacks with g(Cp,Cq) * strength(q);
/// the strongest attack wins, ties go to the lowest label id (equal attack and
/// label are interchangeable, so neighbour order never matters). The winner
/// conquers p only if its attack strictly exceeds strength(p). Changed voxels
/// and their neighbours form the next active set.
std::size_t step(AutomatonState& state);

struct RunStats {
    int iterations = 0;
    std::vector<std::size_t> changed_per_iteration;
    double wall_time_seconds = 0.0;
    bool converged = false;
    RegionOfInterest roi;
};

struct RunResult {
    LabelVolume labels;
    RunStats stats;
};

/// Iterates `step` until nothing changes or max_iterations is hit. The output
/// is bit-identical for every worker count.
RunResult run(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config);

/// Reference automaton: whole volume, dense sweep each iteration, similarity
/// evaluated on the fly, single thread. Only `neighborhood` and
/// `max_iterations` are read from the config.
RunResult run_naive(const ScalarVolume& vol, std::span<const SeedStroke> seeds, const Config& config);

} // namespace seedseg::growcut
