#pragma once

// Shared helpers for the test suites: random volumes and masks, temporary
// directories. Nothing here calls into the code under test beyond the value
// types.

#include <filesystem>
#include <random>
#include <string>

#include "seedseg/volume.hpp"

namespace seedseg::testing {

inline LabelVolume random_mask(const Dims& d, double density, std::mt19937& rng) {
    std::bernoulli_distribution bit(density);
    std::vector<Label> v(d.voxel_count());
    for (auto& x : v)
        x = bit(rng) ? 1 : 0;
    return LabelVolume(d, {}, std::move(v));
}

inline ScalarVolume random_volume(const Dims& d, std::mt19937& rng, float lo = 0.0f, float hi = 100.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(d.voxel_count());
    for (auto& x : v)
        x = u(rng);
    return ScalarVolume(d, {}, std::move(v));
}

inline ScalarVolume ramp_volume(const Dims& d) {
    std::vector<float> v(d.voxel_count());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<float>(i);
    return ScalarVolume(d, {}, std::move(v));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        m_path = std::filesystem::temp_directory_path() / ("seedseg-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return m_path; }
    std::filesystem::path operator/(const std::string& name) const { return m_path / name; }

  private:
    std::filesystem::path m_path;
};

} // namespace seedseg::testing
