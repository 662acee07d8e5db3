#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seedseg/volume.hpp"

namespace seedseg::metrics {

/// Dice similarity coefficient 2|A n B| / (|A| + |B|) of two binary masks, as
/// a fraction. Two empty masks agree perfectly (1.0).
double dsc(const LabelVolume& a, const LabelVolume& b);

enum class Deviation { sample, population };

struct SummaryStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    // Absent for a single value under the sample convention.
    std::optional<double> std;
};

SummaryStats summarize(std::span<const double> values, Deviation convention = Deviation::sample);

/// One case of a manual-vs-automatic comparison study.
struct StudyRecord {
    int case_id = 0;
    double manual_volume_mm3 = 0.0;
    double auto_volume_mm3 = 0.0;
    long long manual_voxels = 0;
    long long auto_voxels = 0;
    double dsc_percent = 0.0;

    void validate() const;
};

struct StudyReport {
    std::vector<StudyRecord> records;
    SummaryStats manual_volume_cm3;
    SummaryStats auto_volume_cm3;
    // Voxel-count rows are printed without a deviation.
    SummaryStats manual_voxels;
    SummaryStats auto_voxels;
    SummaryStats dsc_percent;
};

StudyReport study_report(std::span<const StudyRecord> records);

/// Fixed-width text rendering: per-case table followed by the min / max /
/// mean +- std summary (volumes in cm^3).
std::string render_text(const StudyReport& report);

} // namespace seedseg::metrics
