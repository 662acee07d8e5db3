#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seedseg/metrics.hpp"

namespace seedseg::io {

/// Header line of a study CSV; columns are fixed.
inline constexpr std::string_view k_study_csv_header = "case_id,manual_mm3,auto_mm3,manual_voxels,auto_voxels,dsc_percent";

/// Parses a study CSV. The header must match exactly; every row needs six
/// fields. Errors raise ValidationError carrying the 1-based line number.
std::vector<metrics::StudyRecord> parse_study_csv(std::string_view text);
std::string format_study_csv(std::span<const metrics::StudyRecord> records);

/// statistic,manual_cm3,auto_cm3,manual_voxels,auto_voxels,dsc_percent with
/// rows min, max, mean, std (std cells left empty where not reported).
std::string format_summary_csv(const metrics::StudyReport& report);

std::vector<metrics::StudyRecord> read_study_csv(const std::filesystem::path& path);
void write_study_csv(std::span<const metrics::StudyRecord> records, const std::filesystem::path& path);

} // namespace seedseg::io
