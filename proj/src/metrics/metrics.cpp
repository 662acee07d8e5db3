#include "seedseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "seedseg/error.hpp"

namespace seedseg::metrics {

double dsc(const LabelVolume& a, const LabelVolume& b) {
    if (a.dims() != b.dims())
        throw ShapeError("DSC needs masks of identical dimensions");
    if (!a.is_binary() || !b.is_binary())
        throw DomainError("DSC expects binary {0,1} masks");
    std::size_t na = 0, nb = 0, both = 0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        na += da[i];
        nb += db[i];
        both += da[i] & db[i];
    }
    if (na + nb == 0)
        return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

SummaryStats summarize(std::span<const double> values, Deviation convention) {
    if (values.empty())
        throw PreconditionError("cannot summarise an empty list");
    SummaryStats s;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;

    const double denom = convention == Deviation::sample ? n - 1.0 : n;
    if (denom > 0.0) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / denom);
    }
    return s;
}

void StudyRecord::validate() const {
    const std::string id = "case " + std::to_string(case_id) + ": ";
    if (!(manual_volume_mm3 >= 0.0) || !(auto_volume_mm3 >= 0.0))
        throw ValidationError(id + "volumes must be >= 0");
    if (manual_voxels < 0 || auto_voxels < 0)
        throw ValidationError(id + "voxel counts must be >= 0");
    if (!(dsc_percent >= 0.0 && dsc_percent <= 100.0))
        throw ValidationError(id + "DSC must lie in [0, 100] percent");
}

StudyReport study_report(std::span<const StudyRecord> records) {
    if (records.empty())
        throw PreconditionError("study report needs at least one record");
    StudyReport r;
    r.records.assign(records.begin(), records.end());

    std::vector<double> man_cm3, auto_cm3, man_vox, auto_vox, dsc;
    for (const auto& rec : records) {
        rec.validate();
        man_cm3.push_back(rec.manual_volume_mm3 / 1000.0);
        auto_cm3.push_back(rec.auto_volume_mm3 / 1000.0);
        man_vox.push_back(static_cast<double>(rec.manual_voxels));
        auto_vox.push_back(static_cast<double>(rec.auto_voxels));
        dsc.push_back(rec.dsc_percent);
    }
    r.manual_volume_cm3 = summarize(man_cm3);
    r.auto_volume_cm3 = summarize(auto_cm3);
    r.manual_voxels = summarize(man_vox);
    r.auto_voxels = summarize(auto_vox);
    r.manual_voxels.std.reset();
    r.auto_voxels.std.reset();
    r.dsc_percent = summarize(dsc);
    return r;
}

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string mean_std(const SummaryStats& s, const char* pattern) {
    std::string out = fmt(pattern, s.mean);
    if (s.std)
        out += " +- " + fmt(pattern, *s.std);
    return out;
}

} // namespace

std::string render_text(const StudyReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %14s %14s %14s %14s %10s\n", "case", "manual_mm3", "auto_mm3",
                  "manual_vox", "auto_vox", "dsc_%");
    os << line;
    for (const auto& r : report.records) {
        std::snprintf(line, sizeof line, "%-6d %14.3f %14.3f %14lld %14lld %10.2f\n", r.case_id, r.manual_volume_mm3,
                      r.auto_volume_mm3, r.manual_voxels, r.auto_voxels, r.dsc_percent);
        os << line;
    }
    os << "\nsummary (volumes in cm^3, n=" << report.records.size() << ")\n";
    std::snprintf(line, sizeof line, "%-10s %18s %18s %12s %12s %16s\n", "", "manual_cm3", "auto_cm3", "manual_vox",
                  "auto_vox", "dsc_%");
    os << line;
    const auto row = [&](const char* name, double mv, double av, double mx, double ax, double d) {
        std::snprintf(line, sizeof line, "%-10s %18.2f %18.2f %12.0f %12.0f %16.2f\n", name, mv, av, mx, ax, d);
        os << line;
    };
    row("min", report.manual_volume_cm3.min, report.auto_volume_cm3.min, report.manual_voxels.min,
        report.auto_voxels.min, report.dsc_percent.min);
    row("max", report.manual_volume_cm3.max, report.auto_volume_cm3.max, report.manual_voxels.max,
        report.auto_voxels.max, report.dsc_percent.max);
    std::snprintf(line, sizeof line, "%-10s %18s %18s %12s %12s %16s\n", "mean+-std",
                  mean_std(report.manual_volume_cm3, "%.2f").c_str(), mean_std(report.auto_volume_cm3, "%.2f").c_str(),
                  mean_std(report.manual_voxels, "%.1f").c_str(), mean_std(report.auto_voxels, "%.1f").c_str(),
                  mean_std(report.dsc_percent, "%.2f").c_str());
    os << line;
    return os.str();
}

} // namespace seedseg::metrics
