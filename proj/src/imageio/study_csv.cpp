#include "seedseg/study_csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "seedseg/error.hpp"
#include "seedseg/nrrd.hpp"

namespace seedseg::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos)
            return out;
        start = comma + 1;
    }
}

template <class T>
T number(std::string_view s, const char* column, int line) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("line " + std::to_string(line) + ": cannot parse " + column + " '" + std::string(s) + "'",
                              line);
    return v;
}

std::string shortest(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace

std::vector<metrics::StudyRecord> parse_study_csv(std::string_view text) {
    std::vector<metrics::StudyRecord> out;
    int line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF"))
            line.remove_prefix(3);
        line = trim(line);
        if (line.empty())
            continue;
        if (!header_seen) {
            std::string compact;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c)))
                    compact += c;
            if (compact != k_study_csv_header)
                throw ValidationError("line " + std::to_string(line_no) + ": expected header '" +
                                          std::string(k_study_csv_header) + "'",
                                      line_no);
            header_seen = true;
            continue;
        }
        const auto f = split(line);
        if (f.size() != 6)
            throw ValidationError("line " + std::to_string(line_no) + ": expected 6 fields, got " + std::to_string(f.size()),
                                  line_no);
        metrics::StudyRecord r;
        r.case_id = number<int>(f[0], "case_id", line_no);
        r.manual_volume_mm3 = number<double>(f[1], "manual_mm3", line_no);
        r.auto_volume_mm3 = number<double>(f[2], "auto_mm3", line_no);
        r.manual_voxels = number<long long>(f[3], "manual_voxels", line_no);
        r.auto_voxels = number<long long>(f[4], "auto_voxels", line_no);
        r.dsc_percent = number<double>(f[5], "dsc_percent", line_no);
        try {
            r.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        out.push_back(r);
    }
    if (!header_seen)
        throw ValidationError("study CSV is empty");
    return out;
}

std::string format_study_csv(std::span<const metrics::StudyRecord> records) {
    std::string out(k_study_csv_header);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.case_id) + "," + shortest(r.manual_volume_mm3) + "," + shortest(r.auto_volume_mm3) + "," +
               std::to_string(r.manual_voxels) + "," + std::to_string(r.auto_voxels) + "," + fixed(r.dsc_percent, 2) +
               "\n";
    }
    return out;
}

std::string format_summary_csv(const metrics::StudyReport& report) {
    std::string out = "statistic,manual_cm3,auto_cm3,manual_voxels,auto_voxels,dsc_percent\n";
    using S = metrics::SummaryStats;
    const auto row = [&](const char* name, auto pick, int vol_dec, int vox_dec) {
        out += std::string(name) + "," + pick(report.manual_volume_cm3, vol_dec) + "," +
               pick(report.auto_volume_cm3, vol_dec) + "," + pick(report.manual_voxels, vox_dec) + "," +
               pick(report.auto_voxels, vox_dec) + "," + pick(report.dsc_percent, 2) + "\n";
    };
    row("min", [](const S& s, int d) { return fixed(s.min, d); }, 2, 0);
    row("max", [](const S& s, int d) { return fixed(s.max, d); }, 2, 0);
    row("mean", [](const S& s, int d) { return fixed(s.mean, d); }, 2, 1);
    row("std", [](const S& s, int d) { return s.std ? fixed(*s.std, d) : std::string(); }, 2, 1);
    return out;
}

std::vector<metrics::StudyRecord> read_study_csv(const std::filesystem::path& path) {
    return parse_study_csv(read_file(path));
}

void write_study_csv(std::span<const metrics::StudyRecord> records, const std::filesystem::path& path) {
    write_file(path, format_study_csv(records));
}

} // namespace seedseg::io
