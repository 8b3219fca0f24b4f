/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#ifndef STREAMOD_IO_RUN_RECORD_HPP_
#define STREAMOD_IO_RUN_RECORD_HPP_

#include <streamod/core.hpp>
#include <streamod/runtime.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace streamod {

struct SlideRecord {
    std::int64_t slide = 0;
    Tick start = 0;
    Tick end = 0;
    std::size_t arrivals = 0;
    std::size_t delivered = 0;
    std::size_t active = 0;
    std::size_t outliers = 0;
    double wall_ms = 0.0;

    friend bool operator==(const SlideRecord&, const SlideRecord&) = default;
};

/// Config echo, run metrics and per-slide rows of one run.
struct RunRecord {
    std::vector<std::pair<std::string, std::string>> config;
    double mean_slide_ms = 0.0;
    double median_slide_ms = 0.0;
    double throughput = 0.0;
    double replication = 0.0;
    double outlier_percent = 0.0;
    std::size_t slides_run = 0;
    std::vector<SlideRecord> slides;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline RunRecord make_run_record(std::vector<std::pair<std::string, std::string>> config, const RunResult& run) {
    RunRecord r;
    r.config = std::move(config);
    r.mean_slide_ms = run.metrics.mean_slide_ms;
    r.median_slide_ms = run.metrics.median_slide_ms;
    r.throughput = run.metrics.throughput;
    r.replication = run.metrics.replication;
    r.outlier_percent = 100.0 * run.metrics.outlier_fraction;
    r.slides_run = run.reports.size();
    for (const auto& rep : run.reports) {
        r.slides.push_back(SlideRecord{rep.interval.slide_index, rep.interval.start, rep.interval.end, rep.arrivals,
                                       rep.delivered, rep.active, rep.outliers.size(), rep.slide_wall_ms});
    }
    return r;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

inline constexpr const char* kMetricColumns[] = {"mean_slide_ms", "median_slide_ms", "throughput_obj_per_s",
                                                 "replication_factor", "outlier_percent", "slides_run"};
inline constexpr const char* kSlideHeader = "slide,start,end,arrivals,delivered,active,outliers,wall_ms";

}  // namespace detail

inline void write_summary(std::ostream& out, const RunRecord& r) {
    std::string header;
    std::string row;
    for (const auto& [k, v] : r.config) {
        header += detail::csv_quote(k) + ",";
        row += detail::csv_quote(v) + ",";
    }
    for (std::size_t i = 0; i < std::size(detail::kMetricColumns); ++i) {
        header += std::string(detail::kMetricColumns[i]) + (i + 1 < std::size(detail::kMetricColumns) ? "," : "");
    }
    row += detail::format_double(r.mean_slide_ms) + "," + detail::format_double(r.median_slide_ms) + ","
           + detail::format_double(r.throughput) + "," + detail::format_double(r.replication) + ","
           + detail::format_double(r.outlier_percent) + "," + std::to_string(r.slides_run);
    out << header << "\n" << row << "\n";
}

inline void write_slides(std::ostream& out, const RunRecord& r) {
    out << detail::kSlideHeader << "\n";
    for (const auto& s : r.slides) {
        out << s.slide << "," << s.start << "," << s.end << "," << s.arrivals << "," << s.delivered << ","
            << s.active << "," << s.outliers << "," << detail::format_double(s.wall_ms) << "\n";
    }
}

inline RunRecord parse_run_record(std::istream& summary, std::istream& slides) {
    RunRecord r;
    std::string header;
    std::string row;
    if (!std::getline(summary, header) || !std::getline(summary, row)) {
        throw UsageError("run record summary needs a header and a data row");
    }
    const auto keys = detail::csv_fields(header);
    const auto vals = detail::csv_fields(row);
    const std::size_t m = std::size(detail::kMetricColumns);
    if (keys.size() != vals.size() || keys.size() < m) throw UsageError("malformed run record summary");
    const std::size_t nconfig = keys.size() - m;
    for (std::size_t i = 0; i < nconfig; ++i) r.config.emplace_back(keys[i], vals[i]);
    for (std::size_t i = 0; i < m; ++i) {
        if (keys[nconfig + i] != detail::kMetricColumns[i]) {
            throw UsageError("unexpected summary column '" + keys[nconfig + i] + "'");
        }
    }
    r.mean_slide_ms = std::stod(vals[nconfig]);
    r.median_slide_ms = std::stod(vals[nconfig + 1]);
    r.throughput = std::stod(vals[nconfig + 2]);
    r.replication = std::stod(vals[nconfig + 3]);
    r.outlier_percent = std::stod(vals[nconfig + 4]);
    r.slides_run = std::stoull(vals[nconfig + 5]);

    std::string line;
    if (!std::getline(slides, line) || line != detail::kSlideHeader) throw UsageError("malformed slides header");
    while (std::getline(slides, line)) {
        if (line.empty()) continue;
        const auto f = detail::csv_fields(line);
        if (f.size() != 8) throw UsageError("malformed slides row: " + line);
        r.slides.push_back(SlideRecord{std::stoll(f[0]), std::stoll(f[1]), std::stoll(f[2]), std::stoull(f[3]),
                                       std::stoull(f[4]), std::stoull(f[5]), std::stoull(f[6]), std::stod(f[7])});
    }
    return r;
}

/// Writes summary.csv and slides.csv into dir, creating it if needed.
inline void write_run_record(const std::filesystem::path& dir, const RunRecord& r) {
    std::filesystem::create_directories(dir);
    std::ofstream summary(dir / "summary.csv");
    std::ofstream slides(dir / "slides.csv");
    if (!summary || !slides) throw UsageError("cannot write run record into '" + dir.string() + "'");
    write_summary(summary, r);
    write_slides(slides, r);
}

inline RunRecord read_run_record(const std::filesystem::path& dir) {
    std::ifstream summary(dir / "summary.csv");
    std::ifstream slides(dir / "slides.csv");
    if (!summary || !slides) throw UsageError("cannot read run record from '" + dir.string() + "'");
    return parse_run_record(summary, slides);
}

}  // namespace streamod

#endif  // STREAMOD_IO_RUN_RECORD_HPP_
