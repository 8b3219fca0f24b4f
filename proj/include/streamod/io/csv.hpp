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

#ifndef STREAMOD_IO_CSV_HPP_
#define STREAMOD_IO_CSV_HPP_

#include <streamod/core.hpp>
#include <streamod/stream.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace streamod {

/// Dataset description. Columns are 0-based; an empty selection means every column.
struct DatasetSpec {
    std::string path;
    char delimiter = ',';
    std::vector<std::size_t> columns;
    bool header = false;
    bool normalize = false;              ///< min-max per selected dimension into [0, 1]
    std::optional<std::size_t> time_column;  ///< native integer timestamps, otherwise count-based
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            return cells;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

[[noreturn]] inline void cell_error(std::size_t row, std::size_t column, const std::string& what) {
    throw UsageError("csv row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what);
}

inline double parse_double(std::string_view cell, std::size_t row, std::size_t column) {
    if (cell.empty()) cell_error(row, column, "empty cell");
    double v = 0.0;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        cell_error(row, column, "not a finite number: '" + std::string(cell) + "'");
    }
    return v;
}

inline Tick parse_tick(std::string_view cell, std::size_t row, std::size_t column) {
    Tick v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        cell_error(row, column, "not an integer timestamp: '" + std::string(cell) + "'");
    }
    return v;
}

}  // namespace detail

/// Parsed rows: values plus native timestamps when a time column is configured. Rows are 0-based data rows.
struct CsvData {
    std::vector<Point> values;
    std::vector<Tick> times;
};

inline CsvData read_csv(std::istream& in, const DatasetSpec& spec) {
    CsvData data;
    std::string line;
    std::size_t row = 0;
    std::optional<std::size_t> width;
    if (spec.header) std::getline(in, line);
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, spec.delimiter);
        if (width && cells.size() != *width) {
            detail::cell_error(row, cells.size(), "expected " + std::to_string(*width) + " columns, found "
                                                      + std::to_string(cells.size()));
        }
        width = cells.size();
        std::vector<std::size_t> cols = spec.columns;
        if (cols.empty()) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (!spec.time_column || c != *spec.time_column) cols.push_back(c);
            }
        }
        if (cols.size() > kMaxDims) {
            throw UsageError("at most " + std::to_string(kMaxDims) + " dimensions are supported");
        }
        std::vector<double> v;
        v.reserve(cols.size());
        for (std::size_t c : cols) {
            if (c >= cells.size()) detail::cell_error(row, c, "column out of range");
            v.push_back(detail::parse_double(cells[c], row, c));
        }
        data.values.emplace_back(std::span<const double>(v));
        if (spec.time_column) {
            if (*spec.time_column >= cells.size()) detail::cell_error(row, *spec.time_column, "column out of range");
            data.times.push_back(detail::parse_tick(cells[*spec.time_column], row, *spec.time_column));
        }
        ++row;
    }
    if (spec.normalize && !data.values.empty()) {
        const std::size_t d = data.values.front().size();
        for (std::size_t j = 0; j < d; ++j) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& p : data.values) {
                lo = std::min(lo, p[j]);
                hi = std::max(hi, p[j]);
            }
            const double span = hi - lo;
            for (auto& p : data.values) p[j] = span > 0.0 ? (p[j] - lo) / span : 0.0;
        }
    }
    return data;
}

inline CsvData read_csv_file(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw UsageError("cannot open dataset '" + spec.path + "'");
    return read_csv(in, spec);
}

inline std::vector<Point> read_csv_values(const DatasetSpec& spec) { return read_csv_file(spec).values; }

/// Objects in row order. Without a time column, count-based ticks come from W_count and S_count.
inline StreamSource read_csv_stream(const DatasetSpec& spec, std::size_t window_count, std::size_t slide_count) {
    CsvData data = read_csv_file(spec);
    if (!spec.time_column) return make_count_source(data.values, window_count, slide_count);
    StreamSource src;
    src.mode = ArrivalMode::native;
    src.objects.resize(data.values.size());
    for (std::size_t i = 0; i < data.values.size(); ++i) {
        src.objects[i].id = i;
        src.objects[i].value = data.values[i];
        src.objects[i].t = data.times[i];
    }
    src.validate();
    return src;
}

}  // namespace streamod

#endif  // STREAMOD_IO_CSV_HPP_
