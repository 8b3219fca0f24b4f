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

#ifndef STREAMOD_IO_ORACLE_HPP_
#define STREAMOD_IO_ORACLE_HPP_

#include <streamod/core.hpp>
#include <streamod/stream.hpp>

#include <algorithm>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace streamod {

/// Neighbor count of every object: number of others within R (closed ball). O(n^2).
inline std::vector<std::size_t> brute_force_neighbor_counts(std::span<const StreamObject> window, double R,
                                                            Metric metric = Metric::euclidean) {
    std::vector<std::size_t> counts(window.size(), 0);
    for (std::size_t i = 0; i < window.size(); ++i) {
        for (std::size_t j = i + 1; j < window.size(); ++j) {
            if (distance(window[i].value, window[j].value, metric) <= R) {
                ++counts[i];
                ++counts[j];
            }
        }
    }
    return counts;
}

/// Ids with fewer than k neighbors within R, sorted.
inline std::vector<ObjectId> brute_force_oracle(std::span<const StreamObject> window, double R, std::size_t k,
                                                Metric metric = Metric::euclidean) {
    std::vector<ObjectId> out;
    if (k == 0) return out;
    const auto counts = brute_force_neighbor_counts(window, R, metric);
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (counts[i] < k) out.push_back(window[i].id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Per-slide window contents and neighbor counts, computed once and thresholded for any k.
struct OracleTrace {
    std::vector<WindowInterval> intervals;
    std::vector<std::vector<ObjectId>> ids;
    std::vector<std::vector<std::size_t>> counts;

    [[nodiscard]] std::vector<ObjectId> outliers(std::size_t slide, std::size_t k) const {
        std::vector<ObjectId> out;
        if (k == 0) return out;
        for (std::size_t i = 0; i < ids[slide].size(); ++i) {
            if (counts[slide][i] < k) out.push_back(ids[slide][i]);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    [[nodiscard]] std::size_t slides() const { return intervals.size(); }
};

/// Replays the source slide by slide, like the runtime, and records each window's ground truth.
inline OracleTrace oracle_trace(const StreamSource& source, const WindowConfig& cfg,
                                std::optional<std::size_t> max_slides = std::nullopt) {
    OracleTrace trace;
    const auto& objs = source.objects;
    if (objs.empty()) return trace;
    std::int64_t slide = slide_of(objs.front().t, cfg.slide);
    const std::int64_t last = slide_of(objs.back().t, cfg.slide);
    for (; slide <= last && (!max_slides || trace.slides() < *max_slides); ++slide) {
        const WindowInterval w = window_after_slide(cfg, slide);
        std::vector<StreamObject> window;
        for (const auto& o : objs) {
            if (w.contains(o.t)) window.push_back(o);
        }
        std::vector<ObjectId> ids;
        for (const auto& o : window) ids.push_back(o.id);
        trace.intervals.push_back(w);
        trace.ids.push_back(std::move(ids));
        trace.counts.push_back(brute_force_neighbor_counts(window, cfg.radius, cfg.metric));
    }
    return trace;
}

struct SlideMismatch {
    std::size_t slide = 0;
    std::vector<ObjectId> missing;   ///< oracle outliers not reported
    std::vector<ObjectId> spurious;  ///< reported ids the oracle does not flag
};

/// Compares reported outlier sets with the oracle. Both inputs are per-slide sorted id lists.
inline std::vector<SlideMismatch> compare_outliers(std::span<const std::vector<ObjectId>> expected,
                                                   std::span<const std::vector<ObjectId>> actual) {
    std::vector<SlideMismatch> out;
    const std::size_t n = std::max(expected.size(), actual.size());
    static const std::vector<ObjectId> none;
    for (std::size_t s = 0; s < n; ++s) {
        const auto& e = s < expected.size() ? expected[s] : none;
        const auto& a = s < actual.size() ? actual[s] : none;
        if (e == a) continue;
        SlideMismatch m;
        m.slide = s;
        std::set_difference(e.begin(), e.end(), a.begin(), a.end(), std::back_inserter(m.missing));
        std::set_difference(a.begin(), a.end(), e.begin(), e.end(), std::back_inserter(m.spurious));
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace streamod

#endif  // STREAMOD_IO_ORACLE_HPP_
