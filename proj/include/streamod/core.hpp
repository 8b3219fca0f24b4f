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

#ifndef STREAMOD_CORE_HPP_
#define STREAMOD_CORE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace streamod {

using ObjectId = std::uint64_t;
using Tick = std::int64_t;
using PartitionId = std::uint32_t;

/// Raised for caller mistakes: bad configuration, violated preconditions.
class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an engine invariant is broken (barrier violations, corrupted state).
class InternalError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Largest supported dimensionality. Points are stored inline.
inline constexpr std::size_t kMaxDims = 8;

/**
 * @brief Fixed-capacity coordinate vector. Value type, cheap to copy.
 */
class Point {
  public:
    Point() = default;

    Point(std::initializer_list<double> coords) : Point(std::span<const double>(coords.begin(), coords.size())) {}

    explicit Point(std::span<const double> coords) {
        if (coords.size() > kMaxDims) {
            throw UsageError("point dimensionality " + std::to_string(coords.size()) + " exceeds the supported maximum of "
                             + std::to_string(kMaxDims));
        }
        dims_ = static_cast<std::uint8_t>(coords.size());
        std::copy(coords.begin(), coords.end(), coords_.begin());
    }

    [[nodiscard]] std::size_t size() const { return dims_; }
    [[nodiscard]] bool empty() const { return dims_ == 0; }

    double operator[](std::size_t i) const { return coords_[i]; }
    double& operator[](std::size_t i) { return coords_[i]; }

    [[nodiscard]] const double* begin() const { return coords_.data(); }
    [[nodiscard]] const double* end() const { return coords_.data() + dims_; }

    friend bool operator==(const Point& a, const Point& b) {
        return a.dims_ == b.dims_ && std::equal(a.begin(), a.end(), b.begin());
    }

  private:
    std::array<double, kMaxDims> coords_{};
    std::uint8_t dims_ = 0;
};

enum class Metric { euclidean, manhattan, chebyshev };

namespace detail {

[[noreturn, gnu::noinline, gnu::cold]] inline void dimension_mismatch(std::size_t a, std::size_t b) {
    throw UsageError("distance between points of dimensionality " + std::to_string(a) + " and " + std::to_string(b));
}

}  // namespace detail

/// Distance between two points. Symmetric bit-for-bit: every term is a function of |a_i - b_i|.
inline double distance(const Point& a, const Point& b, Metric metric = Metric::euclidean) {
    if (a.size() != b.size()) [[unlikely]] detail::dimension_mismatch(a.size(), b.size());
    const std::size_t n = a.size();
    switch (metric) {
    case Metric::manhattan: {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += std::fabs(a[i] - b[i]);
        return sum;
    }
    case Metric::chebyshev: {
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) best = std::max(best, std::fabs(a[i] - b[i]));
        return best;
    }
    case Metric::euclidean:
    default: {
        if (n == 1) return std::fabs(a[0] - b[0]);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    }
    }
}

/// Callable wrapper around a runtime metric selection; the default distance type of every index.
struct Distance {
    Metric metric = Metric::euclidean;
    double operator()(const Point& a, const Point& b) const { return distance(a, b, metric); }
};

/// Tolerance added to triangle-inequality pruning bounds. Pruning only, never to the final ≤ R test.
inline double pruning_slack(double magnitude) { return 1e-9 * (1.0 + std::fabs(magnitude)); }

inline Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "manhattan") return Metric::manhattan;
    if (name == "chebyshev") return Metric::chebyshev;
    throw UsageError("unknown metric '" + name + "' (expected euclidean, manhattan or chebyshev)");
}

inline const char* to_string(Metric m) {
    switch (m) {
    case Metric::manhattan: return "manhattan";
    case Metric::chebyshev: return "chebyshev";
    default: return "euclidean";
    }
}

/**
 * @brief A timestamped point plus the neighbor metadata shared by all exact-Storm style processors.
 *
 * nn_before is kept sorted ascending and holds at most k arrival timestamps, all strictly older than t.
 * Neighbors with the same timestamp expire together with the object and are counted in count_after.
 */
struct StreamObject {
    ObjectId id = 0;
    Point value;
    Tick t = 0;
    std::uint8_t flag = 0;
    PartitionId partition = 0;
    std::uint32_t count_after = 0;
    std::vector<Tick> nn_before;

    void reset_metadata() {
        count_after = 0;
        nn_before.clear();
    }
};

/// Inserts a preceding-neighbor timestamp, keeping only the k most recent.
inline void record_preceding(std::vector<Tick>& nn_before, Tick ts, std::size_t k) {
    if (k == 0) return;
    if (nn_before.size() >= k) {
        if (ts <= nn_before.front()) return;
        nn_before.erase(nn_before.begin());
    }
    nn_before.insert(std::upper_bound(nn_before.begin(), nn_before.end(), ts), ts);
}

/// Records that `o` has a neighbor that arrived at `neighbor_t`.
inline void count_neighbor(StreamObject& o, Tick neighbor_t, std::size_t k) {
    if (neighbor_t < o.t) {
        record_preceding(o.nn_before, neighbor_t, k);
    } else {
        ++o.count_after;
    }
}

/// Entries of nn_before that are still inside the window starting at w_start.
inline std::vector<Tick> prune_nn_before(std::span<const Tick> nn_before, Tick w_start) {
    std::vector<Tick> alive;
    for (Tick ts : nn_before) {
        if (ts >= w_start) alive.push_back(ts);
    }
    return alive;
}

/// Number of alive entries; nn_before is sorted so this is a binary search.
inline std::size_t alive_preceding(std::span<const Tick> nn_before, Tick w_start) {
    return static_cast<std::size_t>(nn_before.end() - std::lower_bound(nn_before.begin(), nn_before.end(), w_start));
}

inline bool is_outlier(const StreamObject& o, Tick w_start, std::size_t k) {
    return o.count_after + alive_preceding(o.nn_before, w_start) < k;
}

inline bool is_safe_inlier(const StreamObject& o, std::size_t k) { return o.count_after >= k; }

/**
 * @brief Window and detection parameters. Extents are in ticks.
 */
struct WindowConfig {
    Tick window = 0;
    Tick slide = 0;
    double radius = 0.0;
    std::size_t k = 1;
    std::size_t dims = 1;
    std::size_t partitions = 1;
    Metric metric = Metric::euclidean;

    void validate() const {
        if (slide <= 0 || window <= 0 || slide > window) {
            throw UsageError("window configuration requires 0 < S <= W (got W=" + std::to_string(window)
                             + ", S=" + std::to_string(slide) + ")");
        }
        if (window % slide != 0) {
            throw UsageError("W must be an integer multiple of S (got W=" + std::to_string(window)
                             + ", S=" + std::to_string(slide) + ")");
        }
        if (!(radius > 0.0) || !std::isfinite(radius)) throw UsageError("R must be a positive finite distance");
        if (k < 1) throw UsageError("k must be at least 1");
        if (dims < 1 || dims > kMaxDims) {
            throw UsageError("dims must be in [1, " + std::to_string(kMaxDims) + "]");
        }
        if (partitions < 1) throw UsageError("partitions must be at least 1");
    }
};

struct WindowInterval {
    Tick start = 0;
    Tick end = 0;
    std::int64_t slide_index = 0;

    [[nodiscard]] bool contains(Tick t) const { return start <= t && t < end; }

    friend bool operator==(const WindowInterval&, const WindowInterval&) = default;
};

/// The window after the arrivals of slide `slide_index` (slide j covers ticks [j*S, (j+1)*S)).
inline WindowInterval window_after_slide(const WindowConfig& cfg, std::int64_t slide_index) {
    const Tick end = (slide_index + 1) * cfg.slide;
    return WindowInterval{end - cfg.window, end, slide_index};
}

/// Slide index containing tick t (floor division, valid for negative ticks).
inline std::int64_t slide_of(Tick t, Tick slide) {
    return t >= 0 ? t / slide : -((-t + slide - 1) / slide);
}

struct OutlierReport {
    WindowInterval interval;
    std::vector<ObjectId> outliers;  ///< sorted ascending
    double slide_wall_ms = 0.0;
    std::size_t arrivals = 0;   ///< objects entering this slide
    std::size_t delivered = 0;  ///< copies delivered to partitions, owners plus replicas
    std::size_t active = 0;     ///< flag-0 objects alive after the slide

    /// Equality over content only; wall time is excluded.
    [[nodiscard]] bool same_content(const OutlierReport& other) const {
        return interval == other.interval && outliers == other.outliers && arrivals == other.arrivals
               && delivered == other.delivered && active == other.active;
    }
};

}  // namespace streamod

#endif  // STREAMOD_CORE_HPP_
