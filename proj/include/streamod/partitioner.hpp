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

#ifndef STREAMOD_PARTITIONER_HPP_
#define STREAMOD_PARTITIONER_HPP_

#include <streamod/core.hpp>
#include <streamod/index/vptree.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace streamod {

/// Where one object goes: its owner copy (flag 0) and replica copies (flag 1).
struct RoutingDecision {
    PartitionId owner = 0;
    std::vector<PartitionId> replicas;  ///< sorted, never contains owner

    [[nodiscard]] std::size_t copies() const { return 1 + replicas.size(); }

    friend bool operator==(const RoutingDecision&, const RoutingDecision&) = default;
};

/// Naive routing: owner by id modulo, replicas everywhere else.
inline RoutingDecision random_route(ObjectId id, std::size_t partitions) {
    if (partitions < 1) throw UsageError("random routing needs at least one partition");
    RoutingDecision d;
    d.owner = static_cast<PartitionId>(id % partitions);
    d.replicas.reserve(partitions - 1);
    for (std::size_t p = 0; p < partitions; ++p) {
        if (p != d.owner) d.replicas.push_back(static_cast<PartitionId>(p));
    }
    return d;
}

namespace detail {

inline void sort_unique(std::vector<PartitionId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

/**
 * @brief Grid over the sample's per-dimension equal-frequency quantiles.
 *
 * Cells are half-open [cut_{j-1}, cut_j) per dimension; the outermost cells extend to infinity so
 * out-of-sample values clamp to the edge cells. Cells map to partitions round-robin in row-major order.
 */
class GridSpec {
  public:
    static GridSpec build(std::span<const Point> sample, std::size_t partitions, double radius) {
        if (partitions < 1) throw UsageError("grid: partitions must be at least 1");
        if (!(radius > 0.0)) throw UsageError("grid: R must be positive");
        if (sample.size() < partitions) {
            throw UsageError("grid: sample of " + std::to_string(sample.size()) + " objects is smaller than "
                             + std::to_string(partitions) + " partitions");
        }
        const std::size_t dims = sample.front().size();
        for (const auto& p : sample) {
            if (p.size() != dims) throw UsageError("grid: sample mixes dimensionalities");
        }

        GridSpec spec;
        spec.radius_ = radius;
        spec.partitions_ = partitions;
        spec.cuts_.assign(dims, {});

        std::vector<double> spread(dims, 0.0);
        std::vector<std::vector<double>> columns(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            auto& col = columns[d];
            col.reserve(sample.size());
            for (const auto& p : sample) col.push_back(p[d]);
            std::sort(col.begin(), col.end());
            spread[d] = col.back() - col.front();
        }

        // Grow per-dimension cell counts, widest spread per cell first, until the grid covers every partition.
        std::vector<std::size_t> cells(dims, 1);
        auto product = [&] {
            std::size_t n = 1;
            for (auto c : cells) n *= c;
            return n;
        };
        while (product() < partitions) {
            std::size_t best = 0;
            for (std::size_t d = 1; d < dims; ++d) {
                if (spread[d] / static_cast<double>(cells[d]) > spread[best] / static_cast<double>(cells[best])) best = d;
            }
            if (!(spread[best] > 0.0)) {
                throw UsageError("grid: sample has no spread in dimension " + std::to_string(best)
                                 + "; cannot cut it into cells");
            }
            ++cells[best];
        }

        for (std::size_t d = 0; d < dims; ++d) {
            const auto& col = columns[d];
            for (std::size_t j = 1; j < cells[d]; ++j) {
                const double cut = col[j * col.size() / cells[d]];
                if (!spec.cuts_[d].empty() && !(cut > spec.cuts_[d].back())) {
                    throw UsageError("grid: quantiles of dimension " + std::to_string(d)
                                     + " collapse (too many repeated values for " + std::to_string(cells[d])
                                     + " cells)");
                }
                if (!(cut > col.front())) {
                    throw UsageError("grid: quantile cut of dimension " + std::to_string(d)
                                     + " coincides with the sample minimum");
                }
                spec.cuts_[d].push_back(cut);
            }
        }

        spec.strides_.assign(dims, 1);
        for (std::size_t d = dims; d-- > 1;) spec.strides_[d - 1] = spec.strides_[d] * cells[d];
        spec.cell_count_ = product();
        return spec;
    }

    [[nodiscard]] std::size_t dims() const { return cuts_.size(); }
    [[nodiscard]] std::size_t cell_count() const { return cell_count_; }
    [[nodiscard]] std::size_t partitions() const { return partitions_; }
    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] const std::vector<double>& cuts(std::size_t dim) const { return cuts_[dim]; }
    [[nodiscard]] PartitionId partition_of_cell(std::size_t cell) const {
        return static_cast<PartitionId>(cell % partitions_);
    }

    /// Row-major index of the cell containing value.
    [[nodiscard]] std::size_t find_cell(const Point& value) const {
        std::size_t cell = 0;
        for (std::size_t d = 0; d < dims(); ++d) cell += cell_index(d, value[d]) * strides_[d];
        return cell;
    }

    [[nodiscard]] RoutingDecision route(const Point& value) const {
        if (value.size() != dims()) {
            throw UsageError("grid: value has " + std::to_string(value.size()) + " dimensions, grid has "
                             + std::to_string(dims()));
        }
        RoutingDecision decision;
        decision.owner = partition_of_cell(find_cell(value));

        // Per dimension: owner index plus every neighboring cell whose R-expanded extent holds the value.
        std::vector<std::vector<std::size_t>> candidates(dims());
        const double reach = radius_ + pruning_slack(radius_);
        for (std::size_t d = 0; d < dims(); ++d) {
            const auto& cuts = cuts_[d];
            const double v = value[d];
            const std::size_t own = cell_index(d, v);
            auto& c = candidates[d];
            c.push_back(own);
            // cell j spans [cuts[j-1], cuts[j]); it is reachable below if v - R < cuts[j] (closed buffer).
            for (std::size_t j = own; j > 0; --j) {
                if (v - cuts[j - 1] <= reach + pruning_slack(v)) {
                    c.push_back(j - 1);
                } else {
                    break;
                }
            }
            for (std::size_t j = own + 1; j <= cuts.size(); ++j) {
                if (cuts[j - 1] - v <= reach + pruning_slack(v)) {
                    c.push_back(j);
                } else {
                    break;
                }
            }
        }

        std::vector<std::size_t> cursor(dims(), 0);
        while (true) {
            std::size_t cell = 0;
            for (std::size_t d = 0; d < dims(); ++d) cell += candidates[d][cursor[d]] * strides_[d];
            const PartitionId p = partition_of_cell(cell);
            if (p != decision.owner) decision.replicas.push_back(p);
            std::size_t d = 0;
            while (d < dims() && ++cursor[d] == candidates[d].size()) {
                cursor[d] = 0;
                ++d;
            }
            if (d == dims()) break;
        }
        detail::sort_unique(decision.replicas);
        return decision;
    }

  private:
    [[nodiscard]] std::size_t cell_index(std::size_t dim, double v) const {
        const auto& c = cuts_[dim];
        return static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), v) - c.begin());
    }

    std::vector<std::vector<double>> cuts_;
    std::vector<std::size_t> strides_;
    std::size_t cell_count_ = 1;
    std::size_t partitions_ = 1;
    double radius_ = 0.0;
};

inline GridSpec build_grid(std::span<const Point> sample, std::size_t partitions, double radius) {
    return GridSpec::build(sample, partitions, radius);
}

inline RoutingDecision grid_route(const GridSpec& spec, const Point& value) { return spec.route(value); }

/**
 * @brief Partitioning by the level-ℓ subtrees of a VP-tree built on a sample, ℓ = ⌈log2 |P|⌉.
 *
 * A value is replicated into the opposite child of every split above ℓ whose threshold lies within R
 * of the value's distance to the vantage point.
 */
class VPPartitionSpec {
  public:
    static VPPartitionSpec build(std::span<const Point> sample, std::size_t partitions, double radius,
                                 Metric metric = Metric::euclidean,
                                 std::uint64_t seed = VPTree<>::kDefaultSeed) {
        if (partitions < 1) throw UsageError("vp partitioner: partitions must be at least 1");
        if (!(radius > 0.0)) throw UsageError("vp partitioner: R must be positive");
        const std::size_t level = level_for(partitions);
        VPPartitionSpec spec{VPTree<>::build(sample, seed, Distance{metric}, level)};
        spec.radius_ = radius;
        spec.partitions_ = partitions;
        spec.level_ = level;
        if (sample.size() > 0) spec.dims_ = sample.front().size();
        std::vector<VPTree<>::NodeId> regions =
            spec.level_ == 0 ? std::vector<VPTree<>::NodeId>{spec.tree_.root()} : spec.tree_.nodes_at_level(spec.level_);
        spec.partition_of_node_.assign(spec.tree_.node_count(), 0);
        for (std::size_t j = 0; j < regions.size(); ++j) {
            spec.partition_of_node_[regions[j]] = static_cast<PartitionId>(j % partitions);
        }
        spec.regions_ = std::move(regions);
        return spec;
    }

    /// ⌈log2 partitions⌉.
    static std::size_t level_for(std::size_t partitions) {
        std::size_t level = 0;
        while ((std::size_t{1} << level) < partitions) ++level;
        return level;
    }

    [[nodiscard]] std::size_t level() const { return level_; }
    [[nodiscard]] std::size_t partitions() const { return partitions_; }
    [[nodiscard]] const std::vector<VPTree<>::NodeId>& regions() const { return regions_; }
    [[nodiscard]] const VPTree<>& tree() const { return tree_; }
    [[nodiscard]] PartitionId partition_of_region(std::size_t j) const { return partition_of_node_[regions_[j]]; }

    [[nodiscard]] RoutingDecision route(const Point& value) const {
        if (value.size() != dims_) {
            throw UsageError("vp partitioner: value has " + std::to_string(value.size()) + " dimensions, expected "
                             + std::to_string(dims_));
        }
        RoutingDecision decision;
        descend(tree_.root(), value, true, decision);
        detail::sort_unique(decision.replicas);
        decision.replicas.erase(std::remove(decision.replicas.begin(), decision.replicas.end(), decision.owner),
                                decision.replicas.end());
        return decision;
    }

  private:
    explicit VPPartitionSpec(VPTree<> tree) : tree_(std::move(tree)) {}

    void descend(VPTree<>::NodeId id, const Point& value, bool primary, RoutingDecision& out) const {
        const auto& n = tree_.node(id);
        if (n.level == level_) {
            const PartitionId p = partition_of_node_[id];
            if (primary) {
                out.owner = p;
            } else {
                out.replicas.push_back(p);
            }
            return;
        }
        const double d = tree_.dist(value, n.vantage);
        const bool inside = d <= n.threshold;
        const bool near_boundary = std::fabs(d - n.threshold) <= radius_ + pruning_slack(d + radius_);
        descend(inside ? n.inside : n.outside, value, primary, out);
        if (near_boundary) descend(inside ? n.outside : n.inside, value, false, out);
    }

    VPTree<> tree_;
    std::vector<VPTree<>::NodeId> regions_;
    std::vector<PartitionId> partition_of_node_;
    std::size_t level_ = 0;
    std::size_t partitions_ = 1;
    std::size_t dims_ = 0;
    double radius_ = 0.0;
};

inline VPPartitionSpec build_vp_partitioner(std::span<const Point> sample, std::size_t partitions, double radius,
                                            Metric metric = Metric::euclidean) {
    return VPPartitionSpec::build(sample, partitions, radius, metric);
}

inline RoutingDecision vp_route(const VPPartitionSpec& spec, const Point& value) { return spec.route(value); }

enum class Partitioning { random, grid, vptree };

inline const char* to_string(Partitioning p) {
    switch (p) {
    case Partitioning::grid: return "grid";
    case Partitioning::vptree: return "vptree";
    default: return "random";
    }
}

inline Partitioning parse_partitioning(const std::string& s) {
    if (s == "random") return Partitioning::random;
    if (s == "grid") return Partitioning::grid;
    if (s == "vptree") return Partitioning::vptree;
    throw UsageError("unknown partitioning '" + s + "' (expected random, grid or vptree)");
}

/// Immutable routing function selected at startup; safe to share between threads.
class Partitioner {
  public:
    struct Random {
        std::size_t partitions;
    };

    static Partitioner random(std::size_t partitions) { return Partitioner(Random{partitions}); }
    static Partitioner grid(GridSpec spec) { return Partitioner(std::move(spec)); }
    static Partitioner vptree(VPPartitionSpec spec) { return Partitioner(std::move(spec)); }

    static Partitioner build(Partitioning kind, std::span<const Point> sample, std::size_t partitions, double radius,
                             Metric metric) {
        switch (kind) {
        case Partitioning::grid: return grid(build_grid(sample, partitions, radius));
        case Partitioning::vptree: return vptree(build_vp_partitioner(sample, partitions, radius, metric));
        default: return random(partitions);
        }
    }

    [[nodiscard]] RoutingDecision route(ObjectId id, const Point& value) const {
        return std::visit(
            [&](const auto& s) -> RoutingDecision {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Random>) {
                    return random_route(id, s.partitions);
                } else {
                    return s.route(value);
                }
            },
            impl_);
    }

    [[nodiscard]] bool value_based() const { return !std::holds_alternative<Random>(impl_); }

  private:
    explicit Partitioner(std::variant<Random, GridSpec, VPPartitionSpec> impl) : impl_(std::move(impl)) {}

    std::variant<Random, GridSpec, VPPartitionSpec> impl_;
};

}  // namespace streamod

#endif  // STREAMOD_PARTITIONER_HPP_
