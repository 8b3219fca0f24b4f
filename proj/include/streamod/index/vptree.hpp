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

#ifndef STREAMOD_INDEX_VPTREE_HPP_
#define STREAMOD_INDEX_VPTREE_HPP_

#include <streamod/core.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace streamod {

/**
 * @brief Bulk-built vantage-point tree.
 *
 * Each internal node splits its points by distance to a vantage point chosen uniformly at random
 * (fixed seed). The threshold is the median distance and points at exactly the threshold go inside.
 * Points live in the leaves; a node whose points cannot be split (all distances equal) is a leaf.
 */
template <class DistanceFn = Distance>
class VPTree {
  public:
    using NodeId = std::size_t;
    static constexpr NodeId kNone = static_cast<NodeId>(-1);
    static constexpr std::uint64_t kDefaultSeed = 0x5eed;

    struct Node {
        Point vantage;
        double threshold = 0.0;
        NodeId inside = kNone;
        NodeId outside = kNone;
        std::size_t level = 0;
        std::vector<std::size_t> points;  // leaf only: positions into the stored arrays

        [[nodiscard]] bool leaf() const { return inside == kNone; }
    };

    static constexpr std::size_t kUnlimited = static_cast<std::size_t>(-1);

    /// Builds over values with ids 0..n-1. Nodes at max_depth stay leaves.
    static VPTree build(std::span<const Point> sample, std::uint64_t seed = kDefaultSeed, DistanceFn dist = {},
                        std::size_t max_depth = kUnlimited) {
        std::vector<ObjectId> ids(sample.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        return build(ids, sample, seed, dist, max_depth);
    }

    static VPTree build(std::span<const ObjectId> ids, std::span<const Point> values,
                        std::uint64_t seed = kDefaultSeed, DistanceFn dist = {}, std::size_t max_depth = kUnlimited) {
        if (values.empty()) throw UsageError("vp-tree: cannot build from an empty sample");
        if (ids.size() != values.size()) throw UsageError("vp-tree: ids and values differ in length");
        VPTree tree(dist);
        tree.max_depth_ = max_depth;
        tree.ids_.assign(ids.begin(), ids.end());
        tree.values_.assign(values.begin(), values.end());
        std::vector<std::size_t> all(values.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::mt19937_64 rng(seed);
        tree.build_node(std::move(all), 0, rng);
        return tree;
    }

    [[nodiscard]] const Node& node(NodeId id) const { return nodes_[id]; }
    [[nodiscard]] NodeId root() const { return 0; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

    /// Length of the longest root-to-leaf path, in edges.
    [[nodiscard]] std::size_t depth() const {
        std::size_t d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.level);
        return d;
    }

    /// Shallowest leaf level; every level up to this one is complete.
    [[nodiscard]] std::size_t complete_depth() const {
        std::size_t d = depth();
        for (const auto& n : nodes_) {
            if (n.leaf()) d = std::min(d, n.level);
        }
        return d;
    }

    /**
     * @brief The 2^level subtrees rooted at depth `level`, left (inside) to right (outside).
     *
     * Requires every node above `level` to be internal; otherwise the build sample was too small.
     */
    [[nodiscard]] std::vector<NodeId> nodes_at_level(std::size_t level) const {
        if (level < 1) throw UsageError("vp-tree: level must be at least 1");
        if (complete_depth() < level) {
            throw UsageError("vp-tree: tree is complete only to level " + std::to_string(complete_depth())
                             + ", level " + std::to_string(level) + " requested; grow the build sample");
        }
        std::vector<NodeId> frontier{root()};
        for (std::size_t l = 0; l < level; ++l) {
            std::vector<NodeId> next;
            next.reserve(frontier.size() * 2);
            for (NodeId id : frontier) {
                next.push_back(nodes_[id].inside);
                next.push_back(nodes_[id].outside);
            }
            frontier = std::move(next);
        }
        return frontier;
    }

    template <class Visitor>
    void range_query(const Point& center, double radius, Visitor&& visit) const {
        query(root(), center, radius, visit);
    }

    /// Positions (into the build arrays) of every point stored below `id`.
    [[nodiscard]] std::vector<std::size_t> points_under(NodeId id) const {
        std::vector<std::size_t> out;
        gather(id, out);
        return out;
    }

    [[nodiscard]] ObjectId id_at(std::size_t pos) const { return ids_[pos]; }
    [[nodiscard]] const Point& value_at(std::size_t pos) const { return values_[pos]; }
    [[nodiscard]] double dist(const Point& a, const Point& b) const { return dist_(a, b); }

  private:
    explicit VPTree(DistanceFn dist) : dist_(dist) {}

    NodeId build_node(std::vector<std::size_t> points, std::size_t level, std::mt19937_64& rng) {
        const NodeId id = nodes_.size();
        nodes_.emplace_back();
        nodes_[id].level = level;
        if (points.size() <= 1 || level >= max_depth_) {
            nodes_[id].points = std::move(points);
            return id;
        }

        std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
        const Point vantage = values_[points[pick(rng)]];
        std::vector<double> dists(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) dists[i] = dist_(vantage, values_[points[i]]);

        std::vector<double> sorted = dists;
        const std::size_t mid = (sorted.size() - 1) / 2;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
        double threshold = sorted[mid];
        const double farthest = *std::max_element(dists.begin(), dists.end());
        if (threshold >= farthest) {
            // Ties at the median absorbed everything: split off only the farthest ring instead.
            double below = -1.0;
            for (double d : dists) {
                if (d < farthest) below = std::max(below, d);
            }
            if (below < 0.0) {
                nodes_[id].points = std::move(points);
                return id;
            }
            threshold = below;
        }

        std::vector<std::size_t> inside;
        std::vector<std::size_t> outside;
        for (std::size_t i = 0; i < points.size(); ++i) {
            (dists[i] <= threshold ? inside : outside).push_back(points[i]);
        }
        points.clear();
        points.shrink_to_fit();

        nodes_[id].vantage = vantage;
        nodes_[id].threshold = threshold;
        const NodeId in = build_node(std::move(inside), level + 1, rng);
        const NodeId out = build_node(std::move(outside), level + 1, rng);
        nodes_[id].inside = in;
        nodes_[id].outside = out;
        return id;
    }

    template <class Visitor>
    void query(NodeId id, const Point& center, double radius, Visitor& visit) const {
        const Node& n = nodes_[id];
        if (n.leaf()) {
            for (std::size_t pos : n.points) {
                const double d = dist_(center, values_[pos]);
                if (d <= radius) visit(ids_[pos], d);
            }
            return;
        }
        const double d = dist_(center, n.vantage);
        const double slack = pruning_slack(d + radius + n.threshold);
        if (d - radius <= n.threshold + slack) query(n.inside, center, radius, visit);
        if (d + radius + slack > n.threshold) query(n.outside, center, radius, visit);
    }

    void gather(NodeId id, std::vector<std::size_t>& out) const {
        const Node& n = nodes_[id];
        if (n.leaf()) {
            out.insert(out.end(), n.points.begin(), n.points.end());
            return;
        }
        gather(n.inside, out);
        gather(n.outside, out);
    }

    DistanceFn dist_;
    std::size_t max_depth_ = kUnlimited;
    std::vector<ObjectId> ids_;
    std::vector<Point> values_;
    std::vector<Node> nodes_;
};

}  // namespace streamod

#endif  // STREAMOD_INDEX_VPTREE_HPP_
