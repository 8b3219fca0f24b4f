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

#ifndef STREAMOD_INDEX_MTREE_HPP_
#define STREAMOD_INDEX_MTREE_HPP_

#include <streamod/core.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace streamod {

/**
 * @brief Dynamic metric tree supporting insert, remove and range queries in any metric space.
 *
 * Splits promote the farthest pair among a bounded sample of the overflowing node's entries and
 * assign the rest by generalized hyperplane. Removal never shrinks covering radii; a leaf that drops
 * below a quarter of its capacity is dissolved and its entries are reinserted.
 */
template <class DistanceFn = Distance>
class MTree {
  public:
    static constexpr std::size_t kDefaultCapacity = 25;

    explicit MTree(std::size_t capacity = kDefaultCapacity, DistanceFn dist = {})
        : capacity_(capacity < 2 ? 2 : capacity), dist_(dist), root_(std::make_unique<Node>()) {}

    MTree(MTree&&) noexcept = default;
    MTree& operator=(MTree&&) noexcept = default;

    void insert(ObjectId id, const Point& value) {
        if (leaf_of_.contains(id)) throw UsageError("m-tree: duplicate id " + std::to_string(id));
        Node* node = root_.get();
        while (!node->leaf) {
            node = choose_subtree(*node, value);
        }
        Entry e;
        e.pivot = value;
        e.id = id;
        e.parent_dist = node->has_pivot ? dist_(value, node->pivot) : 0.0;
        node->entries.push_back(std::move(e));
        leaf_of_[id] = node;
        ++size_;
        if (node->entries.size() > capacity_) split(node);
    }

    void remove(ObjectId id) {
        auto it = leaf_of_.find(id);
        if (it == leaf_of_.end()) throw UsageError("m-tree: id " + std::to_string(id) + " not present");
        Node* leaf = it->second;
        leaf_of_.erase(it);
        --size_;
        for (std::size_t i = 0; i < leaf->entries.size(); ++i) {
            if (leaf->entries[i].id == id) {
                leaf->entries[i] = std::move(leaf->entries.back());
                leaf->entries.pop_back();
                break;
            }
        }
        if (leaf == root_.get() || leaf->entries.size() * 4 >= capacity_) return;

        std::vector<std::pair<ObjectId, Point>> orphans;
        orphans.reserve(leaf->entries.size());
        for (auto& e : leaf->entries) {
            orphans.emplace_back(e.id, e.pivot);
            leaf_of_.erase(e.id);
        }
        size_ -= orphans.size();
        detach(leaf);
        collapse_root();
        for (auto& [oid, value] : orphans) insert(oid, value);
    }

    [[nodiscard]] bool contains(ObjectId id) const { return leaf_of_.contains(id); }
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] bool empty() const { return size_ == 0; }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }

    [[nodiscard]] std::size_t height() const {
        std::size_t h = 1;
        for (const Node* n = root_.get(); !n->leaf; n = n->entries.front().child.get()) ++h;
        return h;
    }

    /// Calls visit(id, distance) for every stored point within radius of center.
    template <class Visitor>
    void range_query(const Point& center, double radius, Visitor&& visit) const {
        if (size_ == 0) return;
        query(*root_, center, radius, 0.0, visit);
    }

    /// Verifies covering radii, parent links and the id map. Throws InternalError on violation.
    void check_invariants() const {
        std::size_t seen = 0;
        check_node(*root_, nullptr, seen);
        if (seen != size_ || leaf_of_.size() != size_) {
            throw InternalError("m-tree: stored object count " + std::to_string(seen) + " disagrees with size "
                                + std::to_string(size_));
        }
    }

  private:
    static constexpr std::size_t kPromotionSample = 12;

    struct Node;

    struct Entry {
        Point pivot;
        double radius = 0.0;       // covering radius, zero for leaf entries
        double parent_dist = 0.0;  // distance to the pivot of the node holding this entry
        ObjectId id = 0;
        std::unique_ptr<Node> child;
    };

    struct Node {
        bool leaf = true;
        bool has_pivot = false;
        Point pivot;
        Node* parent = nullptr;
        std::vector<Entry> entries;
    };

    Node* choose_subtree(Node& node, const Point& value) {
        Entry* best = nullptr;
        double best_d = 0.0;
        double best_enlargement = 0.0;
        bool best_covers = false;
        for (auto& e : node.entries) {
            const double d = dist_(value, e.pivot);
            if (d <= e.radius) {
                if (!best_covers || d < best_d) {
                    best = &e;
                    best_d = d;
                    best_covers = true;
                }
            } else if (!best_covers) {
                const double enlargement = d - e.radius;
                if (best == nullptr || enlargement < best_enlargement) {
                    best = &e;
                    best_d = d;
                    best_enlargement = enlargement;
                }
            }
        }
        if (!best_covers) best->radius = best_d;
        return best->child.get();
    }

    std::pair<std::size_t, std::size_t> promote(const std::vector<Entry>& entries) const {
        std::vector<std::size_t> candidates;
        if (entries.size() <= kPromotionSample) {
            for (std::size_t i = 0; i < entries.size(); ++i) candidates.push_back(i);
        } else {
            for (std::size_t i = 0; i < kPromotionSample; ++i) {
                candidates.push_back(i * entries.size() / kPromotionSample);
            }
        }
        std::pair<std::size_t, std::size_t> best{0, 1};
        double best_d = -1.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            for (std::size_t j = i + 1; j < candidates.size(); ++j) {
                const double d = dist_(entries[candidates[i]].pivot, entries[candidates[j]].pivot);
                if (d > best_d) {
                    best_d = d;
                    best = {candidates[i], candidates[j]};
                }
            }
        }
        return best;
    }

    void split(Node* node) {
        std::vector<Entry> entries = std::move(node->entries);
        const auto [ia, ib] = promote(entries);
        const Point pa = entries[ia].pivot;
        const Point pb = entries[ib].pivot;

        auto left = std::make_unique<Node>();
        auto right = std::make_unique<Node>();
        for (Node* n : {left.get(), right.get()}) {
            n->leaf = node->leaf;
            n->has_pivot = true;
        }
        left->pivot = pa;
        right->pivot = pb;

        bool alternate = false;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            Entry& e = entries[i];
            Node* target = nullptr;
            if (i == ia) {
                target = left.get();
                e.parent_dist = 0.0;
            } else if (i == ib) {
                target = right.get();
                e.parent_dist = 0.0;
            } else {
                const double da = dist_(e.pivot, pa);
                const double db = dist_(e.pivot, pb);
                const bool to_left = da < db || (da == db && (alternate = !alternate));
                target = to_left ? left.get() : right.get();
                e.parent_dist = to_left ? da : db;
            }
            if (e.child) {
                e.child->parent = target;
            } else {
                leaf_of_[e.id] = target;
            }
            target->entries.push_back(std::move(e));
        }

        Node* parent = node->parent;
        Entry r1 = routing_entry(std::move(left));
        Entry r2 = routing_entry(std::move(right));
        if (parent == nullptr) {
            auto root = std::make_unique<Node>();
            root->leaf = false;
            r1.child->parent = root.get();
            r2.child->parent = root.get();
            root->entries.push_back(std::move(r1));
            root->entries.push_back(std::move(r2));
            root_ = std::move(root);  // releases the old root
            return;
        }
        r1.child->parent = parent;
        r2.child->parent = parent;
        if (parent->has_pivot) {
            r1.parent_dist = dist_(r1.pivot, parent->pivot);
            r2.parent_dist = dist_(r2.pivot, parent->pivot);
        }
        for (auto& e : parent->entries) {
            if (e.child.get() == node) {
                e = std::move(r1);  // releases `node`
                break;
            }
        }
        parent->entries.push_back(std::move(r2));
        if (parent->entries.size() > capacity_) split(parent);
    }

    static Entry routing_entry(std::unique_ptr<Node> node) {
        Entry r;
        r.pivot = node->pivot;
        for (const auto& e : node->entries) r.radius = std::max(r.radius, e.parent_dist + e.radius);
        r.child = std::move(node);
        return r;
    }

    void detach(Node* node) {
        Node* parent = node->parent;
        auto& siblings = parent->entries;
        for (std::size_t i = 0; i < siblings.size(); ++i) {
            if (siblings[i].child.get() == node) {
                siblings[i] = std::move(siblings.back());
                siblings.pop_back();
                break;
            }
        }
        if (!siblings.empty()) return;
        if (parent == root_.get()) {
            root_ = std::make_unique<Node>();
        } else {
            detach(parent);
        }
    }

    void collapse_root() {
        while (!root_->leaf && root_->entries.size() == 1) {
            std::unique_ptr<Node> child = std::move(root_->entries.front().child);
            child->parent = nullptr;
            child->has_pivot = false;
            for (auto& e : child->entries) e.parent_dist = 0.0;
            root_ = std::move(child);
        }
    }

    template <class Visitor>
    void query(const Node& node, const Point& center, double radius, double center_to_pivot, Visitor& visit) const {
        for (const auto& e : node.entries) {
            if (node.has_pivot) {
                const double bound = radius + e.radius;
                if (std::fabs(center_to_pivot - e.parent_dist) > bound + pruning_slack(center_to_pivot + bound)) {
                    continue;
                }
            }
            const double d = dist_(center, e.pivot);
            if (node.leaf) {
                if (d <= radius) visit(e.id, d);
            } else if (d <= radius + e.radius + pruning_slack(d + radius + e.radius)) {
                query(*e.child, center, radius, d, visit);
            }
        }
    }

    void collect_points(const Node& node, std::vector<Point>& out) const {
        for (const auto& e : node.entries) {
            if (node.leaf) {
                out.push_back(e.pivot);
            } else {
                collect_points(*e.child, out);
            }
        }
    }

    void check_node(const Node& node, const Node* parent, std::size_t& seen) const {
        if (node.parent != parent) throw InternalError("m-tree: broken parent link");
        if (&node != root_.get() && node.entries.empty()) throw InternalError("m-tree: empty non-root node");
        for (const auto& e : node.entries) {
            if (node.has_pivot) {
                const double pd = dist_(e.pivot, node.pivot);
                if (std::fabs(pd - e.parent_dist) > pruning_slack(pd)) {
                    throw InternalError("m-tree: stale distance-to-parent");
                }
            }
            if (node.leaf) {
                ++seen;
                auto it = leaf_of_.find(e.id);
                if (it == leaf_of_.end() || it->second != &node) throw InternalError("m-tree: stale leaf map");
                continue;
            }
            if (!(e.child->pivot == e.pivot) || !e.child->has_pivot) throw InternalError("m-tree: pivot mismatch");
            std::vector<Point> members;
            collect_points(*e.child, members);
            for (const auto& p : members) {
                const double d = dist_(p, e.pivot);
                if (d > e.radius + pruning_slack(e.radius)) {
                    throw InternalError("m-tree: object outside covering radius");
                }
            }
            check_node(*e.child, &node, seen);
        }
    }

    std::size_t capacity_;
    DistanceFn dist_;
    std::unique_ptr<Node> root_;
    std::unordered_map<ObjectId, Node*> leaf_of_;
    std::size_t size_ = 0;
};

}  // namespace streamod

#endif  // STREAMOD_INDEX_MTREE_HPP_
