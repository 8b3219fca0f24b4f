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

#ifndef STREAMOD_PROCESSORS_PMCOD_HPP_
#define STREAMOD_PROCESSORS_PMCOD_HPP_

#include <streamod/core.hpp>
#include <streamod/index/linear_scan.hpp>
#include <streamod/index/mtree.hpp>
#include <streamod/processors/event_queue.hpp>
#include <streamod/processors/processor.hpp>

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace streamod {

enum class NeighborBackend { full_mtree, none, po_mtree, dual_mtree };

inline const char* to_string(NeighborBackend b) {
    switch (b) {
    case NeighborBackend::full_mtree: return "full-mtree";
    case NeighborBackend::po_mtree: return "po-mtree";
    case NeighborBackend::dual_mtree: return "dual-mtree";
    default: return "none";
    }
}

inline NeighborBackend parse_neighbor_backend(const std::string& s) {
    if (s == "full-mtree") return NeighborBackend::full_mtree;
    if (s == "none") return NeighborBackend::none;
    if (s == "po-mtree") return NeighborBackend::po_mtree;
    if (s == "dual-mtree") return NeighborBackend::dual_mtree;
    throw UsageError("unknown neighbor backend '" + s + "' (expected full-mtree, none, po-mtree or dual-mtree)");
}

using ClusterId = std::uint64_t;

/// Micro-cluster with a fixed center. Members are kept with their values for member scans.
struct MicroCluster {
    ClusterId id = 0;
    Point center;
    std::vector<std::pair<ObjectId, Point>> members;
};

/**
 * @brief Spatial bookkeeping for pMCOD: free points, micro-cluster centers and members.
 *
 * The backend only changes which structures answer the queries; every backend returns the same sets.
 */
class McodNeighborSearch {
  public:
    McodNeighborSearch(NeighborBackend backend, double radius, Metric metric = Metric::euclidean,
                       std::size_t capacity = MTree<>::kDefaultCapacity)
        : backend_(backend),
          radius_(radius),
          dist_{metric},
          all_tree_(capacity, dist_),
          free_tree_(capacity, dist_),
          free_lin_(dist_),
          centers_tree_(capacity, dist_),
          centers_lin_(dist_) {}

    [[nodiscard]] NeighborBackend backend() const { return backend_; }

    void insert_free(ObjectId id, const Point& p) {
        if (!where_.try_emplace(id, Slot{}).second) throw UsageError("pmcod: duplicate object " + std::to_string(id));
        if (backend_ == NeighborBackend::full_mtree) all_tree_.insert(id, p);
        free_add(id, p);
    }

    /// Removes an object wherever it lives. Returns the cluster it belonged to, if any.
    std::optional<ClusterId> erase(ObjectId id) {
        auto it = where_.find(id);
        if (it == where_.end()) throw UsageError("pmcod: unknown object " + std::to_string(id));
        std::optional<ClusterId> cid;
        if (it->second.cluster) {
            cid = *it->second.cluster;
            member_remove(id, it->second);
        } else {
            free_remove(id);
        }
        if (backend_ == NeighborBackend::full_mtree) all_tree_.remove(id);
        where_.erase(it);
        return cid;
    }

    ClusterId new_cluster(const Point& center) {
        const ClusterId cid = next_cluster_++;
        clusters_.emplace(cid, MicroCluster{cid, center, {}});
        if (backend_ == NeighborBackend::dual_mtree) {
            centers_tree_.insert(cid, center);
        } else {
            centers_lin_.insert(cid, center);
        }
        return cid;
    }

    /// Moves a free object into a cluster.
    void to_cluster(ObjectId id, const Point& p, ClusterId cid) {
        Slot& slot = where_.at(id);
        if (slot.cluster) throw InternalError("pmcod: object " + std::to_string(id) + " already clustered");
        free_remove(id);
        MicroCluster& c = clusters_.at(cid);
        slot.cluster = cid;
        slot.index = c.members.size();
        c.members.emplace_back(id, p);
    }

    /// Moves every member of a cluster back to the free set and deletes the cluster. Returns the members.
    std::vector<std::pair<ObjectId, Point>> dissolve(ClusterId cid) {
        auto it = clusters_.find(cid);
        std::vector<std::pair<ObjectId, Point>> members = std::move(it->second.members);
        for (const auto& [id, p] : members) {
            where_.at(id) = Slot{};
            free_add(id, p);
        }
        if (backend_ == NeighborBackend::dual_mtree) {
            centers_tree_.remove(cid);
        } else {
            centers_lin_.remove(cid);
        }
        clusters_.erase(it);
        return members;
    }

    [[nodiscard]] std::optional<ClusterId> cluster_of(ObjectId id) const {
        auto it = where_.find(id);
        return it == where_.end() ? std::nullopt : it->second.cluster;
    }

    [[nodiscard]] bool is_free(ObjectId id) const {
        auto it = where_.find(id);
        return it != where_.end() && !it->second.cluster;
    }

    /// Free points within r of c.
    template <class Visitor>
    void free_range(const Point& c, double r, Visitor&& visit) const {
        switch (backend_) {
        case NeighborBackend::full_mtree:
            all_tree_.range_query(c, r, [&](ObjectId id, double d) {
                if (!where_.at(id).cluster) visit(id, d);
            });
            break;
        case NeighborBackend::none: free_lin_.range_query(c, r, visit); break;
        default: free_tree_.range_query(c, r, visit); break;
        }
    }

    /// Closest cluster center within r of c; ties go to the lowest cluster id.
    [[nodiscard]] std::optional<ClusterId> closest_center(const Point& c, double r) const {
        std::optional<ClusterId> best;
        double best_d = std::numeric_limits<double>::infinity();
        auto pick = [&](ObjectId cid, double d) {
            if (d < best_d || (d == best_d && cid < *best)) {
                best = cid;
                best_d = d;
            }
        };
        if (backend_ == NeighborBackend::dual_mtree) {
            centers_tree_.range_query(c, r, pick);
        } else {
            centers_lin_.range_query(c, r, pick);
        }
        return best;
    }

    /// Every stored point within r of c, clustered or not.
    template <class Visitor>
    void all_range(const Point& c, double r, Visitor&& visit) const {
        if (backend_ == NeighborBackend::full_mtree) {
            all_tree_.range_query(c, r, visit);
            return;
        }
        free_range(c, r, visit);
        const double reach = r + 0.5 * radius_ + pruning_slack(r + radius_);
        auto scan = [&](ObjectId cid, double) {
            for (const auto& [id, p] : clusters_.at(cid).members) {
                const double d = dist_(c, p);
                if (d <= r) visit(id, d);
            }
        };
        if (backend_ == NeighborBackend::dual_mtree) {
            centers_tree_.range_query(c, reach, scan);
        } else {
            centers_lin_.range_query(c, reach, scan);
        }
    }

    [[nodiscard]] const std::unordered_map<ClusterId, MicroCluster>& clusters() const { return clusters_; }
    [[nodiscard]] std::size_t size() const { return where_.size(); }

    [[nodiscard]] std::size_t free_count() const {
        switch (backend_) {
        case NeighborBackend::full_mtree: return free_count_;
        case NeighborBackend::none: return free_lin_.size();
        default: return free_tree_.size();
        }
    }

    void check_invariants() const {
        std::size_t members = 0;
        for (const auto& [cid, c] : clusters_) {
            for (std::size_t i = 0; i < c.members.size(); ++i) {
                const Slot& s = where_.at(c.members[i].first);
                if (!s.cluster || *s.cluster != cid || s.index != i) {
                    throw InternalError("pmcod: member slot table out of sync in cluster " + std::to_string(cid));
                }
            }
            members += c.members.size();
        }
        if (members + free_count() != where_.size()) throw InternalError("pmcod: free and member counts disagree");
        if (backend_ == NeighborBackend::full_mtree && all_tree_.size() != where_.size()) {
            throw InternalError("pmcod: full tree size disagrees");
        }
        all_tree_.check_invariants();
        free_tree_.check_invariants();
        centers_tree_.check_invariants();
    }

  private:
    struct Slot {
        std::optional<ClusterId> cluster;
        std::size_t index = 0;
    };

    void free_add(ObjectId id, const Point& p) {
        switch (backend_) {
        case NeighborBackend::full_mtree: ++free_count_; break;
        case NeighborBackend::none: free_lin_.insert(id, p); break;
        default: free_tree_.insert(id, p); break;
        }
    }

    void free_remove(ObjectId id) {
        switch (backend_) {
        case NeighborBackend::full_mtree: --free_count_; break;
        case NeighborBackend::none: free_lin_.remove(id); break;
        default: free_tree_.remove(id); break;
        }
    }

    void member_remove(ObjectId id, const Slot& slot) {
        auto& members = clusters_.at(*slot.cluster).members;
        if (slot.index + 1 != members.size()) {
            members[slot.index] = std::move(members.back());
            where_.at(members[slot.index].first).index = slot.index;
        }
        members.pop_back();
        (void)id;
    }

    NeighborBackend backend_;
    double radius_;
    Distance dist_;
    MTree<> all_tree_;
    MTree<> free_tree_;
    LinearScan<> free_lin_;
    MTree<> centers_tree_;
    LinearScan<> centers_lin_;
    std::unordered_map<ObjectId, Slot> where_;
    std::unordered_map<ClusterId, MicroCluster> clusters_;
    ClusterId next_cluster_ = 0;
    std::size_t free_count_ = 0;
};

inline McodNeighborSearch select_neighbor_backend(NeighborBackend backend, const WindowConfig& cfg,
                                                  std::size_t capacity = MTree<>::kDefaultCapacity) {
    return McodNeighborSearch(backend, cfg.radius, cfg.metric, capacity);
}

struct PmcodOptions {
    NeighborBackend backend = NeighborBackend::none;
    QueueFlavor queue = QueueFlavor::none;
    std::size_t mtree_capacity = MTree<>::kDefaultCapacity;
};

/**
 * @brief Micro-cluster processor for value-based routing.
 *
 * Cluster members are inliers by construction and carry no metadata. Free points keep exact
 * count_after / nn_before over the whole partition, which is what makes the reported set exact.
 */
class PmcodProcessor final : public SlideProcessor {
  public:
    PmcodProcessor(const WindowConfig& cfg, PartitionId partition, PmcodOptions options = {})
        : cfg_(cfg),
          partition_(partition),
          options_(options),
          join_radius_(0.5 * cfg.radius * (1.0 - 1e-9)),
          search_(select_neighbor_backend(options.backend, cfg, options.mtree_capacity)),
          queue_(options.queue) {}

    SlideOutput process(const SlideBatch& batch) override {
        SlideOutput out;
        const Tick w_start = batch.expiry_threshold();
        fresh_.clear();

        std::vector<ClusterId> touched;
        while (!order_.empty()) {
            auto it = records_.find(order_.front());
            if (it->second.obj.t >= w_start) break;
            const ObjectId id = it->first;
            if (auto cid = search_.erase(id)) touched.push_back(*cid);
            po_.erase(id);
            queue_.erase(id);
            if (it->second.obj.flag == 0) --owned_;
            records_.erase(it);
            order_.pop_front();
        }

        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        std::vector<ObjectId> replace;
        for (ClusterId cid : touched) {
            if (search_.clusters().at(cid).members.size() >= cfg_.k + 1) continue;
            ++out.counters.dissolved_clusters;
            for (const auto& [id, p] : search_.dissolve(cid)) {
                records_.at(id).obj.reset_metadata();
                replace.push_back(id);
            }
        }
        std::sort(replace.begin(), replace.end(), [&](ObjectId a, ObjectId b) {
            const Tick ta = records_.at(a).obj.t;
            const Tick tb = records_.at(b).obj.t;
            return ta != tb ? ta < tb : a < b;
        });
        for (ObjectId id : replace) {
            if (!search_.is_free(id)) continue;
            place(id, false, out.counters);
        }

        for (const auto& arrival : batch.arrivals) {
            Record rec;
            rec.obj = arrival;
            rec.obj.reset_metadata();
            const ObjectId id = arrival.id;
            if (!records_.emplace(id, std::move(rec)).second) {
                throw UsageError("pmcod: duplicate object " + std::to_string(id));
            }
            order_.push_back(id);
            if (arrival.flag == 0) ++owned_;
            place(id, true, out.counters);
        }

        std::vector<ObjectId> candidates;
        if (options_.queue == QueueFlavor::none) {
            candidates.assign(po_.begin(), po_.end());
        } else {
            candidates = queue_.drain(w_start);
            candidates.insert(candidates.end(), outliers_.begin(), outliers_.end());
            candidates.insert(candidates.end(), fresh_.begin(), fresh_.end());
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        std::vector<ObjectId> outliers;
        for (ObjectId id : candidates) {
            if (!po_.contains(id)) continue;
            Record& rec = records_.at(id);
            ++out.counters.rechecks;
            if (is_outlier(rec.obj, w_start, cfg_.k)) {
                outliers.push_back(id);
                queue_.erase(id);
            } else if (options_.queue != QueueFlavor::none) {
                queue_.insert(rec.obj, w_start);
            }
        }
        outliers_ = outliers;
        out.outliers = std::move(outliers);
        return out;
    }

    [[nodiscard]] std::vector<ObjectId> safe_inliers() const override {
        std::vector<ObjectId> safe;
        for (const auto& [id, rec] : records_) {
            if (rec.obj.flag == 0 && rec.safe) safe.push_back(id);
        }
        std::sort(safe.begin(), safe.end());
        return safe;
    }

    [[nodiscard]] std::size_t owned_count() const override { return owned_; }

    void check_invariants() const override {
        search_.check_invariants();
        if (search_.size() != records_.size()) throw InternalError("pmcod: search structure and records disagree");
        Distance dist{cfg_.metric};
        for (const auto& [cid, c] : search_.clusters()) {
            if (c.members.size() < cfg_.k + 1) {
                throw InternalError("pmcod: cluster " + std::to_string(cid) + " has fewer than k+1 members");
            }
            for (const auto& [id, p] : c.members) {
                if (dist(p, c.center) > 0.5 * cfg_.radius) {
                    throw InternalError("pmcod: member " + std::to_string(id) + " lies outside R/2 of its center");
                }
                if (po_.contains(id)) throw InternalError("pmcod: clustered object " + std::to_string(id) + " in PO");
            }
        }
        for (const auto& [id, rec] : records_) {
            const bool expect_po = rec.obj.flag == 0 && !rec.safe && search_.is_free(id);
            if (expect_po != po_.contains(id)) {
                throw InternalError("pmcod: PO membership of object " + std::to_string(id) + " is inconsistent");
            }
        }
        for (ObjectId id : po_) {
            if (queue_.contains(id) && is_safe_inlier(records_.at(id).obj, cfg_.k)) {
                throw InternalError("pmcod: safe inlier left in the event queue");
            }
        }
    }

    [[nodiscard]] const McodNeighborSearch& search() const { return search_; }
    [[nodiscard]] const std::unordered_set<ObjectId>& potential_outliers() const { return po_; }
    [[nodiscard]] const EventQueue& queue() const { return queue_; }

  private:
    struct Record {
        StreamObject obj;
        bool safe = false;
    };

    void mark_safe(ObjectId id, Record& rec) {
        rec.safe = true;
        po_.erase(id);
        queue_.erase(id);
    }

    void absorb(ObjectId id, ClusterId cid) {
        search_.to_cluster(id, records_.at(id).obj.value, cid);
        po_.erase(id);
        queue_.erase(id);
    }

    /// Handles a new arrival (update_neighbors) or a member of a dissolved cluster.
    void place(ObjectId id, bool update_neighbors, ProcessorCounters& counters) {
        const std::size_t k = cfg_.k;
        const double R = cfg_.radius;
        Record& rec = records_.at(id);
        const Point p = rec.obj.value;

        if (update_neighbors) {
            ++counters.range_queries;
            search_.free_range(p, R, [&](ObjectId yid, double) {
                if (yid == id) return;
                Record& y = records_.at(yid);
                if (y.obj.flag != 0 || y.safe) return;
                count_neighbor(y.obj, rec.obj.t, k);
                if (is_safe_inlier(y.obj, k)) mark_safe(yid, y);
            });
        }

        if (auto cid = search_.closest_center(p, join_radius_)) {
            if (update_neighbors) search_.insert_free(id, p);
            absorb(id, *cid);
            return;
        }
        if (update_neighbors) search_.insert_free(id, p);

        if (rec.obj.flag == 0) {
            ++counters.range_queries;
            search_.all_range(p, R, [&](ObjectId yid, double) {
                if (yid != id) count_neighbor(rec.obj, records_.at(yid).obj.t, k);
            });
            if (is_safe_inlier(rec.obj, k)) rec.safe = true;
            if (!rec.safe) {
                po_.insert(id);
                fresh_.push_back(id);
            }
        }

        std::vector<ObjectId> close;
        ++counters.range_queries;
        search_.free_range(p, join_radius_, [&](ObjectId yid, double) {
            if (yid != id) close.push_back(yid);
        });
        if (close.size() < k) return;
        const ClusterId cid = search_.new_cluster(p);
        absorb(id, cid);
        for (ObjectId yid : close) absorb(yid, cid);
    }

    WindowConfig cfg_;
    PartitionId partition_;
    PmcodOptions options_;
    double join_radius_;
    McodNeighborSearch search_;
    EventQueue queue_;
    std::unordered_map<ObjectId, Record> records_;
    std::deque<ObjectId> order_;
    std::unordered_set<ObjectId> po_;
    std::vector<ObjectId> outliers_;
    std::vector<ObjectId> fresh_;
    std::size_t owned_ = 0;
};

inline std::unique_ptr<PmcodProcessor> make_pmcod_processor(const WindowConfig& cfg, PartitionId partition,
                                                            PmcodOptions options = {}) {
    return std::make_unique<PmcodProcessor>(cfg, partition, options);
}

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_PMCOD_HPP_
