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

#ifndef STREAMOD_PROCESSORS_EXACT_STORM_HPP_
#define STREAMOD_PROCESSORS_EXACT_STORM_HPP_

#include <streamod/core.hpp>
#include <streamod/index/linear_scan.hpp>
#include <streamod/index/mtree.hpp>
#include <streamod/processors/processor.hpp>

#include <algorithm>
#include <deque>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

namespace streamod {

/**
 * How a partition finishes a slide.
 *
 * - final: the partition sees every neighbor of its owned objects (single partition or value-based
 *   routing). Replicas stay until they expire and outliers are reported directly.
 * - merge: random routing. Replicas live for their arrival slide only and the partition emits local
 *   neighbor counts for the meta-window.
 */
enum class ReportMode { final, merge };

/**
 * @brief count_after / nn_before processor over an arbitrary range index.
 *
 * With a LinearScan index and a single partition this is the baseline; with LinearScan and merge mode
 * it is the naive parallel processor; with an MTree it is the advanced processor.
 *
 * In merge mode a neighbor pair is counted only by the partition that owns the older object, so each
 * pair contributes exactly once across all partitions.
 */
template <class Index>
class ExactStormProcessor final : public SlideProcessor {
  public:
    ExactStormProcessor(const WindowConfig& cfg, PartitionId partition, ReportMode mode, Index index = Index{})
        : cfg_(cfg), partition_(partition), mode_(mode), index_(std::move(index)) {}

    SlideOutput process(const SlideBatch& batch) override {
        SlideOutput out;
        const Tick w_start = batch.expiry_threshold();
        const std::size_t k = cfg_.k;

        while (!order_.empty()) {
            auto it = objects_.find(order_.front());
            if (it->second.t >= w_start) break;
            index_.remove(it->first);
            if (it->second.flag == 0) --owned_;
            objects_.erase(it);
            order_.pop_front();
        }

        std::vector<ObjectId> transient;
        for (const auto& arrival : batch.arrivals) {
            StreamObject rec = arrival;
            rec.reset_metadata();
            const bool track_self = rec.flag == 0 || mode_ == ReportMode::merge;
            ++out.counters.range_queries;
            index_.range_query(rec.value, cfg_.radius, [&](ObjectId yid, double) {
                StreamObject& y = objects_.find(yid)->second;
                if (y.flag != 0) {
                    // value-based: the replica is context only; merge: the owner of y counts this pair
                    if (mode_ == ReportMode::merge) return;
                } else {
                    count_neighbor(y, rec.t, k);
                }
                if (track_self) count_neighbor(rec, y.t, k);
            });
            index_.insert(rec.id, rec.value);
            const ObjectId id = rec.id;
            if (mode_ == ReportMode::merge && rec.flag != 0) {
                transient.push_back(id);
            } else {
                order_.push_back(id);
                if (rec.flag == 0) {
                    po_.push_back(id);
                    ++owned_;
                }
            }
            objects_.emplace(id, std::move(rec));
        }

        std::erase_if(po_, [&](ObjectId id) {
            auto it = objects_.find(id);
            return it == objects_.end() || is_safe_inlier(it->second, k);
        });
        out.counters.rechecks = po_.size();

        if (mode_ == ReportMode::final) {
            for (ObjectId id : po_) {
                if (is_outlier(objects_.find(id)->second, w_start, k)) out.outliers.push_back(id);
            }
            std::sort(out.outliers.begin(), out.outliers.end());
            return out;
        }

        out.needs_merge = true;
        out.locals.reserve(po_.size() + transient.size());
        for (ObjectId id : po_) out.locals.push_back(local_of(objects_.find(id)->second, false));
        for (ObjectId id : transient) {
            auto it = objects_.find(id);
            if (it->second.count_after > 0 || !it->second.nn_before.empty()) {
                out.locals.push_back(local_of(it->second, true));
            }
            index_.remove(id);
            objects_.erase(it);
        }
        return out;
    }

    [[nodiscard]] std::vector<ObjectId> safe_inliers() const override {
        std::vector<ObjectId> safe;
        for (const auto& [id, o] : objects_) {
            if (o.flag == 0 && is_safe_inlier(o, cfg_.k)) safe.push_back(id);
        }
        std::sort(safe.begin(), safe.end());
        return safe;
    }

    [[nodiscard]] std::size_t owned_count() const override { return owned_; }

    void check_invariants() const override {
        if (index_.size() != objects_.size()) throw InternalError("exact-storm: index and object table disagree");
        for (const auto& [id, o] : objects_) {
            if (o.nn_before.size() > cfg_.k) throw InternalError("exact-storm: nn_before exceeds k entries");
            for (Tick ts : o.nn_before) {
                if (ts >= o.t) throw InternalError("exact-storm: nn_before entry not older than the object");
            }
        }
    }

    [[nodiscard]] const StreamObject* find(ObjectId id) const {
        auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }

    /// Mutable access to an object's record; used by verification tests to inject faults.
    StreamObject* find_mutable(ObjectId id) {
        auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] const Index& index() const { return index_; }

  private:
    LocalMetadata local_of(const StreamObject& o, bool replica) const {
        return LocalMetadata{o.id, o.t, o.partition, replica, o.count_after, o.nn_before};
    }

    WindowConfig cfg_;
    PartitionId partition_;
    ReportMode mode_;
    Index index_;
    std::unordered_map<ObjectId, StreamObject> objects_;
    std::deque<ObjectId> order_;
    std::vector<ObjectId> po_;
    std::size_t owned_ = 0;
};

using BaselineProcessor = ExactStormProcessor<LinearScan<>>;
using NaiveProcessor = ExactStormProcessor<LinearScan<>>;
using AdvancedProcessor = ExactStormProcessor<MTree<>>;

inline std::unique_ptr<BaselineProcessor> make_baseline_processor(const WindowConfig& cfg) {
    if (cfg.partitions != 1) throw UsageError("baseline runs on a single partition");
    return std::make_unique<BaselineProcessor>(cfg, 0, ReportMode::final, LinearScan<>(Distance{cfg.metric}));
}

inline std::unique_ptr<NaiveProcessor> make_naive_processor(const WindowConfig& cfg, PartitionId partition) {
    return std::make_unique<NaiveProcessor>(cfg, partition, ReportMode::merge, LinearScan<>(Distance{cfg.metric}));
}

inline std::unique_ptr<AdvancedProcessor> make_advanced_processor(const WindowConfig& cfg, PartitionId partition,
                                                                  bool value_based,
                                                                  std::size_t capacity = MTree<>::kDefaultCapacity) {
    return std::make_unique<AdvancedProcessor>(cfg, partition, value_based ? ReportMode::final : ReportMode::merge,
                                               MTree<>(capacity, Distance{cfg.metric}));
}

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_EXACT_STORM_HPP_
