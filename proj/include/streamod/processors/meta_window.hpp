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

#ifndef STREAMOD_PROCESSORS_META_WINDOW_HPP_
#define STREAMOD_PROCESSORS_META_WINDOW_HPP_

#include <streamod/core.hpp>
#include <streamod/processors/processor.hpp>

#include <algorithm>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace streamod {

/// Everything one partition sent to one meta-window shard for one slide.
struct LocalContribution {
    PartitionId source = 0;
    std::int64_t slide_index = 0;
    std::vector<LocalMetadata> entries;
};

/**
 * @brief Tumbling aggregation stage for random routing, sharded by owner partition.
 *
 * Owner partitions keep their objects' counts for the whole lifetime, but replica partitions see an
 * object only during its arrival slide. The shard therefore keeps the replica-side totals until the
 * object expires and adds them to the owner's counts on every slide.
 */
class MetaWindow {
  public:
    MetaWindow(const WindowConfig& cfg, PartitionId owner) : cfg_(cfg), owner_(owner) {}

    /// Merges one slide's contributions; `inputs` must hold exactly one entry per partition.
    std::vector<ObjectId> merge(const WindowInterval& interval, std::span<const LocalContribution> inputs) {
        check_barrier(interval, inputs);
        const std::size_t k = cfg_.k;

        while (!order_.empty() && order_.front().first < interval.start) {
            extra_.erase(order_.front().second);
            order_.pop_front();
        }

        for (const auto& input : inputs) {
            for (const auto& e : input.entries) {
                if (e.owner != owner_) {
                    throw InternalError("meta-window " + std::to_string(owner_) + ": received object "
                                        + std::to_string(e.id) + " owned by partition " + std::to_string(e.owner));
                }
                if (!e.replica) continue;
                auto [it, fresh] = extra_.try_emplace(e.id);
                if (fresh) {
                    it->second.t = e.t;
                    order_.emplace_back(e.t, e.id);
                }
                it->second.count_after += e.count_after;
                for (Tick ts : e.nn_before) record_preceding(it->second.nn_before, ts, k);
            }
        }

        std::vector<ObjectId> outliers;
        for (const auto& input : inputs) {
            for (const auto& e : input.entries) {
                if (e.replica) continue;
                StreamObject merged;
                merged.id = e.id;
                merged.t = e.t;
                merged.count_after = e.count_after;
                merged.nn_before = e.nn_before;
                if (auto it = extra_.find(e.id); it != extra_.end()) {
                    merged.count_after += it->second.count_after;
                    for (Tick ts : it->second.nn_before) record_preceding(merged.nn_before, ts, k);
                }
                if (is_outlier(merged, interval.start, k)) outliers.push_back(e.id);
            }
        }
        std::sort(outliers.begin(), outliers.end());
        return outliers;
    }

    [[nodiscard]] std::size_t tracked() const { return extra_.size(); }

  private:
    struct ReplicaTotals {
        Tick t = 0;
        std::uint32_t count_after = 0;
        std::vector<Tick> nn_before;
    };

    void check_barrier(const WindowInterval& interval, std::span<const LocalContribution> inputs) const {
        if (inputs.size() != cfg_.partitions) {
            throw InternalError("meta-window barrier violation: expected " + std::to_string(cfg_.partitions)
                                + " contributions for slide " + std::to_string(interval.slide_index) + ", got "
                                + std::to_string(inputs.size()));
        }
        std::vector<bool> seen(cfg_.partitions, false);
        for (const auto& input : inputs) {
            if (input.slide_index != interval.slide_index) {
                throw InternalError("meta-window barrier violation: contribution of partition "
                                    + std::to_string(input.source) + " is for slide "
                                    + std::to_string(input.slide_index) + ", merging slide "
                                    + std::to_string(interval.slide_index));
            }
            if (input.source >= cfg_.partitions || seen[input.source]) {
                throw InternalError("meta-window barrier violation: duplicate or unknown source partition "
                                    + std::to_string(input.source));
            }
            seen[input.source] = true;
        }
    }

    WindowConfig cfg_;
    PartitionId owner_;
    std::unordered_map<ObjectId, ReplicaTotals> extra_;
    std::deque<std::pair<Tick, ObjectId>> order_;
};

/// Aggregates local counts from every partition and reports the slide's exact outliers for one shard.
inline std::vector<ObjectId> naive_merge(MetaWindow& shard, const WindowInterval& interval,
                                         std::span<const LocalContribution> inputs) {
    return shard.merge(interval, inputs);
}

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_META_WINDOW_HPP_
