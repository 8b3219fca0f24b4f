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

#ifndef STREAMOD_PROCESSORS_SLICED_HPP_
#define STREAMOD_PROCESSORS_SLICED_HPP_

#include <streamod/core.hpp>
#include <streamod/index/mtree.hpp>
#include <streamod/processors/processor.hpp>

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace streamod {

/**
 * @brief Time-sliced processor: one M-tree per alive slide and minimal probing.
 *
 * Every object keeps a neighbor count per slide. Counts for preceding slides (evil[]) come from the
 * object's own probes; counts for its own and succeeding slides are either exact (the object probed
 * that slide) or a lower bound credited by later arrivals that probed back. An object is declared an
 * outlier only after every alive slide has been probed exactly, so the result matches the unsliced
 * definition. Needs value-based routing or a single partition.
 */
class SlicedProcessor final : public SlideProcessor {
  public:
    SlicedProcessor(const WindowConfig& cfg, PartitionId partition, std::size_t capacity = MTree<>::kDefaultCapacity)
        : cfg_(cfg), partition_(partition), capacity_(capacity) {}

    SlideOutput process(const SlideBatch& batch) override {
        SlideOutput out;
        const std::size_t k = cfg_.k;
        const std::int64_t current = batch.interval.slide_index;
        first_alive_ = slide_of(batch.interval.start, cfg_.slide);

        std::vector<ObjectId> candidates;
        while (!slices_.empty() && slices_.front().index < first_alive_) {
            Slice& expired = slices_.front();
            candidates.insert(candidates.end(), expired.trigger.begin(), expired.trigger.end());
            for (ObjectId id : expired.members) {
                if (records_.at(id).obj.flag == 0) --owned_;
                records_.erase(id);
            }
            slices_.pop_front();
        }
        for (ObjectId id : outliers_) candidates.push_back(id);

        Slice& slice = slices_.emplace_back(current, MTree<>(capacity_, Distance{cfg_.metric}));
        for (const auto& arrival : batch.arrivals) {
            Record rec;
            rec.obj = arrival;
            rec.obj.reset_metadata();
            rec.slide = current;
            slice.tree.insert(arrival.id, arrival.value);
            slice.members.push_back(arrival.id);
            if (arrival.flag == 0) ++owned_;
            records_.emplace(arrival.id, std::move(rec));
        }

        for (const auto& arrival : batch.arrivals) {
            if (arrival.flag != 0) continue;
            Record& rec = records_.at(arrival.id);
            candidates.push_back(arrival.id);
            ++out.counters.own_slide_probes;
            std::size_t total = probe(rec, slice, nullptr);
            for (auto it = slices_.rbegin() + 1; it != slices_.rend() && total < k; ++it) {
                ++out.counters.older_slide_probes;
                total += probe(rec, *it, &current);
            }
        }

        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        std::vector<ObjectId> outliers;
        for (ObjectId id : candidates) {
            auto it = records_.find(id);
            if (it == records_.end() || it->second.obj.flag != 0) continue;
            ++out.counters.rechecks;
            if (!evaluate(it->second, out.counters)) outliers.push_back(id);
        }
        outliers_ = outliers;
        out.outliers = std::move(outliers);
        return out;
    }

    [[nodiscard]] std::vector<ObjectId> safe_inliers() const override {
        std::vector<ObjectId> safe;
        for (const auto& [id, rec] : records_) {
            if (rec.obj.flag == 0 && succeeding_total(rec) >= cfg_.k) safe.push_back(id);
        }
        std::sort(safe.begin(), safe.end());
        return safe;
    }

    [[nodiscard]] std::size_t owned_count() const override { return owned_; }

    void check_invariants() const override {
        std::size_t stored = 0;
        for (const auto& s : slices_) {
            s.tree.check_invariants();
            stored += s.tree.size();
        }
        if (stored != records_.size()) throw InternalError("sliced: slice trees and records disagree");
    }

    /// Per-slide neighbor counts of an object: (slide index, count, probed exactly).
    struct SlideCount {
        std::uint32_t count = 0;
        bool exact = false;
    };

    [[nodiscard]] const std::map<std::int64_t, SlideCount>* counts_of(ObjectId id) const {
        auto it = records_.find(id);
        return it == records_.end() ? nullptr : &it->second.counts;
    }

    [[nodiscard]] std::size_t alive_slices() const { return slices_.size(); }

  private:
    struct Record {
        StreamObject obj;
        std::int64_t slide = 0;
        std::map<std::int64_t, SlideCount> counts;
    };

    struct Slice {
        Slice(std::int64_t i, MTree<> t) : index(i), tree(std::move(t)) {}
        std::int64_t index;
        MTree<> tree;
        std::vector<ObjectId> members;
        std::vector<ObjectId> trigger;
    };

    /// Exact count of rec's neighbors in `slice`. credit_slide, when set, credits found objects' counts.
    std::size_t probe(Record& rec, Slice& slice, const std::int64_t* credit_slide) {
        std::uint32_t found = 0;
        slice.tree.range_query(rec.obj.value, cfg_.radius, [&](ObjectId yid, double) {
            if (yid == rec.obj.id) return;
            ++found;
            if (credit_slide == nullptr) return;
            Record& y = records_.at(yid);
            if (y.obj.flag != 0) return;
            SlideCount& c = y.counts[*credit_slide];
            if (!c.exact) ++c.count;
        });
        rec.counts[slice.index] = SlideCount{found, true};
        if (slice.index < rec.slide && found > 0) slice.trigger.push_back(rec.obj.id);
        return found;
    }

    std::size_t alive_total(Record& rec) const {
        std::erase_if(rec.counts, [&](const auto& kv) { return kv.first < first_alive_; });
        std::size_t total = 0;
        for (const auto& [slide, c] : rec.counts) total += c.count;
        return total;
    }

    std::size_t succeeding_total(const Record& rec) const {
        std::size_t total = 0;
        for (const auto& [slide, c] : rec.counts) {
            if (slide >= rec.slide) total += c.count;
        }
        return total;
    }

    /// True when rec is an inlier. Probes not-yet-exact alive slides, newest succeeding first.
    bool evaluate(Record& rec, ProcessorCounters& counters) {
        const std::size_t k = cfg_.k;
        std::size_t total = alive_total(rec);
        if (total >= k) return true;
        auto search = [&](Slice& s) {
            auto it = rec.counts.find(s.index);
            if (it != rec.counts.end() && it->second.exact) return;
            const std::size_t before = it == rec.counts.end() ? 0 : it->second.count;
            ++counters.reprobes;
            total = total - before + probe(rec, s, nullptr);
        };
        for (auto it = slices_.rbegin(); it != slices_.rend() && total < k; ++it) {
            if (it->index > rec.slide) search(*it);
        }
        for (auto it = slices_.rbegin(); it != slices_.rend() && total < k; ++it) {
            if (it->index <= rec.slide) search(*it);
        }
        return total >= k;
    }

    WindowConfig cfg_;
    PartitionId partition_;
    std::size_t capacity_;
    std::int64_t first_alive_ = 0;
    std::deque<Slice> slices_;
    std::unordered_map<ObjectId, Record> records_;
    std::vector<ObjectId> outliers_;
    std::size_t owned_ = 0;
};

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_SLICED_HPP_
