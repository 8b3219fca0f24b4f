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

#ifndef STREAMOD_INDEX_LINEAR_SCAN_HPP_
#define STREAMOD_INDEX_LINEAR_SCAN_HPP_

#include <streamod/core.hpp>

#include <algorithm>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace streamod {

/**
 * @brief Reference index: stores points in a flat array and answers range queries by scanning all of them.
 */
template <class DistanceFn = Distance>
class LinearScan {
  public:
    explicit LinearScan(DistanceFn dist = {}) : dist_(dist) {}

    void insert(ObjectId id, const Point& value) {
        if (slots_.contains(id)) throw UsageError("linear scan: duplicate id " + std::to_string(id));
        slots_.emplace(id, entries_.size());
        entries_.push_back({id, value});
    }

    void remove(ObjectId id) {
        auto it = slots_.find(id);
        if (it == slots_.end()) throw UsageError("linear scan: id " + std::to_string(id) + " not present");
        const std::size_t slot = it->second;
        slots_.erase(it);
        if (slot + 1 != entries_.size()) {
            entries_[slot] = entries_.back();
            slots_[entries_[slot].id] = slot;
        }
        entries_.pop_back();
    }

    [[nodiscard]] bool contains(ObjectId id) const { return slots_.contains(id); }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }

    /// Calls visit(id, distance) for every stored point with distance(center, point) <= radius.
    template <class Visitor>
    void range_query(const Point& center, double radius, Visitor&& visit) const {
        for (const auto& e : entries_) {
            const double d = dist_(center, e.value);
            if (d <= radius) visit(e.id, d);
        }
    }

    template <class Visitor>
    void for_each(Visitor&& visit) const {
        for (const auto& e : entries_) visit(e.id, e.value);
    }

  private:
    struct Entry {
        ObjectId id;
        Point value;
    };

    DistanceFn dist_;
    std::vector<Entry> entries_;
    std::unordered_map<ObjectId, std::size_t> slots_;
};

/// Sorted ids of a range query, for comparisons between index types.
template <class Index>
std::vector<ObjectId> range_ids(const Index& index, const Point& center, double radius) {
    std::vector<ObjectId> ids;
    index.range_query(center, radius, [&](ObjectId id, double) { ids.push_back(id); });
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace streamod

#endif  // STREAMOD_INDEX_LINEAR_SCAN_HPP_
