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

#ifndef STREAMOD_PROCESSORS_EVENT_QUEUE_HPP_
#define STREAMOD_PROCESSORS_EVENT_QUEUE_HPP_

#include <streamod/core.hpp>

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace streamod {

enum class QueueFlavor { none, heap, ordered };

inline const char* to_string(QueueFlavor f) {
    switch (f) {
    case QueueFlavor::heap: return "heap";
    case QueueFlavor::ordered: return "ordered";
    default: return "none";
    }
}

inline QueueFlavor parse_queue_flavor(const std::string& s) {
    if (s == "none") return QueueFlavor::none;
    if (s == "heap") return QueueFlavor::heap;
    if (s == "ordered") return QueueFlavor::ordered;
    throw UsageError("unknown event-queue flavor '" + s + "' (expected none, heap or ordered)");
}

/**
 * @brief Re-check schedule for unsafe inliers, keyed by the arrival time of the oldest alive
 * preceding neighbor.
 *
 * The heap flavor deletes lazily (stale heap entries are skipped on drain); the ordered flavor keeps
 * a balanced tree and erases eagerly. At most one live entry exists per object.
 */
class EventQueue {
  public:
    explicit EventQueue(QueueFlavor flavor = QueueFlavor::heap)
        : flavor_(flavor == QueueFlavor::none ? QueueFlavor::heap : flavor) {}

    /// Schedules (or reschedules) id for re-check once `key` leaves the window.
    void insert(ObjectId id, Tick key) {
        auto [it, fresh] = keys_.try_emplace(id, key);
        if (!fresh) {
            if (it->second == key) return;
            if (flavor_ == QueueFlavor::ordered) ordered_.erase({it->second, id});
            it->second = key;
        }
        if (flavor_ == QueueFlavor::ordered) {
            ordered_.insert({key, id});
        } else {
            heap_.push({key, id});
        }
    }

    /// Schedules an object by its oldest preceding neighbor still inside the window.
    void insert(const StreamObject& o, Tick w_start) {
        auto it = std::lower_bound(o.nn_before.begin(), o.nn_before.end(), w_start);
        if (it == o.nn_before.end()) {
            throw UsageError("event queue: object " + std::to_string(o.id) + " has no alive preceding neighbor");
        }
        insert(o.id, *it);
    }

    void erase(ObjectId id) {
        auto it = keys_.find(id);
        if (it == keys_.end()) return;
        if (flavor_ == QueueFlavor::ordered) ordered_.erase({it->second, id});
        keys_.erase(it);
    }

    /// Pops every entry whose key is older than the new window start and returns their ids in key order.
    std::vector<ObjectId> drain(Tick w_start) {
        std::vector<ObjectId> due;
        if (flavor_ == QueueFlavor::ordered) {
            while (!ordered_.empty() && ordered_.begin()->first < w_start) {
                due.push_back(ordered_.begin()->second);
                keys_.erase(ordered_.begin()->second);
                ordered_.erase(ordered_.begin());
            }
            return due;
        }
        while (!heap_.empty() && heap_.top().first < w_start) {
            const auto [key, id] = heap_.top();
            heap_.pop();
            auto it = keys_.find(id);
            if (it == keys_.end() || it->second != key) continue;
            keys_.erase(it);
            due.push_back(id);
        }
        return due;
    }

    [[nodiscard]] bool contains(ObjectId id) const { return keys_.contains(id); }
    [[nodiscard]] std::size_t size() const { return keys_.size(); }
    [[nodiscard]] bool empty() const { return keys_.empty(); }
    [[nodiscard]] QueueFlavor flavor() const { return flavor_; }

  private:
    using Entry = std::pair<Tick, ObjectId>;

    QueueFlavor flavor_;
    std::unordered_map<ObjectId, Tick> keys_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
    std::set<Entry> ordered_;
};

inline void event_queue_insert(EventQueue& q, const StreamObject& o, Tick w_start) { q.insert(o, w_start); }

inline std::vector<ObjectId> event_queue_drain(EventQueue& q, Tick w_start) { return q.drain(w_start); }

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_EVENT_QUEUE_HPP_
