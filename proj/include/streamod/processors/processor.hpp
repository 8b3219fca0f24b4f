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

#ifndef STREAMOD_PROCESSORS_PROCESSOR_HPP_
#define STREAMOD_PROCESSORS_PROCESSOR_HPP_

#include <streamod/core.hpp>

#include <cstdint>
#include <vector>

namespace streamod {

/// One slide's input for one partition.
struct SlideBatch {
    WindowInterval interval;
    std::vector<StreamObject> arrivals;  ///< timestamp order, flags set by the router

    [[nodiscard]] Tick expiry_threshold() const { return interval.start; }
};

/// Neighbor counts one partition contributes for one object, for the meta-window merge.
struct LocalMetadata {
    ObjectId id = 0;
    Tick t = 0;
    PartitionId owner = 0;
    bool replica = false;
    std::uint32_t count_after = 0;
    std::vector<Tick> nn_before;
};

struct ProcessorCounters {
    std::uint64_t range_queries = 0;
    std::uint64_t own_slide_probes = 0;
    std::uint64_t older_slide_probes = 0;   ///< arrival probes into preceding slides
    std::uint64_t reprobes = 0;             ///< probes issued while re-evaluating after expiry
    std::uint64_t rechecks = 0;             ///< objects whose status was evaluated
    std::uint64_t dissolved_clusters = 0;

    ProcessorCounters& operator+=(const ProcessorCounters& o) {
        range_queries += o.range_queries;
        own_slide_probes += o.own_slide_probes;
        older_slide_probes += o.older_slide_probes;
        reprobes += o.reprobes;
        rechecks += o.rechecks;
        dissolved_clusters += o.dissolved_clusters;
        return *this;
    }
};

struct SlideOutput {
    std::vector<ObjectId> outliers;     ///< final per-partition outliers (sorted), empty in merge mode
    std::vector<LocalMetadata> locals;  ///< merge mode only
    bool needs_merge = false;
    ProcessorCounters counters;
};

/**
 * @brief Per-partition slide processor shared by every algorithm family.
 *
 * A processor owns its state exclusively and is driven by one thread at a time.
 */
class SlideProcessor {
  public:
    virtual ~SlideProcessor() = default;

    virtual SlideOutput process(const SlideBatch& batch) = 0;

    /// Owned (flag 0) objects currently known to be safe inliers.
    [[nodiscard]] virtual std::vector<ObjectId> safe_inliers() const = 0;

    /// Owned (flag 0) objects alive in this partition.
    [[nodiscard]] virtual std::size_t owned_count() const = 0;

    /// Throws InternalError if a structural invariant is violated.
    virtual void check_invariants() const {}
};

}  // namespace streamod

#endif  // STREAMOD_PROCESSORS_PROCESSOR_HPP_
