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

#ifndef STREAMOD_STREAM_HPP_
#define STREAMOD_STREAM_HPP_

#include <streamod/core.hpp>

#include <span>
#include <string>
#include <vector>

namespace streamod {

enum class ArrivalMode { native, count_based };

/// Ordered input stream. Ids follow input order.
struct StreamSource {
    std::vector<StreamObject> objects;
    ArrivalMode mode = ArrivalMode::count_based;

    void validate() const {
        for (std::size_t i = 1; i < objects.size(); ++i) {
            if (objects[i].t < objects[i - 1].t) {
                throw UsageError("stream timestamps must be non-decreasing (object " + std::to_string(objects[i].id)
                                 + " at tick " + std::to_string(objects[i].t) + ")");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return objects.size(); }
};

/// Object i gets tick i / S_count, so every slide holds exactly S_count objects.
inline void assign_artificial_timestamps(std::span<StreamObject> objects, std::size_t window_count,
                                         std::size_t slide_count) {
    if (slide_count == 0 || window_count % slide_count != 0) {
        throw UsageError("count-based windows need S to divide W (got W=" + std::to_string(window_count)
                         + ", S=" + std::to_string(slide_count) + ")");
    }
    for (std::size_t i = 0; i < objects.size(); ++i) objects[i].t = static_cast<Tick>(i / slide_count);
}

/// Window parameters in ticks for a count-based stream with W_count alive and S_count new objects per slide.
inline WindowConfig count_window(std::size_t window_count, std::size_t slide_count, double radius, std::size_t k,
                                 std::size_t dims, std::size_t partitions = 1, Metric metric = Metric::euclidean) {
    if (slide_count == 0 || window_count % slide_count != 0) {
        throw UsageError("count-based windows need S to divide W (got W=" + std::to_string(window_count)
                         + ", S=" + std::to_string(slide_count) + ")");
    }
    WindowConfig cfg;
    cfg.window = static_cast<Tick>(window_count / slide_count);
    cfg.slide = 1;
    cfg.radius = radius;
    cfg.k = k;
    cfg.dims = dims;
    cfg.partitions = partitions;
    cfg.metric = metric;
    return cfg;
}

/// Builds a count-based source from values in arrival order.
inline StreamSource make_count_source(std::span<const Point> values, std::size_t window_count,
                                      std::size_t slide_count) {
    StreamSource src;
    src.mode = ArrivalMode::count_based;
    src.objects.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        src.objects[i].id = i;
        src.objects[i].value = values[i];
    }
    assign_artificial_timestamps(src.objects, window_count, slide_count);
    return src;
}

}  // namespace streamod

#endif  // STREAMOD_STREAM_HPP_
