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

#ifndef STREAMOD_RUNTIME_HPP_
#define STREAMOD_RUNTIME_HPP_

#include <streamod/core.hpp>
#include <streamod/partitioner.hpp>
#include <streamod/processors/exact_storm.hpp>
#include <streamod/processors/meta_window.hpp>
#include <streamod/processors/pmcod.hpp>
#include <streamod/processors/sliced.hpp>
#include <streamod/stream.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

namespace streamod {

enum class Algorithm { baseline, naive, advanced, advanced_sliced, pmcod };

inline const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::baseline: return "baseline";
    case Algorithm::naive: return "naive";
    case Algorithm::advanced: return "advanced";
    case Algorithm::advanced_sliced: return "advanced-sliced";
    default: return "pmcod";
    }
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "baseline") return Algorithm::baseline;
    if (s == "naive") return Algorithm::naive;
    if (s == "advanced") return Algorithm::advanced;
    if (s == "advanced-sliced") return Algorithm::advanced_sliced;
    if (s == "pmcod") return Algorithm::pmcod;
    throw UsageError("unknown algorithm '" + s + "' (expected baseline, naive, advanced, advanced-sliced or pmcod)");
}

struct TopologyConfig {
    WindowConfig window;
    Algorithm algorithm = Algorithm::baseline;
    Partitioning partitioning = Partitioning::random;
    PmcodOptions pmcod;
    std::size_t workers = 1;
    std::size_t sample_size = 10000;
    std::size_t mtree_capacity = MTree<>::kDefaultCapacity;

    void validate() const {
        window.validate();
        if (workers < 1) throw UsageError("workers must be at least 1");
        if (mtree_capacity < 4) throw UsageError("M-tree node capacity must be at least 4");
        const std::size_t P = window.partitions;
        switch (algorithm) {
        case Algorithm::baseline:
            if (P != 1) throw UsageError("baseline is single-partition: use --partitions 1");
            break;
        case Algorithm::naive:
            if (partitioning != Partitioning::random) {
                throw UsageError("naive replicates every object and requires random partitioning");
            }
            break;
        case Algorithm::advanced: break;
        case Algorithm::advanced_sliced:
            if (partitioning == Partitioning::random && P > 1) {
                throw UsageError("the time-sliced processor needs value-based partitioning (grid or vptree)");
            }
            break;
        case Algorithm::pmcod:
            if (partitioning == Partitioning::random) {
                throw UsageError("pmcod needs value-based partitioning (grid or vptree)");
            }
            break;
        }
    }
};

/// Thrown when a partition worker fails; names the slide and the partition.
class RunFailure : public std::runtime_error {
  public:
    RunFailure(std::int64_t slide, PartitionId partition, const std::string& what)
        : std::runtime_error("slide " + std::to_string(slide) + ", partition " + std::to_string(partition) + ": "
                             + what),
          slide_(slide),
          partition_(partition) {}

    [[nodiscard]] std::int64_t slide() const { return slide_; }
    [[nodiscard]] PartitionId partition() const { return partition_; }

  private:
    std::int64_t slide_;
    PartitionId partition_;
};

/**
 * @brief Fixed set of threads that execute indexed task batches. The caller thread takes part.
 */
class WorkerPool {
  public:
    explicit WorkerPool(std::size_t workers) {
        for (std::size_t i = 1; i < workers; ++i) threads_.emplace_back([this] { loop(); });
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : threads_) t.join();
    }

    [[nodiscard]] std::size_t workers() const { return threads_.size() + 1; }

    /// Runs fn(0..tasks-1) and blocks until all finish. Returns one (possibly null) exception per task.
    std::vector<std::exception_ptr> run(std::size_t tasks, const std::function<void(std::size_t)>& fn) {
        std::vector<std::exception_ptr> errors(tasks);
        if (tasks == 0) return errors;
        if (threads_.empty() || tasks == 1) {
            for (std::size_t i = 0; i < tasks; ++i) execute(fn, i, errors);
            return errors;
        }
        Batch batch{&fn, &errors, tasks};
        {
            std::lock_guard lock(mutex_);
            batch_ = batch;
            next_.store(0);
            done_ = 0;
            ++generation_;
        }
        wake_.notify_all();
        const std::size_t mine = drain(batch);
        std::unique_lock lock(mutex_);
        done_ += mine;
        finished_.wait(lock, [&] { return done_ == tasks && active_ == 0; });
        batch_ = Batch{};
        return errors;
    }

  private:
    struct Batch {
        const std::function<void(std::size_t)>* fn = nullptr;
        std::vector<std::exception_ptr>* errors = nullptr;
        std::size_t tasks = 0;
    };

    static void execute(const std::function<void(std::size_t)>& fn, std::size_t i,
                        std::vector<std::exception_ptr>& errors) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }

    std::size_t drain(const Batch& batch) {
        std::size_t finished = 0;
        if (batch.fn == nullptr) return finished;
        for (std::size_t i = next_.fetch_add(1); i < batch.tasks; i = next_.fetch_add(1)) {
            execute(*batch.fn, i, *batch.errors);
            ++finished;
        }
        return finished;
    }

    void loop() {
        std::uint64_t seen = 0;
        for (;;) {
            Batch batch;
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                batch = batch_;
                ++active_;
            }
            const std::size_t finished = drain(batch);
            {
                std::lock_guard lock(mutex_);
                done_ += finished;
                --active_;
            }
            finished_.notify_all();
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable finished_;
    Batch batch_;
    std::atomic<std::size_t> next_{0};
    std::size_t done_ = 0;
    std::size_t active_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

/// Per-partition inboxes for one slide.
struct RoutedSlide {
    std::vector<std::vector<StreamObject>> inboxes;
    std::size_t delivered = 0;
};

/// Routes arrivals: the owner copy carries flag 0, replicas flag 1; all copies record the owner.
inline RoutedSlide stream_handler(std::span<const StreamObject> arrivals, const Partitioner& partitioner,
                                  std::size_t partitions) {
    RoutedSlide out;
    out.inboxes.resize(partitions);
    for (const auto& src : arrivals) {
        const RoutingDecision d = partitioner.route(src.id, src.value);
        StreamObject o = src;
        o.reset_metadata();
        o.partition = d.owner;
        o.flag = 0;
        out.inboxes[d.owner].push_back(o);
        o.flag = 1;
        for (PartitionId r : d.replicas) out.inboxes[r].push_back(o);
        out.delivered += d.copies();
    }
    return out;
}

inline std::unique_ptr<SlideProcessor> make_processor(const TopologyConfig& topo, PartitionId partition,
                                                      bool value_based) {
    const WindowConfig& cfg = topo.window;
    switch (topo.algorithm) {
    case Algorithm::baseline: return make_baseline_processor(cfg);
    case Algorithm::naive: return make_naive_processor(cfg, partition);
    case Algorithm::advanced: return make_advanced_processor(cfg, partition, value_based, topo.mtree_capacity);
    case Algorithm::advanced_sliced: return std::make_unique<SlicedProcessor>(cfg, partition, topo.mtree_capacity);
    default: {
        PmcodOptions opts = topo.pmcod;
        opts.mtree_capacity = topo.mtree_capacity;
        return make_pmcod_processor(cfg, partition, opts);
    }
    }
}

struct RunOptions {
    std::optional<std::size_t> max_slides;
    bool check_invariants = false;  ///< processor invariants and safe-inlier monotonicity after every slide
    std::vector<Point> sample;      ///< partitioner sample; empty means the stream prefix
};

struct RunMetrics {
    std::size_t slides = 0;
    std::size_t measured_slides = 0;
    double mean_slide_ms = 0.0;
    double median_slide_ms = 0.0;
    double total_ms = 0.0;
    double throughput = 0.0;   ///< arrivals per second over all slides
    double replication = 0.0;  ///< delivered copies per arrival
    double outlier_fraction = 0.0;
    std::size_t arrivals = 0;
    std::size_t delivered = 0;
};

struct RunResult {
    std::vector<OutlierReport> reports;
    std::vector<ProcessorCounters> counters;  ///< summed over partitions, one per slide
    ProcessorCounters totals;
    RunMetrics metrics;
};

inline constexpr std::size_t kWarmupSlides = 5;

/// Mean and median over slides after the warm-up; throughput and replication over the whole run.
inline RunMetrics collect_metrics(std::span<const OutlierReport> reports) {
    RunMetrics m;
    m.slides = reports.size();
    if (reports.empty()) return m;
    const std::size_t skip = reports.size() > kWarmupSlides ? kWarmupSlides : 0;
    std::vector<double> times;
    double fraction = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        m.total_ms += reports[i].slide_wall_ms;
        m.arrivals += reports[i].arrivals;
        m.delivered += reports[i].delivered;
        if (i < skip) continue;
        times.push_back(reports[i].slide_wall_ms);
        if (reports[i].active > 0) {
            fraction += static_cast<double>(reports[i].outliers.size()) / static_cast<double>(reports[i].active);
        }
    }
    m.measured_slides = times.size();
    double sum = 0.0;
    for (double t : times) sum += t;
    m.mean_slide_ms = sum / static_cast<double>(times.size());
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    m.median_slide_ms = n % 2 == 1 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    m.outlier_fraction = fraction / static_cast<double>(n);
    m.throughput = m.total_ms > 0.0 ? static_cast<double>(m.arrivals) / (m.total_ms / 1000.0) : 0.0;
    m.replication = m.arrivals > 0 ? static_cast<double>(m.delivered) / static_cast<double>(m.arrivals) : 0.0;
    return m;
}

/**
 * @brief A running topology: routing, per-partition processors and the meta-window stage.
 *
 * Slides are fed in order through step(). Processors keep their state between slides.
 */
class Topology {
  public:
    Topology(const TopologyConfig& topo, std::span<const Point> sample)
        : topo_(topo), partitioner_(make_partitioner(topo, sample)), pool_(topo.workers) {
        topo_.validate();
        const std::size_t P = topo_.window.partitions;
        const bool value_based = partitioner_.value_based() || P == 1;
        for (std::size_t p = 0; p < P; ++p) {
            processors_.push_back(make_processor(topo_, static_cast<PartitionId>(p), value_based));
            shards_.emplace_back(topo_.window, static_cast<PartitionId>(p));
        }
    }

    /// Processes one slide whose arrivals all fall in [j*S, (j+1)*S).
    OutlierReport step(std::int64_t slide_index, std::span<const StreamObject> arrivals,
                       ProcessorCounters* counters = nullptr) {
        const auto started = std::chrono::steady_clock::now();
        const std::size_t P = processors_.size();
        const WindowInterval interval = window_after_slide(topo_.window, slide_index);

        RoutedSlide routed = stream_handler(arrivals, partitioner_, P);
        std::vector<SlideOutput> outputs(P);
        auto errors = pool_.run(P, [&](std::size_t p) {
            SlideBatch batch{interval, std::move(routed.inboxes[p])};
            outputs[p] = processors_[p]->process(batch);
        });
        rethrow_first(slide_index, errors);

        OutlierReport report;
        report.interval = interval;
        report.arrivals = arrivals.size();
        report.delivered = routed.delivered;

        if (std::any_of(outputs.begin(), outputs.end(), [](const SlideOutput& o) { return o.needs_merge; })) {
            std::vector<std::vector<LocalContribution>> inputs(P, std::vector<LocalContribution>(P));
            for (std::size_t src = 0; src < P; ++src) {
                for (std::size_t dst = 0; dst < P; ++dst) {
                    inputs[dst][src].source = static_cast<PartitionId>(src);
                    inputs[dst][src].slide_index = slide_index;
                }
                for (auto& e : outputs[src].locals) inputs[e.owner][src].entries.push_back(std::move(e));
            }
            std::vector<std::vector<ObjectId>> merged(P);
            auto merge_errors = pool_.run(P, [&](std::size_t p) { merged[p] = shards_[p].merge(interval, inputs[p]); });
            rethrow_first(slide_index, merge_errors);
            for (auto& m : merged) report.outliers.insert(report.outliers.end(), m.begin(), m.end());
        } else {
            for (auto& o : outputs) report.outliers.insert(report.outliers.end(), o.outliers.begin(), o.outliers.end());
        }
        std::sort(report.outliers.begin(), report.outliers.end());
        for (const auto& proc : processors_) report.active += proc->owned_count();

        if (counters != nullptr) {
            for (const auto& o : outputs) *counters += o.counters;
        }
        report.slide_wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return report;
    }

    /// Throws InternalError on a violated processor invariant or a safe inlier reported as an outlier.
    void check(const OutlierReport& report) {
        for (std::size_t p = 0; p < processors_.size(); ++p) {
            try {
                processors_[p]->check_invariants();
            } catch (const std::exception& e) {
                throw RunFailure(report.interval.slide_index, static_cast<PartitionId>(p), e.what());
            }
        }
        for (ObjectId id : report.outliers) {
            if (safe_.contains(id)) {
                throw InternalError("slide " + std::to_string(report.interval.slide_index) + ": safe inlier "
                                    + std::to_string(id) + " reported as outlier");
            }
        }
        for (const auto& proc : processors_) {
            for (ObjectId id : proc->safe_inliers()) safe_.insert(id);
        }
    }

    [[nodiscard]] const Partitioner& partitioner() const { return partitioner_; }
    [[nodiscard]] const TopologyConfig& config() const { return topo_; }
    [[nodiscard]] SlideProcessor& processor(std::size_t p) { return *processors_.at(p); }

  private:
    static Partitioner make_partitioner(const TopologyConfig& topo, std::span<const Point> sample) {
        topo.validate();
        const std::size_t P = topo.window.partitions;
        if (P == 1 || topo.algorithm == Algorithm::baseline || topo.partitioning == Partitioning::random) {
            return Partitioner::random(P);
        }
        return Partitioner::build(topo.partitioning, sample, P, topo.window.radius, topo.window.metric);
    }

    static void rethrow_first(std::int64_t slide_index, const std::vector<std::exception_ptr>& errors) {
        for (std::size_t p = 0; p < errors.size(); ++p) {
            if (!errors[p]) continue;
            try {
                std::rethrow_exception(errors[p]);
            } catch (const std::exception& e) {
                throw RunFailure(slide_index, static_cast<PartitionId>(p), e.what());
            } catch (...) {
                throw RunFailure(slide_index, static_cast<PartitionId>(p), "unknown failure");
            }
        }
    }

    TopologyConfig topo_;
    Partitioner partitioner_;
    WorkerPool pool_;
    std::vector<std::unique_ptr<SlideProcessor>> processors_;
    std::vector<MetaWindow> shards_;
    std::unordered_set<ObjectId> safe_;
};

/// Stream prefix used to build value-based partitioners.
inline std::vector<Point> partition_sample(const StreamSource& source, std::size_t sample_size) {
    std::vector<Point> sample;
    const std::size_t n = std::min(sample_size, source.objects.size());
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sample.push_back(source.objects[i].value);
    return sample;
}

/// Runs every slide from the first arrival's slide, stopping after max_slides or when the stream is exhausted.
inline RunResult run_topology(const StreamSource& source, const TopologyConfig& topo, const RunOptions& options = {}) {
    topo.validate();
    source.validate();
    for (const auto& o : source.objects) {
        if (o.value.size() != topo.window.dims) {
            throw UsageError("object " + std::to_string(o.id) + " has " + std::to_string(o.value.size())
                             + " dimensions, expected " + std::to_string(topo.window.dims));
        }
    }
    RunResult result;
    if (source.objects.empty()) return result;

    std::vector<Point> prefix;
    std::span<const Point> sample = options.sample;
    if (sample.empty()) {
        prefix = partition_sample(source, topo.sample_size);
        sample = prefix;
    }
    Topology topology(topo, sample);

    const Tick S = topo.window.slide;
    const auto& objs = source.objects;
    std::int64_t slide = slide_of(objs.front().t, S);
    const std::int64_t last = slide_of(objs.back().t, S);
    std::size_t pos = 0;
    while (slide <= last && (!options.max_slides || result.reports.size() < *options.max_slides)) {
        const Tick end = (slide + 1) * S;
        std::size_t stop = pos;
        while (stop < objs.size() && objs[stop].t < end) ++stop;
        ProcessorCounters c;
        OutlierReport report =
            topology.step(slide, std::span<const StreamObject>(objs.data() + pos, stop - pos), &c);
        if (options.check_invariants) topology.check(report);
        result.totals += c;
        result.counters.push_back(c);
        result.reports.push_back(std::move(report));
        pos = stop;
        ++slide;
    }
    result.metrics = collect_metrics(result.reports);
    return result;
}

}  // namespace streamod

#endif  // STREAMOD_RUNTIME_HPP_
