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

#include <gtest/gtest.h>

#include "test_support.hpp"

#include <atomic>
#include <stdexcept>

using namespace streamod;

namespace {

TopologyConfig topology(Algorithm a, Partitioning part, std::size_t P) {
    TopologyConfig t;
    t.window = count_window(1000, 100, 0.28, 10, 1, P);
    t.algorithm = a;
    t.partitioning = part;
    return t;
}

bool same_content(const RunResult& a, const RunResult& b) {
    if (a.reports.size() != b.reports.size()) return false;
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        const auto& x = a.reports[i];
        const auto& y = b.reports[i];
        if (x.interval != y.interval || x.outliers != y.outliers || x.arrivals != y.arrivals
            || x.delivered != y.delivered || x.active != y.active) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(TopologyConfig, RejectsInvalidCombinations) {
    EXPECT_THROW(topology(Algorithm::baseline, Partitioning::random, 4).validate(), UsageError);
    EXPECT_THROW(topology(Algorithm::naive, Partitioning::grid, 4).validate(), UsageError);
    EXPECT_THROW(topology(Algorithm::naive, Partitioning::vptree, 2).validate(), UsageError);
    EXPECT_THROW(topology(Algorithm::advanced_sliced, Partitioning::random, 2).validate(), UsageError);
    EXPECT_THROW(topology(Algorithm::pmcod, Partitioning::random, 1).validate(), UsageError);
    auto zero_workers = topology(Algorithm::advanced, Partitioning::grid, 2);
    zero_workers.workers = 0;
    EXPECT_THROW(zero_workers.validate(), UsageError);
    auto tiny = topology(Algorithm::advanced, Partitioning::grid, 2);
    tiny.mtree_capacity = 2;
    EXPECT_THROW(tiny.validate(), UsageError);
    EXPECT_NO_THROW(topology(Algorithm::advanced, Partitioning::random, 3).validate());
    EXPECT_NO_THROW(topology(Algorithm::advanced_sliced, Partitioning::random, 1).validate());
}

TEST(TopologyConfig, AlgorithmNamesRoundTrip) {
    for (auto a : {Algorithm::baseline, Algorithm::naive, Algorithm::advanced, Algorithm::advanced_sliced,
                   Algorithm::pmcod}) {
        EXPECT_EQ(parse_algorithm(to_string(a)), a);
    }
    EXPECT_STREQ(to_string(Algorithm::advanced_sliced), "advanced-sliced");
    EXPECT_THROW(parse_algorithm("mcod"), UsageError);
}

TEST(Runtime, WrongDimensionalityIsAUsageError) {
    auto src = testkit::gaussian_source(2, 1, 1000, 100, 300);
    EXPECT_THROW(run_topology(src, topology(Algorithm::baseline, Partitioning::random, 1)), UsageError);
}

TEST(Runtime, FailureNamesSlideAndPartition) {
    auto topo = topology(Algorithm::advanced, Partitioning::random, 3);
    Topology t(topo, {});
    std::vector<StreamObject> arrivals;
    for (ObjectId id = 0; id < 3; ++id) arrivals.push_back(testkit::make_object(id, Point{0.5}, 7));
    // id 5 is owned by partition 2 and carries two coordinates
    arrivals.push_back(testkit::make_object(5, Point{0.5, 0.5}, 7));
    try {
        t.step(7, arrivals);
        FAIL() << "expected RunFailure";
    } catch (const RunFailure& e) {
        EXPECT_EQ(e.slide(), 7);
        EXPECT_EQ(std::string(e.what()).rfind("slide 7, partition ", 0), 0u) << e.what();
    }
}

TEST(RunFailure, MessageFormat) {
    const RunFailure f(12, 3, "boom");
    EXPECT_STREQ(f.what(), "slide 12, partition 3: boom");
    EXPECT_EQ(f.partition(), 3u);
}

TEST(WorkerPool, RunsEveryTaskOnceAndCollectsExceptions) {
    for (std::size_t workers : {1u, 2u, 5u}) {
        WorkerPool pool(workers);
        EXPECT_EQ(pool.workers(), workers);
        for (int round = 0; round < 50; ++round) {
            std::vector<std::atomic<int>> hits(13);
            auto errors = pool.run(13, [&](std::size_t i) {
                hits[i].fetch_add(1);
                if (i == 4) throw std::runtime_error("task 4");
            });
            ASSERT_EQ(errors.size(), 13u);
            for (std::size_t i = 0; i < 13; ++i) {
                EXPECT_EQ(hits[i].load(), 1);
                EXPECT_EQ(static_cast<bool>(errors[i]), i == 4);
            }
        }
        EXPECT_TRUE(pool.run(0, [](std::size_t) {}).empty());
    }
}

TEST(StreamHandler, NaiveCopiesEveryObjectToEveryPartition) {
    const auto partitioner = Partitioner::random(4);
    std::vector<StreamObject> arrivals{testkit::make_object(6, Point{1.0}, 0), testkit::make_object(7, Point{2.0}, 0)};
    const auto routed = stream_handler(arrivals, partitioner, 4);
    EXPECT_EQ(routed.delivered, 8u);
    for (std::size_t p = 0; p < 4; ++p) {
        ASSERT_EQ(routed.inboxes[p].size(), 2u);
        for (const auto& o : routed.inboxes[p]) {
            const PartitionId owner = static_cast<PartitionId>(o.id % 4);
            EXPECT_EQ(o.partition, owner);
            EXPECT_EQ(o.flag, p == owner ? 0 : 1);
        }
    }
}

TEST(Runtime, WindowAccountingMatchesElapsedSlides) {
    const auto src = testkit::gaussian_source(1, 3, 1000, 100, 2000);
    const auto run = run_topology(src, topology(Algorithm::advanced, Partitioning::grid, 2));
    ASSERT_EQ(run.reports.size(), 20u);
    for (std::size_t j = 0; j < run.reports.size(); ++j) {
        const auto& r = run.reports[j];
        EXPECT_EQ(r.interval.slide_index, static_cast<std::int64_t>(j));
        EXPECT_EQ(r.arrivals, 100u);
        EXPECT_EQ(r.active, std::min<std::size_t>((j + 1) * 100, 1000));
        EXPECT_GE(r.delivered, r.arrivals);
    }
    EXPECT_EQ(run.metrics.arrivals, 2000u);
    EXPECT_EQ(run.metrics.measured_slides, 20 - kWarmupSlides);
}

TEST(Runtime, MaxSlidesStopsEarly) {
    const auto src = testkit::gaussian_source(1, 3, 1000, 100, 2000);
    RunOptions opts;
    opts.max_slides = 7;
    EXPECT_EQ(run_topology(src, topology(Algorithm::baseline, Partitioning::random, 1), opts).reports.size(), 7u);
}

TEST(Runtime, EmptySlidesInNativeTimeStillReport) {
    StreamSource src;
    src.mode = ArrivalMode::native;
    src.objects = {testkit::make_object(0, Point{0.0}, 0), testkit::make_object(1, Point{0.1}, 0),
                   testkit::make_object(2, Point{5.0}, 31)};
    TopologyConfig topo;
    topo.window.window = 20;
    topo.window.slide = 10;
    topo.window.radius = 0.5;
    topo.window.k = 1;
    const auto run = run_topology(src, topo);
    ASSERT_EQ(run.reports.size(), 4u);
    EXPECT_TRUE(run.reports[0].outliers.empty());
    EXPECT_EQ(run.reports[1].active, 2u);
    EXPECT_EQ(run.reports[2].active, 0u);
    EXPECT_EQ(run.reports[3].outliers, (std::vector<ObjectId>{2}));
}

TEST(Runtime, DeterministicAcrossWorkerCounts) {
    const auto src = testkit::gaussian_source(2, 17, 1000, 100, 3000);
    for (const auto& v : {testkit::Variant{Algorithm::naive, Partitioning::random, 4, {}},
                          testkit::Variant{Algorithm::advanced, Partitioning::vptree, 4, {}},
                          testkit::Variant{Algorithm::advanced_sliced, Partitioning::grid, 4, {}},
                          testkit::pmcod_flavors(Partitioning::grid, 4)[4]}) {
        const auto cfg = count_window(1000, 100, 0.2, 8, 2);
        const auto one = run_topology(src, testkit::make_topology(cfg, v, 1));
        for (std::size_t workers : {2u, 8u}) {
            EXPECT_TRUE(same_content(one, run_topology(src, testkit::make_topology(cfg, v, workers))))
                << v.name() << " workers " << workers;
        }
    }
}

TEST(Runtime, SinglePartitionEqualsBaselineForEveryAlgorithm) {
    const auto src = testkit::gaussian_source(1, 23, 1000, 100, 2500);
    const auto cfg = count_window(1000, 100, 0.28, 10, 1);
    const auto base = testkit::outliers_of(run_topology(src, testkit::make_topology(cfg, {})));
    for (const auto& v : testkit::all_variants(1)) {
        EXPECT_EQ(testkit::outliers_of(run_topology(src, testkit::make_topology(cfg, v))), base) << v.name();
    }
}

TEST(Runtime, InvariantCheckPassesOnAHealthyRun) {
    const auto src = testkit::gaussian_source(3, 2, 500, 50, 1500);
    RunOptions opts;
    opts.check_invariants = true;
    for (const auto& v : testkit::all_variants(3)) {
        EXPECT_NO_THROW(run_topology(src, testkit::make_topology(count_window(500, 50, 0.3, 5, 3), v), opts))
            << v.name();
    }
}

TEST(Metrics, ConstantSlideTimes) {
    std::vector<OutlierReport> reports(20);
    for (auto& r : reports) {
        r.slide_wall_ms = 10.0;
        r.arrivals = 500;
        r.delivered = 1000;
        r.active = 1000;
        r.outliers = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    }
    const auto m = collect_metrics(reports);
    EXPECT_DOUBLE_EQ(m.mean_slide_ms, 10.0);
    EXPECT_DOUBLE_EQ(m.median_slide_ms, 10.0);
    EXPECT_DOUBLE_EQ(m.replication, 2.0);
    EXPECT_DOUBLE_EQ(m.outlier_fraction, 0.01);
}

TEST(Metrics, ThroughputOverTheWholeRun) {
    // 200 slides of 500 arrivals in 10 s
    std::vector<OutlierReport> reports(200);
    for (auto& r : reports) {
        r.slide_wall_ms = 50.0;
        r.arrivals = 500;
        r.delivered = 500;
    }
    EXPECT_DOUBLE_EQ(collect_metrics(reports).throughput, 10000.0);
}

TEST(Metrics, MedianOfEvenCountAndWarmup) {
    std::vector<OutlierReport> reports(9);
    const double times[] = {1000, 1000, 1000, 1000, 1000, 4, 1, 3, 2};
    for (std::size_t i = 0; i < 9; ++i) reports[i].slide_wall_ms = times[i];
    const auto m = collect_metrics(reports);
    EXPECT_EQ(m.measured_slides, 4u);
    EXPECT_DOUBLE_EQ(m.mean_slide_ms, 2.5);
    EXPECT_DOUBLE_EQ(m.median_slide_ms, 2.5);
    EXPECT_EQ(collect_metrics({}).slides, 0u);
}
