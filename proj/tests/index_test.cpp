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

#include <streamod/index/linear_scan.hpp>
#include <streamod/index/mtree.hpp>
#include <streamod/index/vptree.hpp>

#include "test_support.hpp"

#include <random>

using namespace streamod;

namespace {

template <class Index>
std::vector<ObjectId> query_ids(const Index& idx, const Point& c, double r) {
    std::vector<ObjectId> ids;
    idx.range_query(c, r, [&](ObjectId id, double) { ids.push_back(id); });
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Reference answer straight from the distance function.
std::vector<ObjectId> brute_ids(const std::vector<Point>& pts, const std::vector<bool>& alive, const Point& c,
                                double r, Metric m) {
    std::vector<ObjectId> ids;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (alive[i] && distance(c, pts[i], m) <= r) ids.push_back(i);
    }
    return ids;
}

}  // namespace

TEST(LinearScan, InsertRemoveQuery) {
    LinearScan<> idx;
    idx.insert(1, Point{0.0});
    idx.insert(2, Point{0.5});
    idx.insert(3, Point{2.0});
    EXPECT_EQ(range_ids(idx, Point{0.0}, 0.5), (std::vector<ObjectId>{1, 2}));
    idx.remove(2);
    EXPECT_EQ(range_ids(idx, Point{0.0}, 0.5), (std::vector<ObjectId>{1}));
    EXPECT_THROW(idx.insert(1, Point{1.0}), UsageError);
    EXPECT_THROW(idx.remove(42), UsageError);
    EXPECT_EQ(idx.size(), 2u);
}

TEST(MTree, ClosedBallIncludesBoundary) {
    MTree<> tree(4);
    for (ObjectId i = 0; i < 50; ++i) tree.insert(i, Point{static_cast<double>(i)});
    EXPECT_EQ(query_ids(tree, Point{10.0}, 2.0), (std::vector<ObjectId>{8, 9, 10, 11, 12}));
    tree.check_invariants();
    EXPECT_GT(tree.height(), 1u);
}

TEST(MTree, DuplicatesAndMissingIdsThrow) {
    MTree<> tree;
    tree.insert(7, Point{1.0, 1.0});
    EXPECT_THROW(tree.insert(7, Point{2.0, 2.0}), UsageError);
    EXPECT_THROW(tree.remove(8), UsageError);
    EXPECT_TRUE(tree.contains(7));
}

TEST(MTree, IdenticalPointsSplitCleanly) {
    MTree<> tree(4);
    for (ObjectId i = 0; i < 200; ++i) tree.insert(i, Point{3.0, 3.0});
    tree.check_invariants();
    EXPECT_EQ(query_ids(tree, Point{3.0, 3.0}, 0.0).size(), 200u);
    for (ObjectId i = 0; i < 200; i += 2) tree.remove(i);
    tree.check_invariants();
    EXPECT_EQ(query_ids(tree, Point{3.0, 3.0}, 0.0).size(), 100u);
}

TEST(MTree, ChurnKeepsInvariantsAndAnswers) {
    std::mt19937_64 rng(11);
    const auto pts = testkit::uniform_points(3000, 2, 0.0, 10.0, 5);
    std::vector<bool> alive(pts.size(), false);
    MTree<> tree(6);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    for (int step = 0; step < 20000; ++step) {
        const std::size_t i = pick(rng);
        if (alive[i]) {
            tree.remove(i);
        } else {
            tree.insert(i, pts[i]);
        }
        alive[i] = !alive[i];
        if (step % 2000 == 0) {
            tree.check_invariants();
            const Point& c = pts[pick(rng)];
            EXPECT_EQ(query_ids(tree, c, 0.7), brute_ids(pts, alive, c, 0.7, Metric::euclidean));
        }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (alive[i]) tree.remove(i);
    }
    EXPECT_EQ(tree.size(), 0u);
    tree.check_invariants();
}

TEST(VPTree, SinglePointIsALeaf) {
    std::vector<Point> pts{Point{1.0}};
    const auto tree = VPTree<>::build(pts);
    EXPECT_EQ(tree.depth(), 0u);
    EXPECT_EQ(query_ids(tree, Point{1.0}, 0.0), (std::vector<ObjectId>{0}));
}

TEST(VPTree, AllEqualPointsStopSplitting) {
    std::vector<Point> pts(64, Point{2.0, 2.0});
    const auto tree = VPTree<>::build(pts);
    EXPECT_EQ(tree.depth(), 0u);
    EXPECT_EQ(query_ids(tree, Point{2.0, 2.0}, 0.0).size(), 64u);
}

TEST(VPTree, LevelNodesCoverAllPoints) {
    const auto pts = testkit::uniform_points(1000, 2, 0.0, 1.0, 9);
    const auto tree = VPTree<>::build(pts);
    ASSERT_GE(tree.complete_depth(), 3u);
    const auto nodes = tree.nodes_at_level(3);
    EXPECT_EQ(nodes.size(), 8u);
    std::size_t covered = 0;
    for (auto n : nodes) covered += tree.points_under(n).size();
    EXPECT_EQ(covered, pts.size());
    EXPECT_THROW(tree.nodes_at_level(0), UsageError);
}

TEST(VPTree, DepthCapKeepsDeepPointsInLeaves) {
    const auto pts = testkit::uniform_points(1000, 2, 0.0, 1.0, 9);
    const auto tree = VPTree<>::build(pts, VPTree<>::kDefaultSeed, Distance{}, 2);
    EXPECT_EQ(tree.depth(), 2u);
    EXPECT_EQ(tree.complete_depth(), 2u);
    EXPECT_EQ(tree.node_count(), 7u);
    std::size_t covered = 0;
    for (auto n : tree.nodes_at_level(2)) covered += tree.points_under(n).size();
    EXPECT_EQ(covered, pts.size());
    // queries still see every stored point
    std::size_t hits = 0;
    tree.range_query(Point{0.5, 0.5}, 2.0, [&](ObjectId, double) { ++hits; });
    EXPECT_EQ(hits, pts.size());
}

// 10^5 randomized range queries over three structures and three metrics
TEST(IndexEquivalence, HundredThousandRandomQueriesAgree) {
    std::mt19937_64 rng(2024);
    std::size_t queries = 0;
    for (Metric m : {Metric::euclidean, Metric::manhattan, Metric::chebyshev}) {
        for (std::size_t dims = 1; dims <= 3; ++dims) {
            std::vector<Point> pts = testkit::uniform_points(1500, dims, 0.0, 1.0, 31 * dims + static_cast<int>(m));
            // exact duplicates and grid-aligned values exercise the boundary of the closed ball
            for (std::size_t i = 0; i < 100; ++i) pts.push_back(pts[i]);
            for (std::size_t i = 0; i < 100; ++i) {
                std::vector<double> v(dims, 0.05 * static_cast<double>(i % 20));
                pts.emplace_back(std::span<const double>(v));
            }
            LinearScan<> lin(Distance{m});
            MTree<> tree(MTree<>::kDefaultCapacity, Distance{m});
            for (std::size_t i = 0; i < pts.size(); ++i) {
                lin.insert(i, pts[i]);
                tree.insert(i, pts[i]);
            }
            const auto vp = VPTree<>::build(pts, VPTree<>::kDefaultSeed, Distance{m});
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
            for (int q = 0; q < 11112; ++q) {
                Point c;
                if (q % 3 == 0) {
                    c = pts[pick(rng)];
                } else {
                    std::vector<double> v(dims);
                    for (auto& x : v) x = u(rng);
                    c = Point(std::span<const double>(v));
                }
                const double r = q % 5 == 0 ? 0.05 : 0.2 * u(rng);
                const auto expect = query_ids(lin, c, r);
                ASSERT_EQ(query_ids(tree, c, r), expect) << "M-tree query " << q;
                ASSERT_EQ(query_ids(vp, c, r), expect) << "VP-tree query " << q;
                ++queries;
            }
        }
    }
    EXPECT_GE(queries, 100000u);
}
