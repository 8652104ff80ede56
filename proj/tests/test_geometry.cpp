#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "svl/error.hpp"
#include "svl/geometry.hpp"

using namespace svl;

namespace {

std::vector<Point3> random_points(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {d(rng), d(rng), d(rng)};
  return pts;
}

EventStream stream_of(std::initializer_list<std::uint64_t> ts) {
  EventStream s;
  std::uint32_t i = 0;
  for (auto t : ts) s.events.push_back({t, i, 2 * i, static_cast<std::uint8_t>(i % 2)}), ++i;
  return s;
}

}  // namespace

TEST_CASE("point cloud validation") {
  CHECK_THROWS_AS(PointCloud(std::vector<Point3>{}), Error);
  CHECK_THROWS_AS(PointCloud({{0, NAN, 0}}), Error);
  CHECK_THROWS_AS(PointCloud({{0, 0, 0}}, {1, 2}, 1), Error);
  CHECK(PointCloud({{0, 0, 0}}, {1, 2}, 2).feature_dim() == 2);
}

TEST_CASE("event_to_cloud") {
  const PointCloud c = event_to_cloud(stream_of({10, 15, 20}), 0, 100);
  REQUIRE(c.size() == 3);
  CHECK(c.point(0)[2] == 0.0);
  CHECK(c.point(1)[2] == 0.5);
  CHECK(c.point(2)[2] == 1.0);
  CHECK(c.point(1)[0] == 1.0);
  CHECK(c.point(1)[1] == 2.0);
  CHECK(c.feature_dim() == 1);
  CHECK(c.features()[1] == 1.0);

  CHECK_THROWS_AS(event_to_cloud(stream_of({5, 5}), 0, 100), Error);
  CHECK_THROWS_AS(event_to_cloud(stream_of({10, 15}), 50, 100), Error);
  // Half-open window.
  CHECK(event_to_cloud(stream_of({10, 15, 20}), 10, 20).size() == 2);
}

TEST_CASE("event_to_cloud z stays in [0, 1] and is monotone in t") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> td(0, 1000);
  for (int trial = 0; trial < 100; ++trial) {
    EventStream s;
    for (int i = 0; i < 30; ++i) s.events.push_back({td(rng), 1, 1, 0});
    std::sort(s.events.begin(), s.events.end(), [](auto& a, auto& b) { return a.t < b.t; });
    if (s.events.front().t == s.events.back().t) continue;
    const PointCloud c = event_to_cloud(s, 0, 1001);
    CHECK(c.size() == 30);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c.point(i)[2] >= 0.0);
      CHECK(c.point(i)[2] <= 1.0);
      if (i > 0) CHECK(c.point(i)[2] >= c.point(i - 1)[2]);
    }
  }
}

TEST_CASE("event_windows skips degenerate windows") {
  const auto w = event_windows(stream_of({0, 5, 10, 12, 30}), 10);
  // [0,10): {0,5}; [10,20): {10,12}; [30,40): single timestamp, skipped.
  REQUIRE(w.size() == 2);
  CHECK(w[0].size() == 2);
  CHECK(w[1].size() == 2);
}

TEST_CASE("fps small cases") {
  const PointCloud c({{0, 0, 0}, {1, 0, 0}, {0.1, 0, 0}});
  CHECK(fps(c, 2, 0) == std::vector<std::size_t>{0, 1});
  const auto all = fps(c, 3, 0);
  CHECK(all == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(fps(c, 4, 0), Error);
  // Duplicates never produce repeated indices.
  const PointCloud dup({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  CHECK(fps(dup, 3, 1) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("fps matches brute-force greedy max-min") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 40, m = 1 + rng() % n, start = rng() % n;
    const auto pts = random_points(n, rng);
    const auto got = fps(PointCloud(pts), m, start);
    CHECK(got == oracle::brute_fps(pts, m, start));
    CHECK(std::set<std::size_t>(got.begin(), got.end()).size() == got.size());
  }
}

TEST_CASE("knn_group") {
  const PointCloud c({{0, 0, 0}, {1, 0, 0}, {0, 2, 0}});
  const auto g1 = knn_group(c, {0}, 1);
  CHECK(g1.neighbors == std::vector<std::size_t>{0});
  CHECK(g1.relative == std::vector<double>{0, 0, 0});
  const auto all = knn_group(c, {0, 2}, 3);
  CHECK(all.neighbors == std::vector<std::size_t>{0, 1, 2, 2, 0, 1});
  CHECK_THROWS_AS(knn_group(c, {0}, 4), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = random_points(20, rng);
    const PointCloud cloud(pts);
    const auto centers = fps(cloud, 5, 0);
    const auto g = knn_group(cloud, centers, 3);
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const auto want = oracle::brute_knn(pts, centers[ci], 3);
      double prev = -1.0;
      for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t idx = g.neighbors[ci * 3 + j];
        CHECK(idx == want[j]);
        const double d = squared_distance(pts[idx], pts[centers[ci]]);
        CHECK(d >= prev);
        prev = d;
        for (int a = 0; a < 3; ++a)
          CHECK(g.relative[(ci * 3 + j) * 3 + a] == pts[idx][a] - pts[centers[ci]][a]);
      }
    }
  }
}

TEST_CASE("voxelize") {
  const Point3 res{0.1, 0.1, 0.1}, lo{0, 0, 0}, hi{1, 1, 1};
  const VoxelGrid g0 = voxelize(PointCloud({{0, 0, 0}}), res, lo, hi);
  REQUIRE(g0.occupied.size() == 1);
  CHECK(g0.occupied.begin()->first == VoxelKey{0, 0, 0});

  const VoxelGrid g1 =
      voxelize(PointCloud({{0.51, 0.52, 0.53}, {0.55, 0.56, 0.57}}, {1, 3}, 1), res, lo, hi);
  REQUIRE(g1.occupied.size() == 1);
  CHECK(g1.occupied.begin()->second == std::vector<double>{2.0});
  CHECK(g1.counts.begin()->second == 2);

  const VoxelGrid g2 = voxelize(PointCloud({{0, 0, 0}}), {0.01, 0.01, 0.01}, {-0.2, -0.2, -0.2},
                                {0.2, 0.2, 0.2});
  CHECK(g2.extent == std::array<std::int64_t, 3>{40, 40, 40});

  CHECK_THROWS_AS(voxelize(PointCloud({{5, 5, 5}}), res, lo, hi), Error);
  CHECK_THROWS_AS(voxelize(PointCloud({{0, 0, 0}}), {0, 0.1, 0.1}, lo, hi), Error);
}

TEST_CASE("voxelize keys are unique and in range; every in-range point counts once") {
  std::mt19937_64 rng(4);
  const auto pts = random_points(300, rng);
  const Point3 lo{-0.5, -0.5, -0.5}, hi{0.5, 0.5, 0.5};
  const VoxelGrid g = voxelize(PointCloud(pts), {0.1, 0.1, 0.1}, lo, hi);
  std::size_t inside = 0;
  for (const auto& p : pts)
    if (p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] && p[2] >= lo[2] &&
        p[2] <= hi[2])
      ++inside;
  std::size_t counted = 0;
  for (const auto& [key, n] : g.counts) {
    counted += n;
    for (int a = 0; a < 3; ++a) {
      CHECK(key[a] >= 0);
      CHECK(key[a] < g.extent[a]);
    }
  }
  CHECK(counted == inside);
  CHECK(g.counts.size() == g.occupied.size());
}
