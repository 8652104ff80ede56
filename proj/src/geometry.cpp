#include "svl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "svl/error.hpp"

namespace svl {

PointCloud::PointCloud(std::vector<Point3> points, std::vector<double> features,
                       std::size_t feature_dim)
    : points_(std::move(points)), features_(std::move(features)), feature_dim_(feature_dim) {
  if (points_.empty()) throw Error(err::kDegenerate, "point cloud has no points");
  for (const Point3& p : points_)
    for (double c : p)
      if (std::isnan(c)) throw Error(err::kDegenerate, "point cloud contains NaN coordinates");
  if (features_.size() != points_.size() * feature_dim_)
    throw Error(err::kShape, "point cloud features must be N x " + std::to_string(feature_dim_));
}

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

PointCloud event_to_cloud(const EventStream& stream, std::uint64_t t_start, std::uint64_t t_end) {
  auto first = std::lower_bound(stream.events.begin(), stream.events.end(), t_start,
                                [](const Event& e, std::uint64_t t) { return e.t < t; });
  auto last = std::lower_bound(first, stream.events.end(), t_end,
                               [](const Event& e, std::uint64_t t) { return e.t < t; });
  if (first == last) throw Error(err::kDegenerate, "event window is empty");
  const std::uint64_t t_min = first->t;
  const std::uint64_t t_max = std::prev(last)->t;
  if (t_max == t_min)
    throw Error(err::kDegenerate, "event window has a single timestamp; z is undefined");
  const double span = static_cast<double>(t_max - t_min);
  std::vector<Point3> pts;
  std::vector<double> pol;
  pts.reserve(static_cast<std::size_t>(last - first));
  for (auto it = first; it != last; ++it) {
    pts.push_back({static_cast<double>(it->x), static_cast<double>(it->y),
                   static_cast<double>(it->t - t_min) / span});
    pol.push_back(static_cast<double>(it->p));
  }
  return PointCloud(std::move(pts), std::move(pol), 1);
}

std::vector<PointCloud> event_windows(const EventStream& stream, std::uint64_t window_us) {
  if (window_us == 0) throw Error(err::kConfig, "event window length must be positive");
  std::vector<PointCloud> clouds;
  if (stream.events.empty()) return clouds;
  const std::uint64_t begin = stream.events.front().t;
  const std::uint64_t end = stream.events.back().t;
  for (std::uint64_t start = begin; start <= end; start += window_us) {
    try {
      clouds.push_back(event_to_cloud(stream, start, start + window_us));
    } catch (const Error& e) {
      if (e.kind() != err::kDegenerate) throw;
    }
    if (end - start < window_us) break;
  }
  return clouds;
}

std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m, std::size_t start_index) {
  const std::size_t n = cloud.size();
  if (m < 1 || m > n)
    throw Error(err::kRange, "fps needs 1 <= m <= N, got m=" + std::to_string(m) +
                                 " N=" + std::to_string(n));
  if (start_index >= n) throw Error(err::kRange, "fps start index out of range");
  std::vector<std::size_t> picked{start_index};
  picked.reserve(m);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[start_index] = true;
  std::size_t last = start_index;
  while (picked.size() < m) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(cloud.point(i), cloud.point(last)));
      if (!taken[i] && dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    picked.push_back(best);
    taken[best] = true;
    last = best;
  }
  return picked;
}

PointGroups knn_group(const PointCloud& cloud, const std::vector<std::size_t>& centers,
                      std::size_t k) {
  const std::size_t n = cloud.size();
  if (k < 1 || k > n)
    throw Error(err::kRange, "knn needs 1 <= k <= N, got k=" + std::to_string(k) +
                                 " N=" + std::to_string(n));
  PointGroups g;
  g.n_centers = centers.size();
  g.k = k;
  g.centers = centers;
  g.neighbors.reserve(centers.size() * k);
  g.relative.reserve(centers.size() * k * 3);
  std::vector<std::size_t> order(n);
  std::vector<double> d(n);
  for (std::size_t c : centers) {
    if (c >= n) throw Error(err::kRange, "knn center index out of range");
    const Point3& cp = cloud.point(c);
    for (std::size_t i = 0; i < n; ++i) d[i] = squared_distance(cloud.point(i), cp);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = order[j];
      g.neighbors.push_back(idx);
      for (int ax = 0; ax < 3; ++ax) g.relative.push_back(cloud.point(idx)[ax] - cp[ax]);
    }
  }
  return g;
}

std::int64_t voxel_extent(double lo, double hi, double resolution) {
  // Guard against spans like 0.4 / 0.01 = 40.000000000000007.
  const double cells = (hi - lo) / resolution;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) < 1e-9 * std::max(1.0, rounded))
    return static_cast<std::int64_t>(rounded);
  return static_cast<std::int64_t>(std::ceil(cells));
}

VoxelGrid voxelize(const PointCloud& cloud, const Point3& resolution, const Point3& range_min,
                   const Point3& range_max) {
  for (int ax = 0; ax < 3; ++ax) {
    if (!(resolution[ax] > 0.0)) throw Error(err::kConfig, "voxel resolution must be positive");
    if (!(range_min[ax] < range_max[ax]))
      throw Error(err::kConfig, "voxel range_min must be below range_max");
  }
  VoxelGrid grid;
  grid.resolution = resolution;
  grid.range_min = range_min;
  grid.range_max = range_max;
  for (int ax = 0; ax < 3; ++ax)
    grid.extent[ax] = voxel_extent(range_min[ax], range_max[ax], resolution[ax]);
  const bool own_features = cloud.feature_dim() > 0;
  grid.feature_dim = own_features ? cloud.feature_dim() : 3;

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.point(i);
    bool inside = true;
    VoxelKey key{};
    for (int ax = 0; ax < 3; ++ax) {
      if (p[ax] < range_min[ax] || p[ax] > range_max[ax]) {
        inside = false;
        break;
      }
      auto cell = static_cast<std::int64_t>(std::floor((p[ax] - range_min[ax]) / resolution[ax]));
      key[ax] = std::clamp<std::int64_t>(cell, 0, grid.extent[ax] - 1);
    }
    if (!inside) continue;
    auto& acc = grid.occupied[key];
    if (acc.empty()) acc.assign(grid.feature_dim, 0.0);
    for (std::size_t f = 0; f < grid.feature_dim; ++f)
      acc[f] += own_features ? cloud.features()[i * grid.feature_dim + f] : p[f];
    ++grid.counts[key];
  }
  if (grid.occupied.empty()) throw Error(err::kDegenerate, "no points left after range clipping");
  for (auto& [key, acc] : grid.occupied) {
    const auto n = static_cast<double>(grid.counts[key]);
    for (double& v : acc) v /= n;
  }
  return grid;
}

}  // namespace svl
