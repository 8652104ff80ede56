#pragma once

// Point-cloud preparation: event streams to clouds, farthest point sampling,
// k-nearest-neighbour grouping and voxelization.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace svl {

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint8_t p = 0;  // polarity, 0 or 1
};

// Events sorted by non-decreasing timestamp.
struct EventStream {
  std::vector<Event> events;
};

using Point3 = std::array<double, 3>;

class PointCloud {
 public:
  PointCloud() = default;
  // Throws degenerate_input for an empty cloud or NaN coordinates, and
  // shape_mismatch when features.size() != points.size() * feature_dim.
  explicit PointCloud(std::vector<Point3> points, std::vector<double> features = {},
                      std::size_t feature_dim = 0);

  std::size_t size() const { return points_.size(); }
  const std::vector<Point3>& points() const { return points_; }
  const Point3& point(std::size_t i) const { return points_[i]; }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<double>& features() const { return features_; }

 private:
  std::vector<Point3> points_;
  std::vector<double> features_;
  std::size_t feature_dim_ = 0;
};

double squared_distance(const Point3& a, const Point3& b);

// Half-open [t_start, t_end) window. Output z is the timestamp rescaled to
// [0, 1] by the window's own min and max; polarity is the single feature.
PointCloud event_to_cloud(const EventStream& stream, std::uint64_t t_start, std::uint64_t t_end);

// Consecutive non-overlapping windows of `window_us` covering the stream.
// Windows with fewer than two distinct timestamps are skipped.
std::vector<PointCloud> event_windows(const EventStream& stream, std::uint64_t window_us);

// Greedy max-min sampling from start_index. Ties go to the lowest index.
std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m, std::size_t start_index = 0);

struct PointGroups {
  std::size_t n_centers = 0;
  std::size_t k = 0;
  std::vector<std::size_t> centers;    // n_centers
  std::vector<std::size_t> neighbors;  // n_centers * k, nearest first
  std::vector<double> relative;        // n_centers * k * 3, neighbour - center
};

// k nearest points to each center, the center itself included. Ties go to the
// lowest index.
PointGroups knn_group(const PointCloud& cloud, const std::vector<std::size_t>& centers,
                      std::size_t k);

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelGrid {
  Point3 resolution{};
  Point3 range_min{};
  Point3 range_max{};
  std::array<std::int64_t, 3> extent{};  // voxels per axis
  std::size_t feature_dim = 0;
  // Mean feature of the points in each voxel. Clouds without features use
  // their coordinates as the feature.
  std::map<VoxelKey, std::vector<double>> occupied;
  std::map<VoxelKey, std::size_t> counts;
};

// Number of voxels along one axis for the given span and edge length.
std::int64_t voxel_extent(double lo, double hi, double resolution);

VoxelGrid voxelize(const PointCloud& cloud, const Point3& resolution, const Point3& range_min,
                   const Point3& range_max);

}  // namespace svl
