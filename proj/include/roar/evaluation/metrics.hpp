#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "roar/world/point_cloud.hpp"

namespace roar::evaluation {

using world::Point3;
using world::PointCloud;

// Exact nearest-neighbour queries over a fixed point set using a uniform
// bucket grid searched in growing Chebyshev rings.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Point3> points, std::size_t target_per_cell = 4);

  // Euclidean distance to the closest indexed point.
  double nearest_distance(const Point3& q) const;

 private:
  std::span<const Point3> points_;
  Point3 origin_{};
  double cell_ = 1.0;
  std::size_t dims_[3] = {1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

double point_distance(const Point3& a, const Point3& b);

// Non-squared symmetric Chamfer distance:
//   mean_a min_b |a-b| + mean_b min_a |a-b|.
// Throws std::invalid_argument on an empty cloud.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

// Nearest-neighbour distances from every point of `from` to `to`.
std::vector<double> nearest_distances(std::span<const Point3> from, std::span<const Point3> to);

// F-score in percent: precision = share of `a` within `threshold` of `b`
// (distance <= threshold counts), recall likewise from `b` to `a`.
double f_score(const PointCloud& a, const PointCloud& b, double threshold);

struct GeoMetrics {
  double cd = 0.0;          // raw Chamfer distance
  double f1_at_0_1 = 0.0;   // percent
  double f1_at_0_05 = 0.0;  // percent

  double cd_x1000() const { return cd * 1e3; }
};

GeoMetrics geometry_metrics(const PointCloud& prediction, const PointCloud& reference);

}  // namespace roar::evaluation
