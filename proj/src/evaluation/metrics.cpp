#include "roar/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace roar::evaluation {

double point_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

NearestNeighborIndex::NearestNeighborIndex(std::span<const Point3> points, std::size_t target_per_cell)
    : points_(points) {
  if (points.empty()) throw std::invalid_argument("nearest-neighbour index over an empty cloud");
  Point3 hi;
  origin_ = points[0];
  hi = points[0];
  for (const Point3& p : points)
    for (int a = 0; a < 3; ++a) {
      origin_[a] = std::min(origin_[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  double volume = 1.0;
  double longest = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double ext = std::max(hi[a] - origin_[a], 1e-9);
    volume *= ext;
    longest = std::max(longest, ext);
  }
  const double cells = std::max(1.0, static_cast<double>(points.size()) / static_cast<double>(target_per_cell));
  cell_ = std::max(std::cbrt(volume / cells), longest / 64.0);
  std::size_t total = 1;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = static_cast<std::size_t>(std::floor((hi[a] - origin_[a]) / cell_)) + 1;
    total *= dims_[a];
  }
  auto cell_of = [&](const Point3& p) {
    std::size_t c[3];
    for (int a = 0; a < 3; ++a)
      c[a] = std::min(dims_[a] - 1, static_cast<std::size_t>(std::max(0.0, std::floor((p[a] - origin_[a]) / cell_))));
    return (c[2] * dims_[1] + c[1]) * dims_[0] + c[0];
  };
  cell_start_.assign(total + 1, 0);
  for (const Point3& p : points) ++cell_start_[cell_of(p) + 1];
  for (std::size_t i = 0; i < total; ++i) cell_start_[i + 1] += cell_start_[i];
  order_.resize(points.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) order_[fill[cell_of(points[i])]++] = i;
}

double NearestNeighborIndex::nearest_distance(const Point3& q) const {
  long qc[3];
  for (int a = 0; a < 3; ++a) {
    const long c = static_cast<long>(std::floor((q[a] - origin_[a]) / cell_));
    qc[a] = std::clamp(c, 0L, static_cast<long>(dims_[a]) - 1);
  }
  double outside = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double lo = origin_[a], hi = origin_[a] + cell_ * static_cast<double>(dims_[a]);
    const double d = q[a] < lo ? lo - q[a] : (q[a] > hi ? q[a] - hi : 0.0);
    outside += d * d;
  }
  outside = std::sqrt(outside);
  const long max_ring = static_cast<long>(std::max({dims_[0], dims_[1], dims_[2]}));
  double best = std::numeric_limits<double>::infinity();
  for (long r = 0; r <= max_ring; ++r) {
    for (long z = qc[2] - r; z <= qc[2] + r; ++z) {
      if (z < 0 || z >= static_cast<long>(dims_[2])) continue;
      for (long y = qc[1] - r; y <= qc[1] + r; ++y) {
        if (y < 0 || y >= static_cast<long>(dims_[1])) continue;
        const bool yz_shell = std::abs(z - qc[2]) == r || std::abs(y - qc[1]) == r;
        const long step = yz_shell ? 1 : std::max(1L, 2 * r);
        for (long x = qc[0] - r; x <= qc[0] + r; x += step) {
          if (x < 0 || x >= static_cast<long>(dims_[0])) continue;
          const std::size_t cell = (static_cast<std::size_t>(z) * dims_[1] + static_cast<std::size_t>(y)) * dims_[0] +
                                   static_cast<std::size_t>(x);
          for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k)
            best = std::min(best, point_distance(q, points_[order_[k]]));
        }
      }
    }
    // Points in ring r+1 or beyond are at least r * cell_ from the query, and
    // never closer than the grid's bounding box.
    if (best <= std::max(static_cast<double>(r) * cell_, outside)) break;
  }
  return best;
}

std::vector<double> nearest_distances(std::span<const Point3> from, std::span<const Point3> to) {
  const NearestNeighborIndex index(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = index.nearest_distance(from[i]);
  return d;
}

namespace {
void require_nonempty(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("metric on an empty point cloud");
}
}  // namespace

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b);
  double ab = 0.0, ba = 0.0;
  for (double d : nearest_distances(a.points, b.points)) ab += d;
  for (double d : nearest_distances(b.points, a.points)) ba += d;
  return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

double f_score(const PointCloud& a, const PointCloud& b, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("f_score: threshold must be positive");
  require_nonempty(a, b);
  auto hit_rate = [threshold](const std::vector<double>& d) {
    const auto hits = std::count_if(d.begin(), d.end(), [threshold](double x) { return x <= threshold; });
    return static_cast<double>(hits) / static_cast<double>(d.size());
  };
  const double precision = hit_rate(nearest_distances(a.points, b.points));
  const double recall = hit_rate(nearest_distances(b.points, a.points));
  if (precision + recall == 0.0) return 0.0;
  return 200.0 * (precision * recall) / (precision + recall);
}

GeoMetrics geometry_metrics(const PointCloud& prediction, const PointCloud& reference) {
  GeoMetrics m;
  m.cd = chamfer_distance(prediction, reference);
  m.f1_at_0_1 = f_score(prediction, reference, 0.1);
  m.f1_at_0_05 = f_score(prediction, reference, 0.05);
  return m;
}

}  // namespace roar::evaluation
