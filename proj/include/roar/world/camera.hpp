#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "roar/numerics/tensor.hpp"
#include "roar/world/point_cloud.hpp"

namespace roar::world {

inline constexpr double kDefaultElevationRange = 30.0;

// Azimuth bin b covers [90b - 45, 90b + 45) degrees.
int azimuth_bin(double azimuth_degrees);
double wrap_degrees(double degrees);  // into [0, 360)

struct Camera {
  double azimuth = 0.0;    // degrees in [0, 360)
  double elevation = 0.0;  // degrees
  int bin = 0;

  static Camera at(double azimuth, double elevation);
};

// `count` cameras, each drawn from a uniformly chosen bin of `bins` with
// azimuth uniform in that bin and elevation uniform in [-range, range].
// Throws std::invalid_argument when bins is empty or holds indices outside 0..3.
std::vector<Camera> sample_views(std::uint64_t seed, std::size_t count, const std::set<int>& bins,
                                 double elevation_range = kDefaultElevationRange);

// Per-view patch features, features is [V x S x D].
struct ViewFeatureSet {
  Tensor features;
  std::vector<Camera> cameras;
  std::optional<std::size_t> primary_index;

  std::size_t views() const { return features.rank() == 3 ? features.dim(0) : 0; }
  std::size_t patches() const { return features.dim(1); }
  std::size_t dim() const { return features.dim(2); }

  // Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
  Tensor view(std::size_t v) const;  // [S x D]
};

ViewFeatureSet make_view_set(const std::vector<Tensor>& per_view, std::vector<Camera> cameras,
                             std::optional<std::size_t> primary);

}  // namespace roar::world
