#pragma once

#include <cstddef>
#include <cstdint>

#include "roar/world/point_cloud.hpp"

namespace roar::world {

inline constexpr std::size_t kDefaultPointCount = 2048;
inline constexpr std::size_t kMinPointCount = 16;
// Largest absolute coordinate after normalisation.
inline constexpr double kShapeExtent = 0.9;

// Surface samples of a procedurally generated solid. Every class is built to
// have no azimuthal symmetry of order 2 or 4. Deterministic in (seed, class).
PointCloud generate_shape(std::uint64_t seed, ShapeClass shape_class, std::size_t points = kDefaultPointCount);

}  // namespace roar::world
