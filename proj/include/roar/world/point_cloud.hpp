#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace roar::world {

using Point3 = std::array<double, 3>;

enum class ShapeClass { notched_box, l_prism, asymmetric_cross, stepped_pyramid };

inline constexpr std::array<ShapeClass, 4> kAllShapeClasses = {ShapeClass::notched_box, ShapeClass::l_prism,
                                                                 ShapeClass::asymmetric_cross,
                                                                 ShapeClass::stepped_pyramid};

std::string_view to_string(ShapeClass c);
// Throws std::invalid_argument for unknown names.
ShapeClass parse_shape_class(std::string_view name);

struct ShapeId {
  std::uint64_t seed = 0;
  ShapeClass shape_class = ShapeClass::notched_box;

  std::string str() const;
  bool operator==(const ShapeId&) const = default;
};

// Points in the canonical box [-1, 1]^3; z is the vertical axis.
struct PointCloud {
  std::vector<Point3> points;
  ShapeId id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Rigid rotation about the vertical axis; positive angles turn +x towards +y.
// Multiples of 90 degrees use exact quarter-turn arithmetic.
PointCloud rotate_azimuth(const PointCloud& pc, double degrees);

}  // namespace roar::world
