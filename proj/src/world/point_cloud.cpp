#include "roar/world/point_cloud.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace roar::world {

std::string_view to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::notched_box: return "notched-box";
    case ShapeClass::l_prism: return "L-prism";
    case ShapeClass::asymmetric_cross: return "asymmetric-cross";
    case ShapeClass::stepped_pyramid: return "stepped-pyramid";
  }
  return "?";
}

ShapeClass parse_shape_class(std::string_view name) {
  for (ShapeClass c : kAllShapeClasses)
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown shape class '" + std::string(name) + "'");
}

std::string ShapeId::str() const { return std::string(to_string(shape_class)) + "-" + std::to_string(seed); }

PointCloud rotate_azimuth(const PointCloud& pc, double degrees) {
  PointCloud out;
  out.id = pc.id;
  out.points.reserve(pc.size());
  const double turns = degrees / 90.0;
  if (turns == std::floor(turns)) {
    const long q = ((static_cast<long>(turns) % 4) + 4) % 4;
    for (const Point3& p : pc.points) {
      switch (q) {
        case 0: out.points.push_back(p); break;
        case 1: out.points.push_back({-p[1], p[0], p[2]}); break;
        case 2: out.points.push_back({-p[0], -p[1], p[2]}); break;
        default: out.points.push_back({p[1], -p[0], p[2]}); break;
      }
    }
    return out;
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  for (const Point3& p : pc.points) out.points.push_back({c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]});
  return out;
}

}  // namespace roar::world
