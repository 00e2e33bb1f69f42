#include "roar/world/shapes.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <vector>

#include "roar/numerics/rng.hpp"

namespace roar::world {

namespace {

struct Box {
  Point3 lo, hi;

  bool strictly_contains(const Point3& p, double eps = 1e-9) const {
    for (int a = 0; a < 3; ++a)
      if (p[a] <= lo[a] + eps || p[a] >= hi[a] - eps) return false;
    return true;
  }
};

Box box(double x0, double x1, double y0, double y1, double z0, double z1) { return {{x0, y0, z0}, {x1, y1, z1}}; }

// Solid = union(adds) minus union(subtracts). Boxes in `adds` overlap with
// positive volume (never just touch) so coplanar internal faces do not arise.
struct Solid {
  std::vector<Box> adds;
  std::vector<Box> subtracts;
};

struct Face {
  const Box* owner;
  bool from_subtract;
  int axis;
  double coord;
  double area;
};

std::vector<Face> faces_of(const Solid& s) {
  std::vector<Face> faces;
  auto push = [&](const Box& b, bool sub) {
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const double area = (b.hi[u] - b.lo[u]) * (b.hi[v] - b.lo[v]);
      faces.push_back({&b, sub, axis, b.lo[axis], area});
      faces.push_back({&b, sub, axis, b.hi[axis], area});
    }
  };
  for (const Box& b : s.adds) push(b, false);
  for (const Box& b : s.subtracts) push(b, true);
  return faces;
}

bool on_boundary(const Solid& s, const Face& f, const Point3& p) {
  auto inside_any = [&](const std::vector<Box>& boxes, const Box* skip) {
    return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return &b != skip && b.strictly_contains(p); });
  };
  if (!f.from_subtract) return !inside_any(s.adds, f.owner) && !inside_any(s.subtracts, nullptr);
  return inside_any(s.adds, nullptr) && !inside_any(s.subtracts, f.owner);
}

Solid build(ShapeClass c, RandomSequence& rng) {
  Solid s;
  switch (c) {
    case ShapeClass::notched_box: {
      const double ax = rng.uniform(0.7, 1.0), ay = rng.uniform(0.45, 0.75), az = rng.uniform(0.35, 0.65);
      s.adds.push_back(box(-ax, ax, -ay, ay, -az, az));
      // Corner notch at +x +y +z, plus a smaller slot on the -x face.
      const double nx = ax * rng.uniform(0.8, 1.1), ny = ay * rng.uniform(0.7, 1.0), nz = az * rng.uniform(0.6, 1.0);
      s.subtracts.push_back(box(ax - nx, ax + 0.1, ay - ny, ay + 0.1, az - nz, az + 0.1));
      const double sy = rng.uniform(-0.3, 0.0) * ay;
      s.subtracts.push_back(box(-ax - 0.1, -ax + 0.35 * ax, sy - 0.25 * ay, sy + 0.25 * ay, -az - 0.1, az + 0.1));
      break;
    }
    case ShapeClass::l_prism: {
      const double a = rng.uniform(0.7, 1.0), b = rng.uniform(0.6, 1.0), h = rng.uniform(0.3, 0.7);
      const double t1 = rng.uniform(0.35, 0.6) * b, t2 = rng.uniform(0.35, 0.6) * a;
      s.adds.push_back(box(-a, a, -b, -b + t1, -h, h));
      s.adds.push_back(box(-a, -a + t2, -b + 0.5 * t1, b, -h, h));
      break;
    }
    case ShapeClass::asymmetric_cross: {
      const double w = rng.uniform(0.15, 0.3), h = rng.uniform(0.25, 0.5);
      const double west = rng.uniform(0.35, 0.6), east = rng.uniform(0.8, 1.0);
      const double south = rng.uniform(0.3, 0.55), north = rng.uniform(0.65, 0.95);
      s.adds.push_back(box(-west, east, -w, w, -h, h));
      s.adds.push_back(box(-w * 0.8, w * 0.8, -south, north, -h, h));
      // Taller tip on the long arm.
      s.adds.push_back(box(east - 0.35, east, -w * 0.9, w * 0.9, -h + 0.05, h + rng.uniform(0.3, 0.5)));
      break;
    }
    case ShapeClass::stepped_pyramid: {
      const double bx = rng.uniform(0.8, 1.0), by = rng.uniform(0.6, 0.9), step = rng.uniform(0.25, 0.35);
      const double shrink = rng.uniform(0.55, 0.7);
      s.adds.push_back(box(-bx, bx, -by, by, -0.9, -0.9 + step + 0.05));
      const double mx = bx * shrink, my = by * shrink, ox = bx - mx, oy = rng.uniform(0.0, 0.5) * (by - my);
      s.adds.push_back(box(ox - mx, ox + mx, oy - my, oy + my, -0.9 + step, -0.9 + 2 * step + 0.05));
      const double tx = mx * shrink, ty = my * shrink, px = ox + mx - tx, py = oy + my - ty;
      s.adds.push_back(box(px - tx, px + tx, py - ty, py + ty, -0.9 + 2 * step, -0.9 + 3 * step));
      break;
    }
  }
  return s;
}

}  // namespace

PointCloud generate_shape(std::uint64_t seed, ShapeClass shape_class, std::size_t count) {
  if (count < kMinPointCount) throw std::invalid_argument("generate_shape: need at least 16 points");
  RandomSequence rng(RandomStream(seed, "shape").derive(static_cast<std::uint64_t>(shape_class)));
  const Solid solid = build(shape_class, rng);
  const std::vector<Face> faces = faces_of(solid);
  std::vector<double> cumulative;
  double total = 0.0;
  for (const Face& f : faces) cumulative.push_back(total += f.area);

  PointCloud pc;
  pc.id = {seed, shape_class};
  pc.points.reserve(count);
  const std::size_t max_tries = 200 * count;
  for (std::size_t tries = 0; pc.size() < count; ++tries) {
    if (tries > max_tries) throw std::runtime_error("generate_shape: surface sampling did not converge");
    const double pick = rng.uniform() * total;
    const auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                              cumulative.begin());
    const Face& f = faces[std::min(idx, faces.size() - 1)];
    Point3 p;
    const int u = (f.axis + 1) % 3, v = (f.axis + 2) % 3;
    p[f.axis] = f.coord;
    p[u] = rng.uniform(f.owner->lo[u], f.owner->hi[u]);
    p[v] = rng.uniform(f.owner->lo[v], f.owner->hi[v]);
    if (on_boundary(solid, f, p)) pc.points.push_back(p);
  }

  Point3 lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const Point3& p : pc.points)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  double half = 0.0;
  Point3 centre;
  for (int a = 0; a < 3; ++a) {
    centre[a] = 0.5 * (lo[a] + hi[a]);
    half = std::max(half, 0.5 * (hi[a] - lo[a]));
  }
  const double s = kShapeExtent / half;
  for (Point3& p : pc.points)
    for (int a = 0; a < 3; ++a) p[a] = (p[a] - centre[a]) * s;
  return pc;
}

}  // namespace roar::world
