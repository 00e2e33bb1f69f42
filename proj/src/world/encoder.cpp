#include "roar/world/encoder.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "roar/numerics/rng.hpp"

namespace roar::world {

ViewBasis view_basis(const Camera& cam) {
  const double a = cam.azimuth * std::numbers::pi / 180.0;
  const double e = cam.elevation * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a), ce = std::cos(e), se = std::sin(e);
  return {{-sa, ca, 0.0}, {-se * ca, -se * sa, ce}, {ce * ca, ce * sa, se}};
}

std::vector<PatchStats> patch_statistics(const PointCloud& pc, const Camera& cam, const EncoderConfig& cfg) {
  const std::size_t res = cfg.grid * cfg.pixels_per_patch;
  const double pixel = 2.0 * cfg.half_extent / static_cast<double>(res);
  const ViewBasis basis = view_basis(cam);
  auto dot = [](const Point3& p, const Point3& q) { return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]; };

  // Depth buffer: larger depth = closer to the camera.
  std::vector<double> zbuf(res * res, -std::numeric_limits<double>::infinity());
  for (const Point3& p : pc.points) {
    const double u = dot(p, basis.right), v = dot(p, basis.up);
    const auto px = static_cast<long>(std::floor((u + cfg.half_extent) / pixel));
    const auto py = static_cast<long>(std::floor((v + cfg.half_extent) / pixel));
    if (px < 0 || py < 0 || px >= static_cast<long>(res) || py >= static_cast<long>(res)) continue;
    double& z = zbuf[static_cast<std::size_t>(py) * res + static_cast<std::size_t>(px)];
    z = std::max(z, dot(p, basis.toward));
  }

  const std::size_t k = cfg.pixels_per_patch;
  const double half_patch = 0.5 * static_cast<double>(k);
  std::vector<PatchStats> stats(cfg.patches());
  for (std::size_t gy = 0; gy < cfg.grid; ++gy) {
    for (std::size_t gx = 0; gx < cfg.grid; ++gx) {
      double n = 0, sum = 0, sum2 = 0, cu = 0, cv = 0;
      for (std::size_t iy = 0; iy < k; ++iy)
        for (std::size_t ix = 0; ix < k; ++ix) {
          const double z = zbuf[(gy * k + iy) * res + gx * k + ix];
          if (!std::isfinite(z)) continue;
          n += 1;
          sum += z;
          sum2 += z * z;
          cu += (static_cast<double>(ix) + 0.5 - half_patch) / half_patch;
          cv += (static_cast<double>(iy) + 0.5 - half_patch) / half_patch;
        }
      PatchStats& s = stats[gy * cfg.grid + gx];
      s.fill(0.0);
      if (n == 0) continue;
      const double mean = sum / n;
      s[0] = n / static_cast<double>(k * k);
      s[1] = mean;
      s[2] = std::max(0.0, sum2 / n - mean * mean);
      s[3] = cu / n;
      s[4] = cv / n;
    }
  }
  return stats;
}

Tensor lift_matrix(const EncoderConfig& cfg) {
  RandomStream stream(cfg.lift_seed, "encoder-lift");
  Tensor m({cfg.dim, kPatchStats});
  const double sc = 1.0 / std::sqrt(static_cast<double>(kPatchStats));
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = stream.normal(i) * sc;
  return m;
}

Tensor encode_view(const PointCloud& pc, const Camera& cam, const EncoderConfig& cfg) {
  const std::vector<PatchStats> stats = patch_statistics(pc, cam, cfg);
  const Tensor lift = lift_matrix(cfg);
  Tensor out({cfg.patches(), cfg.dim});
  for (std::size_t s = 0; s < stats.size(); ++s)
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kPatchStats; ++k) acc += lift(j, k) * stats[s][k];
      out(s, j) = acc;
    }
  return out;
}

}  // namespace roar::world
