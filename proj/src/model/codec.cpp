#include "roar/model/codec.hpp"

#include <algorithm>
#include <cmath>

namespace roar::model {

namespace {
double cell_size(std::size_t n) { return 2.0 / static_cast<double>(n); }

double axis_center(std::size_t i, std::size_t n) { return -1.0 + (static_cast<double>(i) + 0.5) * cell_size(n); }

std::size_t axis_cell(double x, std::size_t n) {
  const double f = std::floor((x + 1.0) / cell_size(n));
  if (f < 0.0) return 0;
  return std::min(static_cast<std::size_t>(f), n - 1);
}
}  // namespace

std::size_t cell_index(std::size_t ix, std::size_t iy, std::size_t iz, std::size_t n) { return (iz * n + iy) * n + ix; }

world::Point3 cell_center(std::size_t index, std::size_t n) {
  return {axis_center(index % n, n), axis_center((index / n) % n, n), axis_center(index / (n * n), n)};
}

std::size_t cell_of(const world::Point3& p, std::size_t n) {
  return cell_index(axis_cell(p[0], n), axis_cell(p[1], n), axis_cell(p[2], n), n);
}

LatentTokens latent_encode(const world::PointCloud& pc, const ModelConfig& cfg) {
  const std::size_t n = cfg.grid, N = cfg.tokens();
  std::vector<double> count(N, 0.0);
  std::vector<world::Point3> sum(N, {0.0, 0.0, 0.0});
  for (const world::Point3& p : pc.points) {
    const std::size_t c = cell_of(p, n);
    count[c] += 1.0;
    for (int a = 0; a < 3; ++a) sum[c][a] += p[a];
  }
  LatentTokens z;
  z.tokens = Tensor({N, cfg.channels});
  const double half = 0.5 * cell_size(n);
  for (std::size_t c = 0; c < N; ++c) {
    if (count[c] == 0.0) continue;
    z.tokens(c, 0) = std::min(1.0, count[c] / cfg.occupancy_saturation);
    const world::Point3 centre = cell_center(c, n);
    for (int a = 0; a < 3; ++a) z.tokens(c, 1 + a) = (sum[c][a] / count[c] - centre[a]) / half;
  }
  return z;
}

world::PointCloud latent_decode(const LatentTokens& z, const ModelConfig& cfg) {
  const std::size_t n = cfg.grid;
  const double half = 0.5 * cell_size(n);
  world::PointCloud out;
  for (std::size_t c = 0; c < z.tokens.rows(); ++c) {
    if (!(z.tokens(c, 0) >= 0.5)) continue;
    const world::Point3 centre = cell_center(c, n);
    world::Point3 p;
    for (int a = 0; a < 3; ++a) p[a] = centre[a] + half * std::clamp(z.tokens(c, 1 + a), -1.0, 1.0);
    out.points.push_back(p);
  }
  return out;
}

std::size_t rotated_cell(std::size_t index, std::size_t n, int quarter_turns) {
  std::size_t ix = index % n, iy = (index / n) % n;
  const std::size_t iz = index / (n * n);
  const int q = ((quarter_turns % 4) + 4) % 4;
  for (int k = 0; k < q; ++k) {
    // (x, y) -> (-y, x)
    const std::size_t nx = n - 1 - iy, ny = ix;
    ix = nx;
    iy = ny;
  }
  return cell_index(ix, iy, iz, n);
}

LatentTokens rotate_latent(const LatentTokens& z, std::size_t n, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  LatentTokens out;
  out.tokens = Tensor(z.tokens.shape());
  out.azimuth_tag = std::fmod(z.azimuth_tag + 90.0 * q, 360.0);
  for (std::size_t c = 0; c < z.tokens.rows(); ++c) {
    const std::size_t to = rotated_cell(c, n, q);
    double ox = z.tokens(c, 1), oy = z.tokens(c, 2);
    for (int k = 0; k < q; ++k) {
      const double nx = -oy, ny = ox;
      ox = nx;
      oy = ny;
    }
    out.tokens(to, 0) = z.tokens(c, 0);
    out.tokens(to, 1) = ox;
    out.tokens(to, 2) = oy;
    out.tokens(to, 3) = z.tokens(c, 3);
  }
  return out;
}

}  // namespace roar::model
