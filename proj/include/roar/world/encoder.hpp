#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "roar/numerics/tensor.hpp"
#include "roar/world/camera.hpp"

namespace roar::world {

inline constexpr std::size_t kPatchStats = 5;

// Deterministic stand-in for a frozen image encoder. The cloud is rendered
// orthographically into a depth image (nearest point per pixel); each patch
// of the image is summarised by kPatchStats numbers and lifted to `dim`
// features by a fixed random linear map.
struct EncoderConfig {
  std::size_t grid = 4;             // patches per image side, S = grid^2
  std::size_t pixels_per_patch = 4; // raster resolution inside one patch
  std::size_t dim = 32;             // feature width
  double half_extent = 1.5;         // image plane covers [-h, h]^2
  std::uint64_t lift_seed = 0x5EED'F00D;

  std::size_t patches() const { return grid * grid; }
};

// Raw statistics of one patch: coverage fraction, mean depth, depth variance,
// centroid offset (u, v) in units of the patch half-size.
using PatchStats = std::array<double, kPatchStats>;

std::vector<PatchStats> patch_statistics(const PointCloud& pc, const Camera& cam, const EncoderConfig& cfg);
Tensor lift_matrix(const EncoderConfig& cfg);  // [dim x kPatchStats]
Tensor encode_view(const PointCloud& pc, const Camera& cam, const EncoderConfig& cfg);  // [S x dim]

// Image-plane basis of a camera: right, up, and the unit vector towards the camera.
struct ViewBasis {
  Point3 right, up, toward;
};
ViewBasis view_basis(const Camera& cam);

}  // namespace roar::world
