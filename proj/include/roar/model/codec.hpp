#pragma once

#include <cstddef>

#include "roar/model/config.hpp"
#include "roar/numerics/tensor.hpp"
#include "roar/world/point_cloud.hpp"

// Analytic occupancy codec over an n x n x n grid on [-1,1]^3. Token i holds
// (occupancy, centroid offset x/y/z); offsets are relative to the cell centre
// in units of half a cell.
namespace roar::model {

struct LatentTokens {
  Tensor tokens;             // [N x C]
  double azimuth_tag = 0.0;  // degrees; orientation metadata, never a model input
};

std::size_t cell_index(std::size_t ix, std::size_t iy, std::size_t iz, std::size_t n);
world::Point3 cell_center(std::size_t index, std::size_t n);
std::size_t cell_of(const world::Point3& p, std::size_t n);

LatentTokens latent_encode(const world::PointCloud& pc, const ModelConfig& cfg);

// Emits one point per cell with occupancy >= 0.5. An empty result is valid.
world::PointCloud latent_decode(const LatentTokens& z, const ModelConfig& cfg);

// Cell index that cell `index` moves to under `quarter_turns` x 90 degrees of azimuth.
std::size_t rotated_cell(std::size_t index, std::size_t n, int quarter_turns);

// Exact latent rotation: permutes cells and rotates the offsets.
LatentTokens rotate_latent(const LatentTokens& z, std::size_t n, int quarter_turns);

}  // namespace roar::model
