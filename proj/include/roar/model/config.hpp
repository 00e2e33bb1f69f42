#pragma once

#include <cstddef>
#include <string>

namespace roar::model {

// Reference scale of the full system, recorded for documentation only:
// 2048 hidden dims, 4096 latent tokens, 21 blocks, 256 patches of 1024 dims.
struct ModelConfig {
  std::size_t blocks = 4;        // L
  std::size_t grid = 4;          // latent grid side, N = grid^3
  std::size_t channels = 4;      // occupancy + 3 centroid offsets
  std::size_t dim = 64;          // D
  std::size_t heads = 4;         // H
  std::size_t head_dim = 16;     // d
  std::size_t patches = 16;      // S
  std::size_t feature_dim = 32;  // D_feat
  std::size_t mlp_hidden = 128;
  std::size_t time_freqs = 32;   // sinusoidal timestep features (even)
  // A cell is fully occupied once it holds this many of the cloud's points.
  double occupancy_saturation = 8.0;

  std::size_t tokens() const { return grid * grid * grid; }
  std::size_t width() const { return heads * head_dim; }

  // Throws std::invalid_argument when a field is zero or inconsistent.
  void validate() const;

  static ModelConfig desk() { return {}; }
  // L=2, N=8, H=2, d=4; used by gradient checks.
  static ModelConfig micro();
};

enum class Conditioning {
  single_view,  // one cross-attention stream over the primary view
  concat,       // one stream over the concatenation of every view's patches
  routed,       // router + one stream over the selected view
  routed_dual,  // router + primary/auxiliary streams
};

std::string to_string(Conditioning c);
Conditioning parse_conditioning(const std::string& name);

}  // namespace roar::model
