#include "roar/model/config.hpp"

#include <stdexcept>

namespace roar::model {

void ModelConfig::validate() const {
  if (blocks == 0 || grid == 0 || channels == 0 || dim < 2 || heads == 0 || head_dim == 0 || patches == 0 ||
      feature_dim == 0 || mlp_hidden == 0 || time_freqs == 0) {
    throw std::invalid_argument("model config fields must be positive (dim >= 2)");
  }
  if (time_freqs % 2 != 0) throw std::invalid_argument("time_freqs must be even");
  if (channels != 4) throw std::invalid_argument("the occupancy codec has exactly 4 channels");
  if (!(occupancy_saturation > 0.0)) throw std::invalid_argument("occupancy_saturation must be positive");
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.blocks = 2;
  c.grid = 2;
  c.dim = 8;
  c.heads = 2;
  c.head_dim = 4;
  c.patches = 4;
  c.feature_dim = 6;
  c.mlp_hidden = 12;
  c.time_freqs = 4;
  return c;
}

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::single_view: return "single_view";
    case Conditioning::concat: return "concat";
    case Conditioning::routed: return "routed";
    case Conditioning::routed_dual: return "routed_dual";
  }
  return "?";
}

Conditioning parse_conditioning(const std::string& name) {
  for (Conditioning c : {Conditioning::single_view, Conditioning::concat, Conditioning::routed,
                         Conditioning::routed_dual}) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown conditioning '" + name + "'");
}

}  // namespace roar::model
