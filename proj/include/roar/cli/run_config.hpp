#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "roar/model/config.hpp"
#include "roar/trainer/trainer.hpp"
#include "roar/world/shapes.hpp"

namespace roar::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a command needs, with defaults for every field.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  std::size_t train_shapes = 400;
  std::size_t val_shapes = 50;
  std::size_t test_shapes = 50;
  std::size_t points = world::kDefaultPointCount;
  std::vector<world::ShapeClass> classes{world::kAllShapeClasses.begin(), world::kAllShapeClasses.end()};

  model::ModelConfig model;

  trainer::TrainConfig train;
  std::size_t steps_single = 5000;
  std::size_t steps_multi = 5000;
  model::Conditioning mv_conditioning = model::Conditioning::routed_dual;

  std::vector<std::size_t> view_counts{1, 2, 4};
  std::size_t sampler_steps = 32;
  std::size_t eval_shapes = 0;  // 0: the whole test split

  // Flat "section.key" -> value view; the INI text is rendered from it.
  std::map<std::string, std::string> to_map() const;
  std::string to_ini() const;
  std::string hash() const;  // 16 hex digits over the INI text

  // Throws ConfigError on unknown keys or unparsable values.
  void apply(const std::map<std::string, std::string>& values);
  void validate() const;
};

// Reads "section.key" values from an INI file, or from a JSON file (by
// extension .json) holding {"section": {"key": value}}.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// defaults < file (when given) < overrides.
RunConfig resolve_config(const std::filesystem::path* file, const std::map<std::string, std::string>& overrides);

world::ShapeId parse_shape_id(const std::string& text);

}  // namespace roar::cli
