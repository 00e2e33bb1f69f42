#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roar/evaluation/metrics.hpp"
#include "roar/evaluation/trace.hpp"
#include "roar/model/model.hpp"
#include "roar/trainer/trainer.hpp"

namespace roar::evaluation {

inline constexpr std::size_t kSamplerSteps = 32;
// Chamfer distance recorded for an empty decode: twice the box diagonal.
inline constexpr double kEmptyDecodeCd = 4.0 * 1.7320508075688772;

// Evaluation cameras of one shape: a reference view in bin 0, then auxiliary
// views cycling through bins 2, 1, 3, 0. The first k cameras form the k-view input.
std::vector<world::Camera> evaluation_cameras(std::uint64_t seed, std::size_t shape_index, std::size_t count);

// Euler integration of the velocity field from t = 1 (noise) to t = 0 with
// inference-mode routing. When `trace` is given it is resized and filled.
model::LatentTokens sample_latent(const model::Model& m, const world::ViewFeatureSet& views, std::uint64_t noise_seed,
                                  std::size_t steps = kSamplerSteps, RoutingTrace* trace = nullptr);

struct EvalRow {
  std::string shape_id;
  std::size_t view_count = 0;
  GeoMetrics metrics;
  bool empty_decode = false;
};

struct EvalSummary {
  std::size_t view_count = 0;
  std::size_t shapes = 0;
  std::size_t empty_decodes = 0;
  double cd_mean = 0.0, cd_stderr = 0.0;  // raw Chamfer distance
  double f1_0_1_mean = 0.0, f1_0_05_mean = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summary;  // one per requested view count, in order
};

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t steps = kSamplerSteps;
  std::size_t threads = 0;
  std::vector<RoutingTrace>* traces = nullptr;  // one per (shape, view count) when set
};

EvalTable evaluate(const model::Model& m, const trainer::Dataset& shapes, const std::vector<std::size_t>& view_counts,
                   const EvalOptions& options = {});

// CSV with header shape_id,view_count,cd_x1000,f1_0_1,f1_0_05.
std::string metrics_csv(const EvalTable& table);
std::string summary_csv(const EvalTable& table);

}  // namespace roar::evaluation
