#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "roar/model/model.hpp"
#include "roar/world/encoder.hpp"
#include "roar/world/shapes.hpp"

namespace roar::trainer {

enum class Phase { single_view, multi_view };

struct TrainConfig {
  double lr = 3e-4;
  double lr_min = 3e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global gradient norm; 0 disables
  std::size_t steps = 5000;
  std::size_t batch = 16;
  double p_pert = 0.2;
  std::size_t aux_min = 1;
  std::size_t aux_max = 4;
  std::uint64_t seed = 0;
  std::size_t threads = 0;    // 0: ROAR_THREADS or hardware concurrency
  std::size_t log_every = 1;  // one log row every k steps (and at the last step)

  void validate() const;
};

struct DatasetItem {
  world::ShapeId id;
  world::PointCloud cloud;
  model::LatentTokens latent;
};
using Dataset = std::vector<DatasetItem>;

Dataset make_dataset(const std::vector<world::ShapeId>& ids, const model::ModelConfig& cfg,
                     std::size_t points = world::kDefaultPointCount);

world::EncoderConfig encoder_for(const model::ModelConfig& cfg);

struct TrainingSample {
  model::LatentTokens latent_clean;
  world::ViewFeatureSet views;
  bool perturbed = false;
  bool primary_present = true;
};

// Views of `cloud` for the given cameras; the first camera is the primary
// when `with_primary` is set.
TrainingSample make_sample(const DatasetItem& item, const std::vector<world::Camera>& cameras, bool with_primary,
                           const world::EncoderConfig& enc);

// Rotations (multiples of 90 degrees) that keep the latent's azimuth tag out
// of every camera's bin.
std::vector<int> surviving_rotations(double azimuth_tag, const std::vector<world::Camera>& cameras);

struct Perturbation {
  TrainingSample sample;
  bool skipped = false;  // no admissible rotation: sample returned unchanged
  int rotation = 0;      // degrees applied
};

Perturbation build_perturbed_sample(const TrainingSample& base, const RandomStream& rng, const model::ModelConfig& cfg);

// Zeroes the CA_p gradients of a perturbed sample's contribution.
void apply_freeze(NamedTensors& grads, const TrainingSample& sample);

// Rectified flow: z_t = (1 - t) z + t noise, target u = noise - z.
Var flow_matching_loss(const model::Model& m, model::ParamBinder& bind, const TrainingSample& sample, double t,
                       const Tensor& noise, const model::ForwardOptions& options = {});
double flow_matching_loss(const model::Model& m, const TrainingSample& sample, double t, const Tensor& noise);

// Multi-view model initialised from a single-view one: CA_a copies CA_p, the
// router's projections, norms and LayerNorm affine copy CA_p's, w_agg = 1/H.
// A concat target shares every parameter with the single-view model.
model::Model upgrade_from_single(const model::Model& single, model::Conditioning target = model::Conditioning::routed_dual);

double cosine_lr(const TrainConfig& cfg, std::size_t step);

class AdamW {
 public:
  explicit AdamW(const NamedTensors& params);
  // Groups listed in `frozen` are left untouched (no moment or decay update).
  void step(NamedTensors& params, const NamedTensors& grads, double lr, const TrainConfig& cfg,
            const std::vector<std::string>& frozen = {});
  std::size_t steps() const { return t_; }

 private:
  NamedTensors m_, v_;
  std::size_t t_ = 0;
};

struct LogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double pert_fraction = 0.0;  // cumulative perturbed / samples
  std::size_t pert_skips = 0;  // cumulative
  double routing_entropy_mean = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  std::vector<LogRow> log;
  std::size_t samples = 0;
  std::size_t perturbed = 0;
  std::size_t skips = 0;
};

// Per step: draw `batch` samples, optionally perturb, compute per-sample
// gradients, freeze, average, clip, AdamW. The model keeps its last good
// parameters when a non-finite loss aborts the run (DivergenceError).
TrainResult train(model::Model& m, const TrainConfig& cfg, const Dataset& data, Phase phase,
                  const std::function<void(const LogRow&)>& on_log = {});

// Batch gradient of one step, exposed for tests: per-sample gradients are
// frozen then averaged in sample order.
struct BatchGradient {
  NamedTensors grads;
  double loss = 0.0;
  double entropy = 0.0;
  std::size_t perturbed = 0;
};
BatchGradient batch_gradient(const model::Model& m, const std::vector<TrainingSample>& samples,
                             const std::vector<double>& ts, const std::vector<Tensor>& noises,
                             const std::vector<std::optional<RandomStream>>& gumbel, std::size_t threads);

// Sample b of training step `step`: a shape, a primary camera in bin 0 and,
// in the multi-view phase, U{aux_min..aux_max} auxiliary cameras from any
// bin; perturbed with probability p_pert. A pure function of (cfg.seed, step, b).
struct DrawnSample {
  TrainingSample sample;
  bool attempted = false;  // perturbation was drawn
  bool skipped = false;    // drawn but no admissible rotation
};
DrawnSample draw_sample(const TrainConfig& cfg, const Dataset& data, Phase phase, const model::ModelConfig& mcfg,
                        const world::EncoderConfig& enc, std::size_t step, std::size_t b);

std::size_t resolve_threads(std::size_t requested);

// CSV with header step,loss,lr,pert_fraction,pert_skips,routing_entropy_mean.
std::string log_csv(const std::vector<LogRow>& rows);

}  // namespace roar::trainer
