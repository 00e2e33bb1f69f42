#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roar/model/codec.hpp"
#include "roar/model/config.hpp"
#include "roar/numerics/checkpoint.hpp"
#include "roar/numerics/ops.hpp"
#include "roar/router/router.hpp"
#include "roar/world/camera.hpp"

namespace roar::model {

// Resolves parameter names to tape handles, once per tape. With a gradient
// set the handles accumulate into it; names bound explicitly with bind()
// take precedence.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const NamedTensors& params, NamedTensors* grads = nullptr);

  Var operator()(const std::string& name);
  void bind(const std::string& name, Var v) { bound_[name] = v; }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  const NamedTensors& params_;
  NamedTensors* grads_;
  std::map<std::string, Var> bound_;
};

// Same-shaped zero tensors for every parameter.
NamedTensors zeros_like(const NamedTensors& params);

struct ForwardOptions {
  router::RouteMode mode = router::RouteMode::inference;
  // Train-mode noise; block l draws from gumbel->derive(l).
  std::optional<RandomStream> gumbel;
  double tau = router::kTemperature;
  // Send every token to the primary view through CA_p, bypassing the router.
  bool force_primary = false;
  // Per-block frozen routing (straight-through surrogate).
  const std::vector<router::FrozenRouting>* frozen = nullptr;
  // Filled with one decision per block when set.
  std::vector<router::RoutingDecision>* decisions = nullptr;
  ops::AttentionProbe* probe = nullptr;
};

struct ParameterReport {
  std::size_t baseline = 0;  // everything except router and CA_a
  std::size_t router = 0;
  std::size_t ca_a = 0;
  std::size_t total() const { return baseline + router + ca_a; }
  double added_ratio() const { return static_cast<double>(router + ca_a) / static_cast<double>(baseline); }
};

// Parameter group of a name: "router", "ca_p", "ca_a", "self_attention",
// "mlp", "modulation", "embedding", "head".
std::string parameter_group(const std::string& name);
// Learned position tables: no weight decay, unit-scale initialisation.
bool is_position(const std::string& name);

class Model {
 public:
  Model(ModelConfig config, Conditioning conditioning);

  // Training initialisation: zero modulation and output head.
  static Model initial(const ModelConfig& config, Conditioning conditioning, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Conditioning conditioning() const { return conditioning_; }
  bool has_router() const;
  bool has_auxiliary_stream() const { return conditioning_ == Conditioning::routed_dual; }

  NamedTensors& params() { return params_; }
  const NamedTensors& params() const { return params_; }
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;

  // Overwrites every parameter with seeded random values of unit-ish scale.
  void randomize(std::uint64_t seed);

  // Velocity prediction [N x C] for noisy latents z [N x C] at time t.
  Var forward(ParamBinder& bind, Var z, double t, const world::ViewFeatureSet& views,
              const ForwardOptions& options = {}) const;
  Tensor predict(const Tensor& z, double t, const world::ViewFeatureSet& views,
                 const ForwardOptions& options = {}) const;

  ParameterReport count_parameters() const;

  void save(const std::filesystem::path& path, const std::string& provenance_json = "{}") const;
  static Model load(const std::filesystem::path& path);

 private:
  void add(const std::string& name, Shape shape);
  void add_cross_attention(const std::string& prefix);

  ModelConfig config_;
  Conditioning conditioning_;
  NamedTensors params_;
};

// Multi-head cross-attention stream. queries [n x D] (layer-normalised, no
// affine), keys [m x D]; segments as in ops::attention.
Var cross_attention(ParamBinder& bind, const std::string& prefix, std::size_t heads, Var queries, Var keys,
                    std::span<const std::size_t> segments, std::size_t segment_len, ops::AttentionProbe* probe);

// Routed dual-stream dispatch. Token i attends only to the patches of view
// hard_index[i], through CA_p when that view is `primary` and through CA_a
// otherwise (every token uses CA_a when primary is empty). The output row is
// scaled by y(i, hard_index[i]), whose forward value is 1.
Var dispatch_cross_attention(ParamBinder& bind, const std::string& block_prefix, std::size_t heads,
                             Var normed_tokens, Var features, std::size_t patches,
                             const std::vector<std::size_t>& hard_index, Var y, std::optional<std::size_t> primary,
                             ops::AttentionProbe* probe);

std::string block_prefix(std::size_t block);
Tensor timestep_features(double t, std::size_t freqs);

}  // namespace roar::model
