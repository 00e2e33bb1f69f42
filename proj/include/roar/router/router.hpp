#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "roar/numerics/rng.hpp"
#include "roar/numerics/tape.hpp"
#include "roar/world/camera.hpp"

// Token-wise view routing: every latent token scores every view through
// per-head dot products between a normalised query of the token and a
// normalised key of the view's mean-pooled patch features, then picks one
// view with hard Gumbel-softmax.
namespace roar::router {

enum class RouteMode { train, inference };

inline constexpr double kTemperature = 1.0;

struct RouterParams {
  Tensor ln_gain, ln_bias;  // [D] affine applied to the layer-normalised token
  Tensor wq, wk;            // [H*d x D]
  Tensor q_norm, k_norm;    // [d] RMSNorm gains
  Tensor w_agg;             // [H], 1/H at initialisation
  std::size_t heads = 1;

  static RouterParams initial(std::size_t dim, std::size_t heads, std::size_t head_dim, std::uint64_t seed);
  std::size_t head_dim() const { return wq.dim(0) / heads; }
  std::size_t parameter_count() const;
};

// Tape handles for one set of router parameters.
struct RouterVars {
  Var ln_gain, ln_bias, wq, wk, q_norm, k_norm, w_agg;
  std::size_t heads = 1;
};

RouterVars bind_constants(Tape& tape, const RouterParams& p);

// Mean over the S patches of every view: [V x S x D] -> [V x D].
Tensor pool_view_keys(const world::ViewFeatureSet& views);

// normed_tokens is LN(z) without affine, [N x D]; pooled is [V x D].
// Returns routing logits [N x V].
Var routing_logits(Var normed_tokens, Var pooled, const RouterVars& p);
Tensor routing_logits(const Tensor& tokens, const Tensor& pooled, const RouterParams& p);

struct RoutingDecision {
  std::vector<std::size_t> hard_index;  // v* per token
  Tensor y_soft;                        // [N x V]
  Tensor logits;                        // [N x V]
  Tensor gumbel;                        // [N x V], zero in inference mode
  std::uint64_t gumbel_key = 0;
  RouteMode mode = RouteMode::inference;

  std::size_t tokens() const { return hard_index.size(); }
  std::size_t views() const { return logits.cols(); }
  Tensor y_hard() const;  // one-hot rows
  double mean_entropy() const;
};

// Gumbel(0,1) noise for an N x V call; draw (i, v) is a pure function of
// (stream key, i * V + v). Uniform draws of exactly 0 or 1 are resampled.
Tensor gumbel_noise(const RandomStream& stream, std::size_t tokens, std::size_t views);

// Lowest index wins ties.
std::size_t argmax_row(std::span<const double> row);

// Selection with explicit noise: hard_index = argmax(logits + noise),
// y_soft = softmax((logits + noise) / tau). The mode is recorded as given.
RoutingDecision select_with_noise(const Tensor& logits, const Tensor& noise, double tau, RouteMode mode);

// Plain (tape-free) selection. Train mode needs a stream.
RoutingDecision gumbel_select(const Tensor& logits, double tau, RouteMode mode, const RandomStream* stream);

// Tape-level selection: returns the decision and the straight-through
// composite y = y_hard - sg(y_soft) + y_soft as a Var [N x V] whose forward
// value is exactly y_hard.
struct RoutedSelection {
  RoutingDecision decision;
  Var y;
};

// When `frozen` is given the hard indices are taken from it instead of the
// argmax, and y is evaluated as y_soft + (y_hard - frozen_soft) with the
// frozen soft weights held constant: the straight-through surrogate used for
// finite-difference checks.
struct FrozenRouting {
  std::vector<std::size_t> hard_index;
  Tensor y_soft;
};

RoutedSelection gumbel_select(Var logits, double tau, RouteMode mode, const RandomStream* stream,
                              const FrozenRouting* frozen = nullptr);

}  // namespace roar::router
