#include "roar/router/router.hpp"

#include <cmath>
#include <stdexcept>

#include "roar/numerics/ops.hpp"

namespace roar::router {

RouterParams RouterParams::initial(std::size_t dim, std::size_t heads, std::size_t head_dim, std::uint64_t seed) {
  if (dim == 0 || heads == 0 || head_dim == 0) throw std::invalid_argument("router dimensions must be positive");
  RouterParams p;
  p.heads = heads;
  p.ln_gain = Tensor({dim}, 1.0);
  p.ln_bias = Tensor({dim});
  p.wq = Tensor({heads * head_dim, dim});
  p.wk = Tensor({heads * head_dim, dim});
  const RandomStream stream(seed, "router-init");
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < p.wq.size(); ++i) p.wq[i] = sd * stream.derive(0).normal(i);
  for (std::size_t i = 0; i < p.wk.size(); ++i) p.wk[i] = sd * stream.derive(1).normal(i);
  p.q_norm = Tensor({head_dim}, 1.0);
  p.k_norm = Tensor({head_dim}, 1.0);
  p.w_agg = Tensor({heads}, 1.0 / static_cast<double>(heads));
  return p;
}

std::size_t RouterParams::parameter_count() const {
  return ln_gain.size() + ln_bias.size() + wq.size() + wk.size() + q_norm.size() + k_norm.size() + w_agg.size();
}

RouterVars bind_constants(Tape& tape, const RouterParams& p) {
  return {tape.parameter(p.ln_gain, nullptr), tape.parameter(p.ln_bias, nullptr), tape.parameter(p.wq, nullptr),
          tape.parameter(p.wk, nullptr),      tape.parameter(p.q_norm, nullptr),  tape.parameter(p.k_norm, nullptr),
          tape.parameter(p.w_agg, nullptr),   p.heads};
}

Tensor pool_view_keys(const world::ViewFeatureSet& views) {
  views.validate();
  const std::size_t V = views.views(), S = views.patches(), D = views.dim();
  Tensor out({V, D});
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t s = 0; s < S; ++s) {
      const double* f = views.features.ptr() + (v * S + s) * D;
      for (std::size_t c = 0; c < D; ++c) out(v, c) += f[c];
    }
    for (std::size_t c = 0; c < D; ++c) out(v, c) /= static_cast<double>(S);
  }
  return out;
}

namespace {

Var head_rms(Var x, Var gain, std::size_t heads) {
  const Shape shape = x.shape();
  const std::size_t rows = x.value().rows(), width = x.value().cols();
  if (width % heads != 0) throw ShapeError("projection width not divisible by head count");
  Var split = ops::reshape(x, {rows * heads, width / heads});
  return ops::reshape(ops::rms_norm(split, gain), shape);
}

}  // namespace

Var routing_logits(Var normed_tokens, Var pooled, const RouterVars& p) {
  const std::size_t n = normed_tokens.value().rows(), v = pooled.value().rows();
  Var z = ops::add_row(ops::mul_row(normed_tokens, p.ln_gain), p.ln_bias);
  Var q = head_rms(ops::linear(z, p.wq), p.q_norm, p.heads);
  Var k = head_rms(ops::linear(pooled, p.wk), p.k_norm, p.heads);
  Var dots = ops::head_dots(q, k, p.heads);
  Var r = ops::linear(dots, ops::reshape(p.w_agg, {1, p.heads}));
  return ops::reshape(r, {n, v});
}

Tensor routing_logits(const Tensor& tokens, const Tensor& pooled, const RouterParams& p) {
  Tape tape;
  const RouterVars vars = bind_constants(tape, p);
  Var normed = ops::layer_norm(tape.constant(tokens));
  return routing_logits(normed, tape.constant(pooled), vars).value();
}

Tensor RoutingDecision::y_hard() const {
  Tensor out({tokens(), views()});
  for (std::size_t i = 0; i < tokens(); ++i) out(i, hard_index[i]) = 1.0;
  return out;
}

double RoutingDecision::mean_entropy() const {
  if (tokens() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < tokens(); ++i) {
    for (double p : y_soft.row(i)) {
      if (p > 0.0) total -= p * std::log(p);
    }
  }
  return total / static_cast<double>(tokens());
}

Tensor gumbel_noise(const RandomStream& stream, std::size_t tokens, std::size_t views) {
  Tensor g({tokens, views});
  for (std::size_t j = 0; j < g.size(); ++j) {
    double u = stream.uniform_open(j);
    for (std::uint64_t retry = 1; u <= 0.0 || u >= 1.0; ++retry) u = stream.uniform_open(j + (retry << 40));
    g[j] = -std::log(-std::log(u));
  }
  return g;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

namespace {

void check_logits(const Tensor& logits) {
  if (logits.rank() != 2 || logits.cols() == 0) throw ShapeError("routing logits must be [N x V] with V >= 1");
}

void fill_hard(RoutingDecision& d) {
  const std::size_t n = d.logits.rows(), v = d.logits.cols();
  d.hard_index.resize(n);
  std::vector<double> perturbed(v);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < v; ++j) perturbed[j] = d.logits(i, j) + d.gumbel(i, j);
    d.hard_index[i] = argmax_row(perturbed);
  }
}

RoutingDecision decide(const Tensor& logits, RouteMode mode, const RandomStream* stream) {
  check_logits(logits);
  RoutingDecision d;
  d.mode = mode;
  d.logits = logits;
  const std::size_t n = logits.rows(), v = logits.cols();
  if (mode == RouteMode::train) {
    if (!stream) throw std::invalid_argument("train-mode routing needs a random stream");
    d.gumbel = gumbel_noise(*stream, n, v);
    d.gumbel_key = stream->key();
  } else {
    d.gumbel = Tensor({n, v});
  }
  fill_hard(d);
  return d;
}

Tensor soft_weights(const Tensor& logits, const Tensor& noise, double tau) {
  Tape tape;
  return ops::softmax(ops::scale(ops::add(tape.constant(logits), tape.constant(noise)), 1.0 / tau)).value();
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
}

}  // namespace

RoutingDecision gumbel_select(const Tensor& logits, double tau, RouteMode mode, const RandomStream* stream) {
  check_tau(tau);
  RoutingDecision d = decide(logits, mode, stream);
  d.y_soft = soft_weights(logits, d.gumbel, tau);
  return d;
}

RoutingDecision select_with_noise(const Tensor& logits, const Tensor& noise, double tau, RouteMode mode) {
  check_tau(tau);
  check_logits(logits);
  if (noise.shape() != logits.shape()) throw ShapeError("noise shape must match logits");
  RoutingDecision d;
  d.mode = mode;
  d.logits = logits;
  d.gumbel = noise;
  fill_hard(d);
  d.y_soft = soft_weights(logits, noise, tau);
  return d;
}

RoutedSelection gumbel_select(Var logits, double tau, RouteMode mode, const RandomStream* stream,
                              const FrozenRouting* frozen) {
  check_tau(tau);
  Tape& tape = *logits.tape;
  RoutingDecision d = decide(logits.value(), mode, stream);
  Var y_soft = ops::softmax(ops::scale(ops::add(logits, tape.constant(d.gumbel)), 1.0 / tau));
  d.y_soft = y_soft.value();
  if (frozen) {
    if (frozen->hard_index.size() != d.tokens() || frozen->y_soft.shape() != d.y_soft.shape()) {
      throw ShapeError("frozen routing does not match the logits");
    }
    d.hard_index = frozen->hard_index;
    Tensor offset = d.y_hard();
    for (std::size_t j = 0; j < offset.size(); ++j) offset[j] -= frozen->y_soft[j];
    return {std::move(d), ops::add(y_soft, tape.constant(std::move(offset)))};
  }
  Var y = ops::straight_through(y_soft, d.y_hard());
  return {std::move(d), y};
}

}  // namespace roar::router
