#include "roar/model/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace roar::model {

using nlohmann::json;

ParamBinder::ParamBinder(Tape& tape, const NamedTensors& params, NamedTensors* grads)
    : tape_(tape), params_(params), grads_(grads) {}

Var ParamBinder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto p = params_.find(name);
  if (p == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  Tensor* sink = nullptr;
  if (grads_) {
    auto g = grads_->find(name);
    if (g == grads_->end()) g = grads_->emplace(name, Tensor(p->second.shape())).first;
    sink = &g->second;
  }
  Var v = tape_.parameter(p->second, sink);
  bound_[name] = v;
  return v;
}

NamedTensors zeros_like(const NamedTensors& params) {
  NamedTensors out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape()));
  return out;
}

std::string block_prefix(std::size_t block) { return "blocks." + std::to_string(block) + "."; }

std::string parameter_group(const std::string& name) {
  if (name.find(".router.") != std::string::npos) return "router";
  if (name.find(".ca_p.") != std::string::npos) return "ca_p";
  if (name.find(".ca_a.") != std::string::npos) return "ca_a";
  if (name.find(".attn.") != std::string::npos) return "self_attention";
  if (name.find(".mlp.") != std::string::npos) return "mlp";
  if (name.find("mod.") != std::string::npos) return "modulation";
  if (name.rfind("head.", 0) == 0) return "head";
  return "embedding";
}

Tensor timestep_features(double t, std::size_t freqs) {
  const std::size_t half = freqs / 2;
  Tensor out({1, freqs});
  for (std::size_t j = 0; j < half; ++j) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(j) / static_cast<double>(half));
    out[j] = std::sin(1000.0 * t * w);
    out[half + j] = std::cos(1000.0 * t * w);
  }
  return out;
}

bool is_position(const std::string& name) { return name == "embed.pos" || name == "embed.patch"; }

Model::Model(ModelConfig config, Conditioning conditioning) : config_(config), conditioning_(conditioning) {
  config_.validate();
  const std::size_t D = config_.dim, C = config_.channels, N = config_.tokens(), W = config_.width();
  const std::size_t d = config_.head_dim, M = config_.mlp_hidden, F = config_.time_freqs;
  add("embed.in.weight", {D, C});
  add("embed.in.bias", {D});
  add("embed.pos", {N, D});
  add("embed.cond.weight", {D, config_.feature_dim});
  add("embed.cond.bias", {D});
  add("embed.patch", {config_.patches, D});  // patch position, shared by every view
  add("time.fc1.weight", {D, F});
  add("time.fc1.bias", {D});
  add("time.fc2.weight", {D, D});
  add("time.fc2.bias", {D});
  for (std::size_t l = 0; l < config_.blocks; ++l) {
    const std::string b = block_prefix(l);
    add(b + "mod.weight", {6 * D, D});
    add(b + "mod.bias", {6 * D});
    add(b + "attn.qkv.weight", {3 * W, D});
    add(b + "attn.q_norm", {d});
    add(b + "attn.k_norm", {d});
    add(b + "attn.out.weight", {D, W});
    add(b + "attn.out.bias", {D});
    add_cross_attention(b + "ca_p.");
    if (has_auxiliary_stream()) add_cross_attention(b + "ca_a.");
    if (has_router()) {
      add(b + "router.ln_gain", {D});
      add(b + "router.ln_bias", {D});
      add(b + "router.wq", {W, D});
      add(b + "router.wk", {W, D});
      add(b + "router.q_norm", {d});
      add(b + "router.k_norm", {d});
      add(b + "router.w_agg", {config_.heads});
    }
    add(b + "mlp.fc1.weight", {M, D});
    add(b + "mlp.fc1.bias", {M});
    add(b + "mlp.fc2.weight", {D, M});
    add(b + "mlp.fc2.bias", {D});
  }
  add("final.mod.weight", {2 * D, D});
  add("final.mod.bias", {2 * D});
  add("head.weight", {C, D});
  add("head.bias", {C});
}

void Model::add(const std::string& name, Shape shape) { params_.emplace(name, Tensor(std::move(shape))); }

void Model::add_cross_attention(const std::string& prefix) {
  const std::size_t D = config_.dim, W = config_.width(), d = config_.head_dim;
  add(prefix + "ln_gain", {D});
  add(prefix + "ln_bias", {D});
  add(prefix + "wq", {W, D});
  add(prefix + "wk", {W, D});
  add(prefix + "wv", {W, D});
  add(prefix + "q_norm", {d});
  add(prefix + "k_norm", {d});
  add(prefix + "out.weight", {D, W});
  add(prefix + "out.bias", {D});
}

bool Model::has_router() const {
  return conditioning_ == Conditioning::routed || conditioning_ == Conditioning::routed_dual;
}

Tensor& Model::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& Model::param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_gain(const std::string& name) {
  return ends_with(name, "ln_gain") || ends_with(name, "q_norm") || ends_with(name, "k_norm");
}

bool is_bias(const std::string& name) { return ends_with(name, "bias"); }

}  // namespace

Model Model::initial(const ModelConfig& config, Conditioning conditioning, std::uint64_t seed) {
  Model m(config, conditioning);
  const RandomStream root(seed, "init");
  for (auto& [name, t] : m.params_) {
    const RandomStream s = root.derive(hash_name(name));
    if (is_gain(name)) {
      t.fill(1.0);
    } else if (ends_with(name, "w_agg")) {
      t.fill(1.0 / static_cast<double>(config.heads));
    } else if (is_bias(name) || name.find("mod.") != std::string::npos || name.rfind("head.", 0) == 0) {
      t.fill(0.0);
    } else if (is_position(name)) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = s.normal(i);
    } else {
      const double sd = 1.0 / std::sqrt(static_cast<double>(t.cols()));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = sd * s.normal(i);
    }
  }
  return m;
}

void Model::randomize(std::uint64_t seed) {
  const RandomStream root(seed, "randomize");
  for (auto& [name, t] : params_) {
    const RandomStream s = root.derive(hash_name(name));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double u = 2.0 * s.uniform(i) - 1.0;
      if (is_gain(name)) {
        t[i] = 1.0 + 0.5 * u;
      } else if (is_bias(name)) {
        t[i] = 0.2 * u;
      } else if (t.rank() == 2 && !is_position(name)) {
        t[i] = u * std::sqrt(3.0 / static_cast<double>(t.cols()));
      } else {
        t[i] = u;
      }
    }
  }
}

namespace {

Var head_rms(Var x, Var gain, std::size_t heads) {
  const Shape shape = x.shape();
  const std::size_t rows = x.value().rows(), width = x.value().cols();
  return ops::reshape(ops::rms_norm(ops::reshape(x, {rows * heads, width / heads}), gain), shape);
}

Var modulate(Var normed, Var shift, Var scale) {
  return ops::add_row(ops::mul_row(normed, ops::add_scalar(scale, 1.0)), shift);
}

std::vector<std::size_t> view_rows(std::size_t view, std::size_t patches) {
  std::vector<std::size_t> rows(patches);
  std::iota(rows.begin(), rows.end(), view * patches);
  return rows;
}

router::RouterVars router_vars(ParamBinder& bind, const std::string& b, std::size_t heads) {
  const std::string r = b + "router.";
  return {bind(r + "ln_gain"), bind(r + "ln_bias"), bind(r + "wq"),  bind(r + "wk"),
          bind(r + "q_norm"),  bind(r + "k_norm"),  bind(r + "w_agg"), heads};
}

}  // namespace

Var cross_attention(ParamBinder& bind, const std::string& prefix, std::size_t heads, Var queries, Var keys,
                    std::span<const std::size_t> segments, std::size_t segment_len, ops::AttentionProbe* probe) {
  Var qin = ops::add_row(ops::mul_row(queries, bind(prefix + "ln_gain")), bind(prefix + "ln_bias"));
  Var q = head_rms(ops::linear(qin, bind(prefix + "wq")), bind(prefix + "q_norm"), heads);
  Var k = head_rms(ops::linear(keys, bind(prefix + "wk")), bind(prefix + "k_norm"), heads);
  Var v = ops::linear(keys, bind(prefix + "wv"));
  Var o = ops::attention(q, k, v, heads, segments, segment_len, probe);
  return ops::linear(o, bind(prefix + "out.weight"), bind(prefix + "out.bias"));
}

Var dispatch_cross_attention(ParamBinder& bind, const std::string& b, std::size_t heads, Var normed_tokens,
                             Var features, std::size_t patches, const std::vector<std::size_t>& hard_index, Var y,
                             std::optional<std::size_t> primary, ops::AttentionProbe* probe) {
  const std::size_t n = normed_tokens.value().rows();
  const std::size_t views = features.value().rows() / patches;
  if (hard_index.size() != n) throw ShapeError("dispatch: one routing index per token required");
  if (primary && *primary >= views) throw std::out_of_range("dispatch: primary index out of range");
  std::vector<std::size_t> idx_p, idx_a, seg_a;
  for (std::size_t i = 0; i < n; ++i) {
    if (hard_index[i] >= views) throw std::out_of_range("dispatch: routed view out of range");
    if (primary && hard_index[i] == *primary) {
      idx_p.push_back(i);
    } else {
      idx_a.push_back(i);
      seg_a.push_back(hard_index[i]);
    }
  }
  std::optional<Var> combined;
  if (!idx_p.empty()) {
    Var keys = ops::gather_rows(features, view_rows(*primary, patches));
    Var out = cross_attention(bind, b + "ca_p.", heads, ops::gather_rows(normed_tokens, idx_p), keys, {}, 0, probe);
    combined = ops::scatter_rows(out, idx_p, n);
  }
  if (!idx_a.empty()) {
    Var out = cross_attention(bind, b + "ca_a.", heads, ops::gather_rows(normed_tokens, idx_a), features, seg_a,
                              patches, probe);
    Var scattered = ops::scatter_rows(out, idx_a, n);
    combined = combined ? ops::add(*combined, scattered) : scattered;
  }
  return ops::mul_col(*combined, ops::pick(y, hard_index));
}

Var Model::forward(ParamBinder& bind, Var z, double t, const world::ViewFeatureSet& views,
                   const ForwardOptions& options) const {
  Tape& tape = bind.tape();
  const ModelConfig& c = config_;
  const std::size_t D = c.dim, N = c.tokens(), S = c.patches;
  if (z.value().rows() != N || z.value().cols() != c.channels) {
    throw ShapeError("latent shape " + shape_str(z.shape()) + " does not match config");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t must lie in [0, 1]");
  views.validate();
  if (views.patches() != S || views.dim() != c.feature_dim) throw ShapeError("view features do not match config");
  const std::size_t V = views.views();
  const std::optional<std::size_t> primary = views.primary_index;
  if (options.frozen && options.frozen->size() != c.blocks) throw ShapeError("frozen routing needs one entry per block");
  if (options.mode == router::RouteMode::train && has_router() && !options.gumbel && !options.frozen) {
    throw std::invalid_argument("train-mode routing needs a gumbel stream");
  }
  if (options.decisions) options.decisions->clear();

  Var x = ops::add(ops::linear(z, bind("embed.in.weight"), bind("embed.in.bias")), bind("embed.pos"));
  Var tf = tape.constant(timestep_features(t, c.time_freqs));
  Var temb = ops::linear(ops::silu(ops::linear(tf, bind("time.fc1.weight"), bind("time.fc1.bias"))),
                         bind("time.fc2.weight"), bind("time.fc2.bias"));
  Var cond = ops::silu(temb);
  Var feats = ops::linear(tape.constant(views.features.reshaped({V * S, c.feature_dim})), bind("embed.cond.weight"),
                          bind("embed.cond.bias"));
  feats = ops::add(feats, ops::concat_rows(std::vector<Var>(V, bind("embed.patch"))));
  std::optional<Var> pooled;
  if (has_router() && !options.force_primary) pooled = ops::segment_mean(feats, S);

  for (std::size_t l = 0; l < c.blocks; ++l) {
    const std::string b = block_prefix(l);
    Var mod = ops::linear(cond, bind(b + "mod.weight"), bind(b + "mod.bias"));
    auto part = [&](std::size_t k) { return ops::slice_cols(mod, k * D, D); };

    Var h = modulate(ops::layer_norm(x), part(0), part(1));
    Var qkv = ops::linear(h, bind(b + "attn.qkv.weight"));
    const std::size_t W = c.width();
    Var q = head_rms(ops::slice_cols(qkv, 0, W), bind(b + "attn.q_norm"), c.heads);
    Var k = head_rms(ops::slice_cols(qkv, W, W), bind(b + "attn.k_norm"), c.heads);
    Var a = ops::attention(q, k, ops::slice_cols(qkv, 2 * W, W), c.heads);
    a = ops::linear(a, bind(b + "attn.out.weight"), bind(b + "attn.out.bias"));
    x = ops::add(x, ops::mul_row(a, part(2)));

    Var xn = ops::layer_norm(x);
    Var ca;
    const bool single = conditioning_ == Conditioning::single_view || (has_router() && options.force_primary);
    if (single) {
      const std::size_t p = primary.value_or(0);
      if (options.force_primary && !primary) throw std::invalid_argument("forced primary routing needs a primary view");
      ca = cross_attention(bind, b + "ca_p.", c.heads, xn, ops::gather_rows(feats, view_rows(p, S)), {}, 0,
                           options.probe);
    } else if (conditioning_ == Conditioning::concat) {
      ca = cross_attention(bind, b + "ca_p.", c.heads, xn, feats, {}, 0, options.probe);
    } else {
      Var logits = router::routing_logits(xn, *pooled, router_vars(bind, b, c.heads));
      std::optional<RandomStream> stream;
      if (options.gumbel) stream = options.gumbel->derive(l);
      router::RoutedSelection sel = router::gumbel_select(logits, options.tau, options.mode,
                                                          stream ? &*stream : nullptr,
                                                          options.frozen ? &(*options.frozen)[l] : nullptr);
      if (conditioning_ == Conditioning::routed) {
        ca = cross_attention(bind, b + "ca_p.", c.heads, xn, feats, sel.decision.hard_index, S, options.probe);
        ca = ops::mul_col(ca, ops::pick(sel.y, sel.decision.hard_index));
      } else {
        ca = dispatch_cross_attention(bind, b, c.heads, xn, feats, S, sel.decision.hard_index, sel.y, primary,
                                      options.probe);
      }
      if (options.decisions) options.decisions->push_back(std::move(sel.decision));
    }
    x = ops::add(x, ca);

    Var h2 = modulate(ops::layer_norm(x), part(3), part(4));
    Var m = ops::linear(ops::silu(ops::linear(h2, bind(b + "mlp.fc1.weight"), bind(b + "mlp.fc1.bias"))),
                        bind(b + "mlp.fc2.weight"), bind(b + "mlp.fc2.bias"));
    x = ops::add(x, ops::mul_row(m, part(5)));
  }

  Var fmod = ops::linear(cond, bind("final.mod.weight"), bind("final.mod.bias"));
  Var h = modulate(ops::layer_norm(x), ops::slice_cols(fmod, 0, D), ops::slice_cols(fmod, D, D));
  return ops::linear(h, bind("head.weight"), bind("head.bias"));
}

Tensor Model::predict(const Tensor& z, double t, const world::ViewFeatureSet& views,
                      const ForwardOptions& options) const {
  Tape tape;
  ParamBinder bind(tape, params_);
  Var out = forward(bind, tape.constant(z), t, views, options);
  if (!out.value().all_finite()) throw std::domain_error("non-finite activations in forward pass");
  return out.value();
}

ParameterReport Model::count_parameters() const {
  ParameterReport r;
  for (const auto& [name, t] : params_) {
    const std::string g = parameter_group(name);
    if (g == "router") {
      r.router += t.size();
    } else if (g == "ca_a") {
      r.ca_a += t.size();
    } else {
      r.baseline += t.size();
    }
  }
  return r;
}

namespace {

json config_json(const ModelConfig& c) {
  return {{"blocks", c.blocks},           {"grid", c.grid},
          {"channels", c.channels},       {"dim", c.dim},
          {"heads", c.heads},             {"head_dim", c.head_dim},
          {"patches", c.patches},         {"feature_dim", c.feature_dim},
          {"mlp_hidden", c.mlp_hidden},   {"time_freqs", c.time_freqs},
          {"occupancy_saturation", c.occupancy_saturation}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.blocks = j.at("blocks");
  c.grid = j.at("grid");
  c.channels = j.at("channels");
  c.dim = j.at("dim");
  c.heads = j.at("heads");
  c.head_dim = j.at("head_dim");
  c.patches = j.at("patches");
  c.feature_dim = j.at("feature_dim");
  c.mlp_hidden = j.at("mlp_hidden");
  c.time_freqs = j.at("time_freqs");
  c.occupancy_saturation = j.at("occupancy_saturation");
  return c;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace

void Model::save(const std::filesystem::path& path, const std::string& provenance_json) const {
  save_tensors(path, params_);
  json side;
  side["format"] = "roar-model";
  side["conditioning"] = to_string(conditioning_);
  side["config"] = config_json(config_);
  side["config_hash"] = hex64(hash_name(side["config"].dump()));
  side["provenance"] = json::parse(provenance_json);
  std::ofstream out(sidecar_path(path));
  if (!out) throw CheckpointError("cannot write " + sidecar_path(path).string());
  out << side.dump(2) << "\n";
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw CheckpointError("missing sidecar " + sidecar_path(path).string());
  json side;
  try {
    side = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad sidecar: ") + e.what());
  }
  Model m(config_from_json(side.at("config")), parse_conditioning(side.at("conditioning")));
  NamedTensors loaded = load_tensors(path);
  if (loaded.size() != m.params_.size()) throw CheckpointError("checkpoint parameter count does not match config");
  for (auto& [name, t] : m.params_) {
    auto it = loaded.find(name);
    if (it == loaded.end() || it->second.shape() != t.shape()) {
      throw CheckpointError("checkpoint tensor '" + name + "' missing or misshapen");
    }
    t = std::move(it->second);
  }
  return m;
}

}  // namespace roar::model
