#include "roar/trainer/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "roar/world/shapes.hpp"

namespace roar::trainer {

using model::Model;
using model::ParamBinder;

void TrainConfig::validate() const {
  if (!(p_pert >= 0.0 && p_pert <= 1.0)) throw std::invalid_argument("p_pert must lie in [0, 1]");
  if (aux_min > aux_max) throw std::invalid_argument("aux_min must not exceed aux_max");
  if (aux_max > 11) throw std::invalid_argument("aux_max must not exceed 11");
  if (batch == 0 || steps == 0) throw std::invalid_argument("steps and batch must be positive");
  if (!(lr > 0.0) || !(lr_min >= 0.0) || lr_min > lr) throw std::invalid_argument("need 0 <= lr_min <= lr, lr > 0");
  if (log_every == 0) throw std::invalid_argument("log_every must be positive");
}

world::EncoderConfig encoder_for(const model::ModelConfig& cfg) {
  world::EncoderConfig enc;
  enc.grid = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(cfg.patches))));
  if (enc.grid * enc.grid != cfg.patches) throw std::invalid_argument("patch count must be a perfect square");
  enc.dim = cfg.feature_dim;
  return enc;
}

Dataset make_dataset(const std::vector<world::ShapeId>& ids, const model::ModelConfig& cfg, std::size_t points) {
  Dataset out;
  out.reserve(ids.size());
  for (const world::ShapeId& id : ids) {
    DatasetItem item;
    item.id = id;
    item.cloud = world::generate_shape(id.seed, id.shape_class, points);
    item.latent = model::latent_encode(item.cloud, cfg);
    out.push_back(std::move(item));
  }
  return out;
}

TrainingSample make_sample(const DatasetItem& item, const std::vector<world::Camera>& cameras, bool with_primary,
                           const world::EncoderConfig& enc) {
  std::vector<Tensor> per_view;
  per_view.reserve(cameras.size());
  for (const world::Camera& cam : cameras) per_view.push_back(world::encode_view(item.cloud, cam, enc));
  TrainingSample s;
  s.latent_clean = item.latent;
  s.views = world::make_view_set(per_view, cameras, with_primary ? std::optional<std::size_t>(0) : std::nullopt);
  s.primary_present = with_primary;
  return s;
}

std::vector<int> surviving_rotations(double azimuth_tag, const std::vector<world::Camera>& cameras) {
  std::vector<int> out;
  for (int r : {0, 90, 180, 270}) {
    const int bin = world::azimuth_bin(azimuth_tag + r);
    const bool hit = std::any_of(cameras.begin(), cameras.end(), [&](const world::Camera& c) { return c.bin == bin; });
    if (!hit) out.push_back(r);
  }
  return out;
}

Perturbation build_perturbed_sample(const TrainingSample& base, const RandomStream& rng, const model::ModelConfig& cfg) {
  if (base.perturbed) throw std::invalid_argument("sample is already perturbed");
  const std::vector<int> survivors = surviving_rotations(base.latent_clean.azimuth_tag, base.views.cameras);
  Perturbation p;
  p.sample = base;
  if (survivors.empty()) {
    p.skipped = true;
    return p;
  }
  p.rotation = survivors[rng.below(0, survivors.size())];
  p.sample.latent_clean = model::rotate_latent(base.latent_clean, cfg.grid, p.rotation / 90);
  p.sample.latent_clean.azimuth_tag = world::wrap_degrees(base.latent_clean.azimuth_tag + p.rotation);
  p.sample.views.primary_index.reset();
  p.sample.primary_present = false;
  p.sample.perturbed = true;
  return p;
}

void apply_freeze(NamedTensors& grads, const TrainingSample& sample) {
  if (!sample.perturbed) return;
  for (auto& [name, g] : grads) {
    if (model::parameter_group(name) == "ca_p") g.fill(0.0);
  }
}

Var flow_matching_loss(const Model& m, ParamBinder& bind, const TrainingSample& sample, double t, const Tensor& noise,
                       const model::ForwardOptions& options) {
  const Tensor& z = sample.latent_clean.tokens;
  if (noise.shape() != z.shape()) throw ShapeError("noise shape must match the latent");
  Tensor zt(z.shape()), target(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    zt[i] = (1.0 - t) * z[i] + t * noise[i];
    target[i] = noise[i] - z[i];
  }
  Tape& tape = bind.tape();
  Var pred = m.forward(bind, tape.constant(std::move(zt)), t, sample.views, options);
  Var loss = ops::mse(pred, tape.constant(std::move(target)));
  if (!std::isfinite(loss.value().item())) throw std::domain_error("non-finite flow-matching loss");
  return loss;
}

double flow_matching_loss(const Model& m, const TrainingSample& sample, double t, const Tensor& noise) {
  Tape tape;
  ParamBinder bind(tape, m.params());
  return flow_matching_loss(m, bind, sample, t, noise).value().item();
}

Model upgrade_from_single(const Model& single, model::Conditioning target) {
  if (single.conditioning() != model::Conditioning::single_view) {
    throw std::invalid_argument("upgrade expects a single-view model");
  }
  if (target == model::Conditioning::single_view) {
    throw std::invalid_argument("upgrade target must be a multi-view conditioning");
  }
  Model out(single.config(), target);
  for (auto& [name, t] : out.params()) {
    const std::string group = model::parameter_group(name);
    std::string source = name;
    if (group == "ca_a") {
      source.replace(source.find(".ca_a."), 6, ".ca_p.");
    } else if (group == "router") {
      if (name.ends_with("w_agg")) {
        t.fill(1.0 / static_cast<double>(single.config().heads));
        continue;
      }
      source.replace(source.find(".router."), 8, ".ca_p.");
    }
    const Tensor& from = single.param(source);
    if (from.shape() != t.shape()) throw ShapeError("upgrade: shape mismatch for " + name);
    t = from;
  }
  return out;
}

double cosine_lr(const TrainConfig& cfg, std::size_t step) {
  const double frac = cfg.steps <= 1 ? 0.0 : static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamW::AdamW(const NamedTensors& params) : m_(model::zeros_like(params)), v_(model::zeros_like(params)) {}

void AdamW::step(NamedTensors& params, const NamedTensors& grads, double lr, const TrainConfig& cfg,
                 const std::vector<std::string>& frozen) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (std::find(frozen.begin(), frozen.end(), model::parameter_group(name)) != frozen.end()) continue;
    const Tensor& g = grads.at(name);
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    const bool decay = p.rank() >= 2 && !model::is_position(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      if (decay) p[i] -= lr * cfg.weight_decay * p[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
    }
  }
}

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ROAR_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, n);
}

BatchGradient batch_gradient(const Model& m, const std::vector<TrainingSample>& samples, const std::vector<double>& ts,
                             const std::vector<Tensor>& noises, const std::vector<std::optional<RandomStream>>& gumbel,
                             std::size_t threads) {
  const std::size_t B = samples.size();
  std::vector<NamedTensors> per(B);
  std::vector<double> losses(B, 0.0), entropies(B, 0.0);
  std::vector<std::exception_ptr> errors(B);
  auto work = [&](std::size_t b) {
    try {
      per[b] = model::zeros_like(m.params());
      Tape tape;
      ParamBinder bind(tape, m.params(), &per[b]);
      model::ForwardOptions opt;
      std::vector<router::RoutingDecision> decisions;
      if (m.has_router()) {
        opt.mode = router::RouteMode::train;
        opt.gumbel = gumbel[b];
        opt.decisions = &decisions;
      }
      Var loss = flow_matching_loss(m, bind, samples[b], ts[b], noises[b], opt);
      losses[b] = loss.value().item();
      tape.backward(loss);
      for (const auto& d : decisions) entropies[b] += d.mean_entropy() / static_cast<double>(decisions.size());
      apply_freeze(per[b], samples[b]);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(resolve_threads(threads), B);
  if (workers <= 1) {
    for (std::size_t b = 0; b < B; ++b) work(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < B; b += workers) work(b);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchGradient out;
  out.grads = model::zeros_like(m.params());
  const double inv = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (auto& [name, g] : out.grads) {
      const Tensor& src = per[b].at(name);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i] * inv;
    }
    out.loss += losses[b] * inv;
    out.entropy += entropies[b] * inv;
    if (samples[b].perturbed) ++out.perturbed;
  }
  return out;
}

DrawnSample draw_sample(const TrainConfig& cfg, const Dataset& data, Phase phase, const model::ModelConfig& mcfg,
                        const world::EncoderConfig& enc, std::size_t step, std::size_t b) {
  const RandomStream r = RandomStream(cfg.seed, "data").derive(step).derive(b);
  const DatasetItem& item = data[r.below(0, data.size())];
  std::vector<world::Camera> cams = world::sample_views(r.bits(1), 1, {0});
  if (phase == Phase::multi_view) {
    const std::size_t k = cfg.aux_min + r.below(2, cfg.aux_max - cfg.aux_min + 1);
    if (k > 0) {
      const auto aux = world::sample_views(r.bits(3), k, {0, 1, 2, 3});
      cams.insert(cams.end(), aux.begin(), aux.end());
    }
  }
  DrawnSample out;
  out.sample = make_sample(item, cams, true, enc);
  if (phase == Phase::multi_view && r.uniform(4) < cfg.p_pert) {
    Perturbation p = build_perturbed_sample(out.sample, r.derive(5), mcfg);
    out.attempted = true;
    out.sample = std::move(p.sample);
    out.skipped = p.skipped;
  }
  return out;
}

namespace {

double global_norm(const NamedTensors& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TrainResult train(Model& m, const TrainConfig& cfg, const Dataset& data, Phase phase,
                  const std::function<void(const LogRow&)>& on_log) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training needs a nonempty dataset");
  if (phase == Phase::single_view && m.conditioning() != model::Conditioning::single_view) {
    throw std::invalid_argument("single-view phase expects a single-view model");
  }
  const model::ModelConfig& mcfg = m.config();
  const world::EncoderConfig enc = encoder_for(mcfg);
  AdamW opt(m.params());
  TrainResult result;
  const std::size_t N = mcfg.tokens(), C = mcfg.channels;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<TrainingSample> samples;
    std::vector<double> ts;
    std::vector<Tensor> noises;
    std::vector<std::optional<RandomStream>> gumbel;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      DrawnSample d = draw_sample(cfg, data, phase, mcfg, enc, step, b);
      if (d.skipped) ++result.skips;
      samples.push_back(std::move(d.sample));
      const RandomStream nr = RandomStream(cfg.seed, "noise").derive(step).derive(b);
      ts.push_back(nr.uniform(0));
      Tensor noise({N, C});
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = nr.derive(1).normal(i);
      noises.push_back(std::move(noise));
      gumbel.emplace_back(RandomStream(cfg.seed, "gumbel").derive(step).derive(b));
    }
    BatchGradient bg;
    try {
      bg = batch_gradient(m, samples, ts, noises, gumbel, cfg.threads);
    } catch (const std::domain_error& e) {
      throw DivergenceError(step, fmt::format("diverged at step {}: {}", step, e.what()));
    }
    const double norm = global_norm(bg.grads);
    if (!std::isfinite(bg.loss) || !std::isfinite(norm)) {
      throw DivergenceError(step, fmt::format("diverged at step {}: non-finite loss or gradient", step));
    }
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
      const double s = cfg.grad_clip / norm;
      for (auto& [name, g] : bg.grads)
        for (double& v : g.data()) v *= s;
    }
    std::vector<std::string> frozen;
    if (bg.perturbed == cfg.batch) frozen.push_back("ca_p");
    const double lr = cosine_lr(cfg, step);
    opt.step(m.params(), bg.grads, lr, cfg, frozen);

    result.samples += cfg.batch;
    result.perturbed += bg.perturbed;
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      LogRow row{step, bg.loss, lr, static_cast<double>(result.perturbed) / static_cast<double>(result.samples),
                 result.skips, bg.entropy};
      result.log.push_back(row);
      if (on_log) on_log(row);
    }
  }
  return result;
}

std::string log_csv(const std::vector<LogRow>& rows) {
  std::string out = "step,loss,lr,pert_fraction,pert_skips,routing_entropy_mean\n";
  for (const LogRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.step, r.loss, r.lr, r.pert_fraction, r.pert_skips,
                       r.routing_entropy_mean);
  }
  return out;
}

}  // namespace roar::trainer
