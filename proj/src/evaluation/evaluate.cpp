#include "roar/evaluation/evaluate.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>
#include <thread>

namespace roar::evaluation {

std::vector<world::Camera> evaluation_cameras(std::uint64_t seed, std::size_t shape_index, std::size_t count) {
  static constexpr int kAuxBins[] = {2, 1, 3, 0};
  const RandomStream stream = RandomStream(seed, "eval-views").derive(shape_index);
  std::vector<world::Camera> cams;
  for (std::size_t j = 0; j < count; ++j) {
    const int bin = j == 0 ? 0 : kAuxBins[(j - 1) % 4];
    cams.push_back(world::sample_views(stream.bits(j), 1, {bin}).front());
  }
  return cams;
}

model::LatentTokens sample_latent(const model::Model& m, const world::ViewFeatureSet& views, std::uint64_t noise_seed,
                                  std::size_t steps, RoutingTrace* trace) {
  if (steps == 0) throw std::invalid_argument("sampler needs at least one step");
  const model::ModelConfig& c = m.config();
  const RandomStream noise(noise_seed, "sample-noise");
  Tensor z({c.tokens(), c.channels});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = noise.normal(i);
  if (trace) *trace = RoutingTrace(steps, c.blocks, c.tokens(), views.views());
  std::vector<router::RoutingDecision> decisions;
  model::ForwardOptions opt;
  opt.decisions = &decisions;
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = 1.0 - static_cast<double>(k) * dt;
    const Tensor v = m.predict(z, t, views, opt);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= dt * v[i];
    if (trace) {
      for (std::size_t l = 0; l < c.blocks; ++l) {
        for (std::size_t i = 0; i < c.tokens(); ++i) {
          // Non-routed models always attend to the primary view.
          trace->at(k, l, i) = decisions.empty() ? static_cast<std::uint16_t>(views.primary_index.value_or(0))
                                                 : static_cast<std::uint16_t>(decisions[l].hard_index[i]);
        }
      }
    }
  }
  return {z, 0.0};
}

EvalTable evaluate(const model::Model& m, const trainer::Dataset& shapes, const std::vector<std::size_t>& view_counts,
                   const EvalOptions& options) {
  if (shapes.empty()) throw std::invalid_argument("evaluation needs at least one shape");
  if (view_counts.empty()) throw std::invalid_argument("evaluation needs at least one view count");
  const world::EncoderConfig enc = trainer::encoder_for(m.config());
  const std::size_t S = shapes.size(), K = view_counts.size();
  std::vector<EvalRow> rows(S * K);
  std::vector<RoutingTrace> traces(options.traces ? S * K : 0);
  std::vector<std::exception_ptr> errors(S);

  auto work = [&](std::size_t s) {
    try {
      const trainer::DatasetItem& item = shapes[s];
      std::size_t max_views = 0;
      for (std::size_t k : view_counts) max_views = std::max(max_views, k);
      const auto cams = evaluation_cameras(options.seed, s, max_views);
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t k = view_counts[j];
        if (k == 0) throw std::invalid_argument("view count must be positive");
        const std::vector<world::Camera> sub(cams.begin(), cams.begin() + static_cast<std::ptrdiff_t>(k));
        const trainer::TrainingSample sample = trainer::make_sample(item, sub, true, enc);
        const std::uint64_t noise_seed = mix64(options.seed ^ mix64(s));
        const model::LatentTokens z =
            sample_latent(m, sample.views, noise_seed, options.steps, options.traces ? &traces[s * K + j] : nullptr);
        const world::PointCloud pred = model::latent_decode(z, m.config());
        EvalRow& row = rows[s * K + j];
        row.shape_id = item.id.str();
        row.view_count = k;
        if (pred.empty()) {
          row.empty_decode = true;
          row.metrics = {kEmptyDecodeCd, 0.0, 0.0};
        } else {
          row.metrics = geometry_metrics(pred, item.cloud);
        }
      }
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(trainer::resolve_threads(options.threads), S);
  if (workers <= 1) {
    for (std::size_t s = 0; s < S; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < S; s += workers) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  EvalTable table;
  table.rows = std::move(rows);
  for (std::size_t j = 0; j < K; ++j) {
    EvalSummary sum;
    sum.view_count = view_counts[j];
    sum.shapes = S;
    std::vector<double> cds;
    for (std::size_t s = 0; s < S; ++s) {
      const EvalRow& r = table.rows[s * K + j];
      cds.push_back(r.metrics.cd);
      sum.cd_mean += r.metrics.cd / static_cast<double>(S);
      sum.f1_0_1_mean += r.metrics.f1_at_0_1 / static_cast<double>(S);
      sum.f1_0_05_mean += r.metrics.f1_at_0_05 / static_cast<double>(S);
      if (r.empty_decode) ++sum.empty_decodes;
    }
    double var = 0.0;
    for (double x : cds) var += (x - sum.cd_mean) * (x - sum.cd_mean);
    sum.cd_stderr = S > 1 ? std::sqrt(var / static_cast<double>(S - 1) / static_cast<double>(S)) : 0.0;
    table.summary.push_back(sum);
  }
  if (options.traces) *options.traces = std::move(traces);
  return table;
}

std::string metrics_csv(const EvalTable& table) {
  std::string out = "shape_id,view_count,cd_x1000,f1_0_1,f1_0_05\n";
  for (const EvalRow& r : table.rows) {
    out += fmt::format("{},{},{},{},{}\n", r.shape_id, r.view_count, r.metrics.cd_x1000(), r.metrics.f1_at_0_1,
                       r.metrics.f1_at_0_05);
  }
  return out;
}

std::string summary_csv(const EvalTable& table) {
  std::string out = "view_count,shapes,cd_x1000_mean,cd_x1000_stderr,f1_0_1_mean,f1_0_05_mean,empty_decodes\n";
  for (const EvalSummary& s : table.summary) {
    out += fmt::format("{},{},{},{},{},{},{}\n", s.view_count, s.shapes, s.cd_mean * 1e3, s.cd_stderr * 1e3,
                       s.f1_0_1_mean, s.f1_0_05_mean, s.empty_decodes);
  }
  return out;
}

}  // namespace roar::evaluation
