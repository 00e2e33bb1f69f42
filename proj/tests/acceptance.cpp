// Acceptance gate: one PASS/FAIL line per criterion. Criteria 5 and 6 train
// real models through the command-line pipeline; their budget comes from
// ROAR_ACCEPT_STEPS / ROAR_ACCEPT_BATCH / ROAR_ACCEPT_SEEDS when set.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "model_support.hpp"
#include "oracles.hpp"
#include "roar/cli/commands.hpp"
#include "roar/evaluation/consistency.hpp"
#include "roar/evaluation/metrics.hpp"
#include "roar/numerics/grad_check.hpp"
#include "roar/trainer/trainer.hpp"

using namespace roar;
using model::Conditioning;
using model::Model;
using model::ModelConfig;
using roar::testing::random_tensor;
using roar::testing::random_views;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t env_size(const char* name, std::size_t fallback) {
  const char* v = std::getenv(name);
  return v && *v ? static_cast<std::size_t>(std::stoull(v)) : fallback;
}

// Runs one command with its progress output discarded; errors still reach stderr.
int invoke(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"roar"};
  for (const auto& s : args) argv.push_back(s.c_str());
  std::ostringstream sink;
  std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(saved);
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("roar_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1. Straight-through gradients of the flow-matching loss against central
// differences of the frozen-routing surrogate.
Outcome gradients() {
  const auto start = Clock::now();
  const ModelConfig c = ModelConfig::micro();
  double worst = 0.0, worst_match = 0.0;
  std::set<std::string> groups;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Model m(c, Conditioning::routed_dual);
    m.randomize(1000 + seed);
    trainer::TrainingSample s;
    s.latent_clean.tokens = random_tensor({c.tokens(), c.channels}, 2000 + seed);
    s.views = random_views(c, 3, 3000 + seed);
    const Tensor noise = random_tensor({c.tokens(), c.channels}, 4000 + seed);
    const double t = 0.05 + 0.9 * static_cast<double>(seed) / 19.0;

    model::ForwardOptions opt;
    opt.mode = router::RouteMode::train;
    opt.gumbel = RandomStream(seed, "gumbel");
    std::vector<router::RoutingDecision> decisions;
    opt.decisions = &decisions;
    NamedTensors grads = model::zeros_like(m.params());
    {
      Tape tape;
      model::ParamBinder bind(tape, m.params(), &grads);
      tape.backward(trainer::flow_matching_loss(m, bind, s, t, noise, opt));
    }
    std::vector<router::FrozenRouting> frozen;
    for (const auto& d : decisions) frozen.push_back({d.hard_index, d.y_soft});
    opt.decisions = nullptr;
    opt.frozen = &frozen;

    std::vector<std::string> names;
    std::vector<Tensor> theta;
    for (const auto& [n, p] : m.params()) {
      names.push_back(n);
      theta.push_back(p);
      groups.insert(model::parameter_group(n));
    }
    const GradCheckReport rep = grad_check(
        [&](Tape& tape, std::span<const Var> th) {
          model::ParamBinder bind(tape, m.params());
          for (std::size_t i = 0; i < names.size(); ++i) bind.bind(names[i], th[i]);
          return trainer::flow_matching_loss(m, bind, s, t, noise, opt);
        },
        theta, 1e-5);
    worst = std::max(worst, rep.worst());
    for (std::size_t i = 0; i < names.size(); ++i)
      worst_match = std::max(worst_match, max_abs_diff(rep.analytic[i], grads.at(names[i])));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && worst_match <= 1e-12 && secs < 60.0,
          fmt::format("20 seeds, {} parameter groups, worst rel err {:.2e}, {:.1f} s", groups.size(), worst, secs)};
}

// 2. One view: multi-view forward equals the single-stream model.
Outcome single_view_reduction() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ModelConfig c = seed % 2 ? ModelConfig::micro() : ModelConfig::desk();
    Model single(c, Conditioning::single_view);
    Model multi(c, Conditioning::routed_dual);
    if (seed % 5 == 4) {
      single.randomize(seed);
      multi = trainer::upgrade_from_single(single);
      multi.randomize(seed + 7);  // then move away from the copy
      testing::copy_shared(multi, single);
      const Model upgraded = trainer::upgrade_from_single(single);
      const auto views = random_views(c, 1, 500 + seed);
      const Tensor z = random_tensor({c.tokens(), c.channels}, 600 + seed, -2, 2);
      worst = std::max(worst, max_abs_diff(upgraded.predict(z, 0.5, views), single.predict(z, 0.5, views)));
    } else {
      multi.randomize(seed);
      testing::copy_shared(multi, single);
    }
    const Tensor z = random_tensor({c.tokens(), c.channels}, 100 + seed, -2, 2);
    const auto views = random_views(c, 1, 200 + seed);
    const double t = static_cast<double>(seed) / 49.0;
    worst = std::max(worst, max_abs_diff(multi.predict(z, t, views), single.predict(z, t, views)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs < 10.0, fmt::format("50 draws, max abs diff {:.2e}, {:.2f} s", worst, secs)};
}

// 3. Upgrade then forced-primary routing is bit-exact against the checkpoint.
Outcome upgrade_identity() {
  const fs::path dir = scratch("upgrade");
  Model single(ModelConfig::desk(), Conditioning::single_view);
  single.randomize(17);
  single.save(dir / "single.ckpt");
  const Model loaded = Model::load(dir / "single.ckpt");
  const Model up = trainer::upgrade_from_single(loaded);
  const ModelConfig& c = loaded.config();
  std::size_t exact = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor z = random_tensor({c.tokens(), c.channels}, seed, -2, 2);
    const auto views = random_views(c, 1 + seed % 5, seed + 50);
    model::ForwardOptions forced;
    forced.force_primary = true;
    const double t = 0.1 * static_cast<double>(seed);
    exact += up.predict(z, t, views, forced) == single.predict(z, t, views);
  }
  fs::remove_all(dir);
  return {exact == 10, fmt::format("{}/10 inputs bit-identical", exact)};
}

// 4. Attended keys per token stay at S whatever the view count.
Outcome cost_contract() {
  const ModelConfig c = ModelConfig::desk();
  Model single(c, Conditioning::single_view);
  single.randomize(3);
  Model routed(c, Conditioning::routed_dual);
  routed.randomize(4);
  ops::AttentionProbe base;
  model::ForwardOptions base_opt;
  base_opt.probe = &base;
  single.predict(random_tensor({c.tokens(), c.channels}, 1), 0.5, random_views(c, 1, 2), base_opt);
  bool ok = base.min_keys == c.patches && base.max_keys == c.patches;
  std::string counts;
  for (std::size_t V : {1u, 2u, 4u, 8u, 12u}) {
    ops::AttentionProbe probe;
    model::ForwardOptions opt;
    opt.probe = &probe;
    routed.predict(random_tensor({c.tokens(), c.channels}, V), 0.5, random_views(c, V, V + 1), opt);
    ok = ok && probe.min_keys == c.patches && probe.max_keys == c.patches && probe.queries == base.queries &&
         probe.total_keys == base.total_keys;
    counts += fmt::format(" V={}:{}", V, probe.max_keys);
  }
  return {ok, fmt::format("S={}, keys per token{}", c.patches, counts)};
}

// 7. Perturbation sampler over 1e5 perturbed samples.
Outcome perturbation_sampler() {
  ModelConfig c = ModelConfig::micro();
  c.patches = 16;
  c.feature_dim = 8;
  std::vector<world::ShapeId> ids;
  for (std::uint64_t i = 0; i < 8; ++i) ids.push_back({i, world::kAllShapeClasses[i % 4]});
  const trainer::Dataset data = trainer::make_dataset(ids, c, 256);
  trainer::TrainConfig cfg;
  cfg.p_pert = 0.2;
  const auto enc = trainer::encoder_for(c);
  std::size_t draws = 0, attempted = 0, perturbed = 0, skipped = 0, violations = 0;
  while (perturbed < 100000) {
    const trainer::DrawnSample d = trainer::draw_sample(cfg, data, trainer::Phase::multi_view, c, enc, draws / 16, draws % 16);
    ++draws;
    attempted += d.attempted;
    skipped += d.skipped;
    if (!d.sample.perturbed) continue;
    ++perturbed;
    const int tag = world::azimuth_bin(d.sample.latent_clean.azimuth_tag);
    for (const auto& cam : d.sample.views.cameras) violations += cam.bin == tag;
  }
  const double fraction = static_cast<double>(attempted) / static_cast<double>(draws);
  const double excl = static_cast<double>(perturbed) / static_cast<double>(draws - skipped);

  // Every bin occupied: always a skip, never a perturbed sample.
  std::vector<world::Camera> all;
  for (int b = 0; b < 4; ++b) all.push_back(world::Camera::at(90.0 * b + 5.0, 0.0));
  const trainer::TrainingSample full = trainer::make_sample(data[0], all, true, enc);
  std::size_t degenerate_skips = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const trainer::Perturbation p = trainer::build_perturbed_sample(full, RandomStream(i, "degenerate"), c);
    degenerate_skips += p.skipped && !p.sample.perturbed;
  }
  const bool ok = violations == 0 && std::abs(fraction - 0.2) <= 0.01 && degenerate_skips == 1000;
  return {ok, fmt::format("{} perturbed of {} draws, {} violations, drawn fraction {:.4f}, perturbed excluding "
                          "skips {:.4f}, {} skips, degenerate skips {}/1000",
                          perturbed, draws, violations, fraction, excl, skipped, degenerate_skips)};
}

// 8. A run where every sample is perturbed never touches CA_p.
Outcome freeze() {
  const auto start = Clock::now();
  const ModelConfig c = ModelConfig::micro();
  std::vector<world::ShapeId> ids;
  for (std::uint64_t i = 0; i < 8; ++i) ids.push_back({i, world::kAllShapeClasses[i % 4]});
  const trainer::Dataset data = trainer::make_dataset(ids, c, 256);
  Model single = Model::initial(c, Conditioning::single_view, 5);
  single.randomize(5);
  Model m = trainer::upgrade_from_single(single);
  const NamedTensors before = m.params();
  trainer::TrainConfig cfg;
  cfg.steps = 500;
  cfg.batch = 4;
  cfg.p_pert = 1.0;
  cfg.aux_max = 2;  // at most three occupied bins, so no sample can be skipped
  cfg.seed = 8;
  const trainer::TrainResult r = trainer::train(m, cfg, data, trainer::Phase::multi_view);
  std::size_t ca_p = 0, ca_p_same = 0, ca_a_moved = 0;
  for (const auto& [name, t] : m.params()) {
    const std::string g = model::parameter_group(name);
    if (g == "ca_p") {
      ++ca_p;
      ca_p_same += t == before.at(name);
    } else if (g == "ca_a") {
      ca_a_moved += !(t == before.at(name));
    }
  }
  const bool ok = r.perturbed == r.samples && ca_p_same == ca_p && ca_a_moved > 0;
  return {ok, fmt::format("500 steps, {}/{} samples perturbed, {}/{} CA_p tensors bit-identical, {} CA_a tensors "
                          "updated, {:.1f} s",
                          r.perturbed, r.samples, ca_p_same, ca_p, ca_a_moved, seconds_since(start))};
}

// 9. Geometry and consistency metrics against brute force.
Outcome metric_oracles() {
  std::size_t geo_ok = 0, cons_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto cloud = [](std::size_t n, std::uint64_t s) {
      RandomSequence rng(RandomStream(s, "oracle-cloud"));
      world::PointCloud pc;
      for (std::size_t i = 0; i < n; ++i) pc.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      return pc;
    };
    const auto a = cloud(1 + (seed * 131) % 500, seed);
    const auto b = cloud(1 + (seed * 71) % 500, seed + 500);
    bool ok = evaluation::chamfer_distance(a, b) == testing::brute_chamfer(a, b);
    for (double th : {0.05, 0.1}) ok = ok && evaluation::f_score(a, b, th) == testing::brute_f_score(a, b, th);
    geo_ok += ok;
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto tr = testing::random_trace(2 + seed % 5, 2 + seed % 4, 1 + seed % 6, 2 + seed % 3, seed + 77);
    cons_ok += evaluation::cross_block_consistency(tr) == testing::brute_cross_block(tr) &&
               evaluation::cross_timestep_consistency(tr) == testing::brute_cross_timestep(tr) &&
               evaluation::global_consistency(tr) == testing::brute_global(tr);
  }
  return {geo_ok == 100 && cons_ok == 50,
          fmt::format("{}/100 cloud pairs exact, {}/50 traces exact", geo_ok, cons_ok)};
}

// 10. sample and eval twice with the same config and seed.
Outcome determinism() {
  const fs::path dir = scratch("determinism");
  std::ofstream(dir / "micro.ini") << "[data]\ntrain_shapes = 6\nval_shapes = 0\ntest_shapes = 4\npoints = 512\n"
                                      "[model]\nblocks = 2\ngrid = 2\ndim = 8\nheads = 2\nhead_dim = 4\npatches = 4\n"
                                      "feature_dim = 6\nmlp_hidden = 12\ntime_freqs = 4\n"
                                      "[train]\nbatch = 2\nsteps_single = 10\nsteps_multi = 10\n"
                                      "[eval]\nview_counts = 1,2,4\nsampler_steps = 8\n";
  const std::string ini = (dir / "micro.ini").string();
  auto d = [&](const char* n) { return (dir / n).string(); };
  bool ok = invoke({"gen-data", "--config", ini, "--out", d("data")}) == 0 &&
            invoke({"train-single", "--config", ini, "--data", d("data"), "--out", d("single")}) == 0 &&
            invoke({"upgrade", "--config", ini, "--checkpoint", d("single") + "/model.ckpt", "--out", d("up")}) == 0 &&
            invoke({"train-mv", "--config", ini, "--data", d("data"), "--checkpoint", d("up") + "/model.ckpt", "--out",
                    d("mv")}) == 0;
  const std::string ckpt = d("mv") + "/model.ckpt";
  std::size_t files = 0, identical = 0;
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    ok = ok &&
         invoke({"sample", "--config", ini, "--seed", "3", "--checkpoint", ckpt, "--shape", "stepped-pyramid-11",
                 "--views", "4", "--trace", "--out", d(("sample_" + r).c_str())}) == 0 &&
         invoke({"eval", "--config", ini, "--seed", "3", "--checkpoint", ckpt, "--data", d("data"), "--out",
                 d(("eval_" + r).c_str())}) == 0;
  }
  for (const auto& [sub, names] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"sample_", {"points.txt", "trace.rtrc", "trace.rtrc.json", "config.ini", "provenance.json"}},
           {"eval_", {"metrics.csv", "summary.csv", "consistency.json", "config.ini", "provenance.json"}}}) {
    for (const auto& n : names) {
      ++files;
      const fs::path a = dir / (sub + "a") / n, b = dir / (sub + "b") / n;
      identical += fs::exists(a) && slurp(a) == slurp(b);
    }
  }
  fs::remove_all(dir);
  return {ok && identical == files, fmt::format("{}/{} output files byte-identical across two runs", identical, files)};
}

// Criteria 5 and 6 share one training campaign per seed: single-view phase,
// upgrade, then the routed model and the concatenation baseline fine-tuned
// from the same backbone with the same budget.
struct Campaign {
  bool ran = false;
  bool ok = true;
  std::string error;
  std::size_t steps = 0, batch = 0, seeds = 0;
  double minutes = 0.0;
  std::map<std::size_t, std::vector<double>> full_cd;  // view count -> per (seed, shape) CD x1000
  std::map<std::size_t, std::vector<double>> concat_cd;
  std::vector<double> single_loss_ratio;  // last 10% / first 10% of the single-view loss
};

std::map<std::size_t, std::vector<double>> read_cd(const fs::path& metrics) {
  std::map<std::size_t, std::vector<double>> out;
  std::ifstream in(metrics);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string id, k, cd;
    std::getline(ss, id, ',');
    std::getline(ss, k, ',');
    std::getline(ss, cd, ',');
    out[std::stoul(k)].push_back(std::stod(cd));
  }
  return out;
}

double loss_ratio(const fs::path& log) {
  std::vector<double> loss;
  std::ifstream in(log);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    loss.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  const std::size_t tenth = std::max<std::size_t>(1, loss.size() / 10);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < tenth; ++i) {
    first += loss[i];
    last += loss[loss.size() - 1 - i];
  }
  return last / first;
}

Campaign& campaign() {
  static Campaign c;
  if (c.ran) return c;
  c.ran = true;
  c.steps = env_size("ROAR_ACCEPT_STEPS", 2000);
  c.batch = env_size("ROAR_ACCEPT_BATCH", 8);
  c.seeds = env_size("ROAR_ACCEPT_SEEDS", 3);
  const auto start = Clock::now();
  const fs::path dir = scratch("training");
  std::ofstream(dir / "run.ini") << fmt::format(
      "[train]\nsteps_single = {}\nsteps_multi = {}\nbatch = {}\nlog_every = 1\n[eval]\nview_counts = 1,2,4\n",
      c.steps, c.steps, c.batch);
  const std::string ini = (dir / "run.ini").string();
  auto d = [&](const std::string& n) { return (dir / n).string(); };
  if (invoke({"gen-data", "--config", ini, "--seed", "0", "--out", d("data")}) != 0) {
    c.ok = false;
    c.error = "gen-data failed";
    return c;
  }
  for (std::size_t s = 1; s <= c.seeds; ++s) {
    const std::string seed = std::to_string(s), tag = "s" + seed + "_";
    const bool ok =
        invoke({"train-single", "--config", ini, "--seed", seed, "--data", d("data"), "--out", d(tag + "single")}) == 0 &&
        invoke({"upgrade", "--config", ini, "--seed", seed, "--checkpoint", d(tag + "single") + "/model.ckpt", "--out",
                d(tag + "up")}) == 0 &&
        invoke({"train-mv", "--config", ini, "--seed", seed, "--data", d("data"), "--checkpoint",
                d(tag + "up") + "/model.ckpt", "--out", d(tag + "full")}) == 0 &&
        invoke({"eval", "--config", ini, "--seed", seed, "--checkpoint", d(tag + "full") + "/model.ckpt", "--data",
                d("data"), "--out", d(tag + "full_eval")}) == 0 &&
        invoke({"upgrade", "--config", ini, "--seed", seed, "--set", "train.mv_conditioning=concat", "--checkpoint",
                d(tag + "single") + "/model.ckpt", "--out", d(tag + "up_concat")}) == 0 &&
        invoke({"train-mv", "--config", ini, "--seed", seed, "--p-pert", "0", "--set", "train.mv_conditioning=concat",
                "--data", d("data"), "--checkpoint", d(tag + "up_concat") + "/model.ckpt", "--out",
                d(tag + "concat")}) == 0 &&
        invoke({"eval", "--config", ini, "--seed", seed, "--checkpoint", d(tag + "concat") + "/model.ckpt", "--data",
                d("data"), "--out", d(tag + "concat_eval")}) == 0;
    if (!ok) {
      c.ok = false;
      c.error = "pipeline failed for seed " + seed;
      return c;
    }
    for (auto& [k, v] : read_cd(dir / (tag + "full_eval") / "metrics.csv"))
      c.full_cd[k].insert(c.full_cd[k].end(), v.begin(), v.end());
    for (auto& [k, v] : read_cd(dir / (tag + "concat_eval") / "metrics.csv"))
      c.concat_cd[k].insert(c.concat_cd[k].end(), v.begin(), v.end());
    c.single_loss_ratio.push_back(loss_ratio(dir / (tag + "single") / "log.csv"));
    std::cerr << fmt::format("[acceptance] seed {} done after {:.1f} min\n", s, seconds_since(start) / 60.0);
  }
  c.minutes = seconds_since(start) / 60.0;
  return c;
}

std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

// 5. Held-out CD falls with more views.
Outcome view_scaling() {
  Campaign& c = campaign();
  if (!c.ok) return {false, c.error};
  const auto [m1, e1] = mean_stderr(c.full_cd.at(1));
  const auto [m2, e2] = mean_stderr(c.full_cd.at(2));
  const auto [m4, e4] = mean_stderr(c.full_cd.at(4));
  const bool gain = m4 <= 0.95 * m1;
  const bool monotone = m2 <= m1 + std::max(e1, e2) && m4 <= m2 + std::max(e2, e4);
  double ratio = 0;
  for (double r : c.single_loss_ratio) ratio += r / static_cast<double>(c.single_loss_ratio.size());
  return {gain && monotone,
          fmt::format("CD x1000 k=1 {:.1f}+-{:.1f}, k=2 {:.1f}+-{:.1f}, k=4 {:.1f}+-{:.1f}; k=4 vs k=1 {:+.1f}% "
                      "(need <= -5%); {} seeds x {} shapes, {} steps x batch {} per phase, {:.0f} min; single-view "
                      "loss last/first tenth {:.3f}",
                      m1, e1, m2, e2, m4, e4, 100.0 * (m4 / m1 - 1.0), c.seeds, c.full_cd.at(1).size() / c.seeds,
                      c.steps, c.batch, c.minutes, ratio)};
}

// 6. Routed model against naive concatenation under the same budget.
Outcome ablation() {
  Campaign& c = campaign();
  if (!c.ok) return {false, c.error};
  std::vector<double> full, concat;
  for (const auto& [k, v] : c.full_cd) full.insert(full.end(), v.begin(), v.end());
  for (const auto& [k, v] : c.concat_cd) concat.insert(concat.end(), v.begin(), v.end());
  const double f = mean_stderr(full).first, n = mean_stderr(concat).first;
  std::string per_k;
  for (const auto& [k, v] : c.full_cd)
    per_k += fmt::format(" k={} {:.1f}/{:.1f}", k, mean_stderr(v).first, mean_stderr(c.concat_cd.at(k)).first);
  return {f <= n, fmt::format("mean CD x1000 full {:.1f} vs concat {:.1f} over view counts 1,2,4;{}", f, n, per_k)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradients}, {2, single_view_reduction}, {3, upgrade_identity}, {4, cost_contract},
      {5, view_scaling}, {6, ablation}, {7, perturbation_sampler}, {8, freeze},
      {9, metric_oracles}, {10, determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("criterion {:>2}: {}  {}", id, o.pass ? "PASS" : "FAIL", o.detail) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
