#include "roar/cli/commands.hpp"

#include <fmt/format.h>

#include "CLI11.hpp"
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "roar/evaluation/consistency.hpp"
#include "roar/evaluation/evaluate.hpp"
#include "roar/model/codec.hpp"
#include "roar/numerics/checkpoint.hpp"
#include "roar/world/shapes.hpp"

namespace roar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.jsonl";
constexpr const char* kModelFile = "model.ckpt";
constexpr std::size_t kMaxViews = 64;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// The output directory receives the resolved config and its hash.
void prepare_out(const fs::path& out, const RunConfig& cfg, const std::string& command, const json& inputs) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
  write_text(out / "config.ini", cfg.to_ini());
  json prov;
  prov["command"] = command;
  prov["config_hash"] = cfg.hash();
  prov["inputs"] = inputs;
  write_text(out / "provenance.json", prov.dump(2) + "\n");
}

std::string checkpoint_provenance(const RunConfig& cfg, const std::string& command) {
  json p;
  p["command"] = command;
  p["config_hash"] = cfg.hash();
  p["seed"] = cfg.seed;
  p["created_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
  return p.dump();
}

model::Model load_checkpoint(const fs::path& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  if (!fs::exists(path)) throw MissingInput("checkpoint not found: " + path.string());
  try {
    return model::Model::load(path);
  } catch (const CheckpointError& e) {
    throw MissingInput(e.what());
  }
}

std::vector<std::size_t> parse_views(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t k = 0;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1 || static_cast<std::size_t>(v) > kMaxViews) throw std::invalid_argument("");
      k = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("invalid view count '{}': expected integers in 1..{}", text, kMaxViews));
    }
    out.push_back(k);
  }
  if (out.empty()) throw ConfigError("empty view count");
  return out;
}

void train_phase(model::Model& m, const RunConfig& cfg, const Flags& flags, trainer::Phase phase, std::size_t steps,
                 const std::string& command, std::ostream& log) {
  const trainer::Dataset data = load_split(flags.data, "train", m.config());
  trainer::TrainConfig tc = cfg.train;
  tc.steps = steps;
  json inputs;
  inputs["data"] = flags.data.string();
  if (!flags.checkpoint.empty()) inputs["checkpoint"] = flags.checkpoint.string();
  prepare_out(flags.out, cfg, command, inputs);
  std::vector<trainer::LogRow> rows;
  auto on_log = [&](const trainer::LogRow& r) {
    rows.push_back(r);
    log << fmt::format("step {} loss {:.6f} lr {:.3g}\n", r.step, r.loss, r.lr);
  };
  try {
    trainer::train(m, tc, data, phase, on_log);
  } catch (const trainer::DivergenceError&) {
    write_text(flags.out / "log.csv", trainer::log_csv(rows));
    m.save(flags.out / kModelFile, checkpoint_provenance(cfg, command));
    throw;
  }
  write_text(flags.out / "log.csv", trainer::log_csv(rows));
  m.save(flags.out / kModelFile, checkpoint_provenance(cfg, command));
}

}  // namespace

RunConfig config_from_flags(const Flags& flags) {
  std::map<std::string, std::string> overrides;
  for (const std::string& kv : flags.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (flags.seed) overrides["run.seed"] = std::to_string(*flags.seed);
  if (flags.p_pert) overrides["train.p_pert"] = fmt::format("{}", *flags.p_pert);
  if (flags.classes) overrides["data.classes"] = *flags.classes;
  if (flags.config && !fs::exists(*flags.config)) throw ConfigError("config file not found: " + flags.config->string());
  return resolve_config(flags.config ? &*flags.config : nullptr, overrides);
}

void gen_data(const Flags& flags, std::ostream& log) {
  const RunConfig cfg = config_from_flags(flags);
  if (flags.out.empty()) throw ConfigError("--out is required");
  if (fs::exists(flags.out) && !flags.force) {
    throw ConfigError(flags.out.string() + " exists; pass --force to overwrite");
  }
  if (flags.force) {
    fs::remove(flags.out / kManifest);
    fs::remove_all(flags.out / "shapes");
  }
  prepare_out(flags.out, cfg, "gen-data", json::object());
  fs::create_directories(flags.out / "shapes");

  const RandomStream stream(cfg.seed, "dataset");
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", cfg.train_shapes}, {"val", cfg.val_shapes}, {"test", cfg.test_shapes}};
  std::string manifest;
  std::size_t index = 0;
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i, ++index) {
      // 40-bit seeds keep ids short while collisions stay negligible.
      const world::ShapeId id{stream.bits(index) >> 24, cfg.classes[index % cfg.classes.size()]};
      const world::PointCloud pc = world::generate_shape(id.seed, id.shape_class, cfg.points);
      Tensor pts({pc.size(), 3});
      for (std::size_t p = 0; p < pc.size(); ++p)
        for (std::size_t a = 0; a < 3; ++a) pts(p, a) = pc.points[p][a];
      save_tensors(flags.out / "shapes" / (id.str() + ".rtns"), {{"points", pts}});
      json rec;
      rec["shape_id"] = id.str();
      rec["class"] = std::string(world::to_string(id.shape_class));
      rec["seed"] = id.seed;
      rec["split"] = split;
      manifest += rec.dump() + "\n";
    }
  }
  write_text(flags.out / kManifest, manifest);
  log << fmt::format("wrote {} shapes to {}\n", index, flags.out.string());
}

trainer::Dataset load_split(const fs::path& dir, const std::string& split, const model::ModelConfig& cfg) {
  if (dir.empty()) throw ConfigError("--data is required");
  std::ifstream in(dir / kManifest);
  if (!in) throw MissingInput("no manifest in " + dir.string());
  trainer::Dataset out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw MissingInput("corrupt manifest line in " + dir.string());
    if (rec.at("split") != split) continue;
    const std::string name = rec.at("shape_id");
    const fs::path file = dir / "shapes" / (name + ".rtns");
    if (!fs::exists(file)) throw MissingInput("missing shape file " + file.string());
    const NamedTensors t = load_tensors(file);
    const auto it = t.find("points");
    if (it == t.end() || it->second.rank() != 2 || it->second.shape()[1] != 3)
      throw MissingInput("bad shape file " + file.string());
    trainer::DatasetItem item;
    item.id = {rec.at("seed").get<std::uint64_t>(), world::parse_shape_class(rec.at("class").get<std::string>())};
    item.cloud.id = item.id;
    for (std::size_t p = 0; p < it->second.shape()[0]; ++p)
      item.cloud.points.push_back({it->second(p, 0), it->second(p, 1), it->second(p, 2)});
    item.latent = model::latent_encode(item.cloud, cfg);
    out.push_back(std::move(item));
  }
  if (out.empty()) throw MissingInput("split '" + split + "' in " + dir.string() + " is empty");
  return out;
}

void train_single(const Flags& flags, std::ostream& log) {
  const RunConfig cfg = config_from_flags(flags);
  model::Model m = model::Model::initial(cfg.model, model::Conditioning::single_view, mix64(cfg.seed ^ hash_name("init")));
  train_phase(m, cfg, flags, trainer::Phase::single_view, cfg.steps_single, "train-single", log);
}

void upgrade(const Flags& flags, std::ostream& log) {
  const RunConfig cfg = config_from_flags(flags);
  const model::Model single = load_checkpoint(flags.checkpoint);
  if (single.conditioning() != model::Conditioning::single_view)
    throw ConfigError("upgrade expects a single-view checkpoint");
  const model::Model mv = trainer::upgrade_from_single(single, cfg.mv_conditioning);
  json inputs;
  inputs["checkpoint"] = flags.checkpoint.string();
  prepare_out(flags.out, cfg, "upgrade", inputs);
  mv.save(flags.out / kModelFile, checkpoint_provenance(cfg, "upgrade"));
  log << fmt::format("upgraded to {}\n", model::to_string(mv.conditioning()));
}

void train_mv(const Flags& flags, std::ostream& log) {
  const RunConfig cfg = config_from_flags(flags);
  model::Model m = load_checkpoint(flags.checkpoint);
  if (m.conditioning() == model::Conditioning::single_view)
    throw ConfigError("train-mv expects an upgraded checkpoint; run upgrade first");
  train_phase(m, cfg, flags, trainer::Phase::multi_view, cfg.steps_multi, "train-mv", log);
}

void sample(const Flags& flags, std::ostream& log) {
  const RunConfig cfg = config_from_flags(flags);
  const std::vector<std::size_t> views = parse_views(flags.views.value_or("1"));
  if (views.size() != 1) throw ConfigError("sample takes a single view count");
  if (flags.shape.empty()) throw ConfigError("--shape is required");
  const world::ShapeId id = parse_shape_id(flags.shape);
  const model::Model m = load_checkpoint(flags.checkpoint);
  if (m.conditioning() == model::Conditioning::single_view && views[0] != 1)
    throw ConfigError("a single-view checkpoint takes --views 1");

  trainer::DatasetItem item;
  item.id = id;
  item.cloud = world::generate_shape(id.seed, id.shape_class, cfg.points);
  item.latent = model::latent_encode(item.cloud, m.config());
  const auto cams = evaluation::evaluation_cameras(cfg.seed, 0, views[0]);
  const trainer::TrainingSample s = trainer::make_sample(item, cams, true, trainer::encoder_for(m.config()));
  evaluation::RoutingTrace trace;
  const model::LatentTokens z = evaluation::sample_latent(m, s.views, mix64(cfg.seed ^ mix64(0)), cfg.sampler_steps,
                                                          flags.trace ? &trace : nullptr);
  const world::PointCloud pc = model::latent_decode(z, m.config());

  json inputs;
  inputs["checkpoint"] = flags.checkpoint.string();
  inputs["shape"] = id.str();
  inputs["views"] = views[0];
  prepare_out(flags.out, cfg, "sample", inputs);
  std::string text;
  for (const auto& p : pc.points) text += fmt::format("{:.9g} {:.9g} {:.9g}\n", p[0], p[1], p[2]);
  write_text(flags.out / "points.txt", text);
  if (flags.trace) {
    json meta;
    meta["shape"] = id.str();
    meta["views"] = views[0];
    meta["seed"] = cfg.seed;
    trace.metadata_json = meta.dump();
    evaluation::save_trace(flags.out / "trace.rtrc", trace);
  }
  log << fmt::format("{} points from {} view(s)\n", pc.size(), views[0]);
}

void eval(const Flags& flags, std::ostream& log) {
  RunConfig cfg = config_from_flags(flags);
  if (flags.views) cfg.view_counts = parse_views(*flags.views);
  const model::Model m = load_checkpoint(flags.checkpoint);
  if (m.conditioning() == model::Conditioning::single_view)
    for (std::size_t k : cfg.view_counts)
      if (k != 1) throw ConfigError("a single-view checkpoint is evaluated with view count 1 only");
  trainer::Dataset test = load_split(flags.data, "test", m.config());
  if (cfg.eval_shapes > 0 && cfg.eval_shapes < test.size()) test.resize(cfg.eval_shapes);

  std::vector<evaluation::RoutingTrace> traces;
  evaluation::EvalOptions opt;
  opt.seed = cfg.seed;
  opt.steps = cfg.sampler_steps;
  opt.threads = cfg.threads;
  opt.traces = &traces;
  const evaluation::EvalTable table = evaluation::evaluate(m, test, cfg.view_counts, opt);

  json inputs;
  inputs["checkpoint"] = flags.checkpoint.string();
  inputs["data"] = flags.data.string();
  prepare_out(flags.out, cfg, "eval", inputs);
  write_text(flags.out / "metrics.csv", evaluation::metrics_csv(table));
  write_text(flags.out / "summary.csv", evaluation::summary_csv(table));
  // Consistency over multi-view traces only; a single view routes trivially.
  std::vector<evaluation::RoutingTrace> multi;
  for (auto& t : traces)
    if (t.views > 1) multi.push_back(std::move(t));
  if (!multi.empty()) write_text(flags.out / "consistency.json", evaluation::report_json(evaluation::consistency_report(multi)));
  for (const auto& s : table.summary)
    log << fmt::format("views {} cd_x1000 {:.3f} f1_0.1 {:.2f}\n", s.view_count, 1000.0 * s.cd_mean, s.f1_0_1_mean);
}

void analyze_router(const Flags& flags, std::ostream& log) {
  RunConfig cfg = config_from_flags(flags);
  std::vector<evaluation::RoutingTrace> traces;
  json inputs;
  if (!flags.trace_files.empty()) {
    for (const fs::path& p : flags.trace_files) {
      if (!fs::exists(p)) throw MissingInput("trace not found: " + p.string());
      traces.push_back(evaluation::load_trace(p));
      inputs["traces"].push_back(p.string());
    }
  } else {
    if (flags.views) cfg.view_counts = parse_views(*flags.views);
    const model::Model m = load_checkpoint(flags.checkpoint);
    if (!m.has_router()) throw ConfigError("analyze-router needs a routed checkpoint or trace files");
    trainer::Dataset test = load_split(flags.data, "test", m.config());
    if (cfg.eval_shapes > 0 && cfg.eval_shapes < test.size()) test.resize(cfg.eval_shapes);
    std::vector<std::size_t> counts;
    for (std::size_t k : cfg.view_counts)
      if (k > 1) counts.push_back(k);
    if (counts.empty()) throw ConfigError("analyze-router needs a view count above 1");
    evaluation::EvalOptions opt;
    opt.seed = cfg.seed;
    opt.steps = cfg.sampler_steps;
    opt.threads = cfg.threads;
    opt.traces = &traces;
    evaluation::evaluate(m, test, counts, opt);
    inputs["checkpoint"] = flags.checkpoint.string();
    inputs["data"] = flags.data.string();
  }
  const evaluation::ConsistencyReport report = evaluation::consistency_report(traces);
  prepare_out(flags.out, cfg, "analyze-router", inputs);
  write_text(flags.out / "consistency.json", evaluation::report_json(report));
  log << fmt::format("cross_block {:.4f} cross_timestep {:.4f} global {:.4f} over {} trace(s)\n",
                     report.all.cross_block.mean, report.all.cross_timestep.mean, report.all.global.mean,
                     report.traces);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Routed multi-view conditioning for latent flow models, desk scale"};
  app.require_subcommand(1);
  Flags flags;
  std::optional<std::string> config_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI or JSON config file");
    sub->add_option("--seed", flags.seed, "root seed");
    sub->add_option("--out", flags.out, "output directory")->required();
    sub->add_option("--set", flags.set, "extra override section.key=value");
  };
  auto* gen = app.add_subcommand("gen-data", "generate the shape dataset");
  common(gen);
  gen->add_option("--classes", flags.classes, "comma-separated shape classes");
  gen->add_flag("--force", flags.force, "overwrite an existing dataset");

  auto* ts = app.add_subcommand("train-single", "train the single-view backbone");
  common(ts);
  ts->add_option("--data", flags.data, "dataset directory")->required();

  auto* up = app.add_subcommand("upgrade", "initialise a multi-view model from a single-view checkpoint");
  common(up);
  up->add_option("--checkpoint", flags.checkpoint, "single-view checkpoint")->required();

  auto* tm = app.add_subcommand("train-mv", "fine-tune a multi-view model");
  common(tm);
  tm->add_option("--data", flags.data, "dataset directory")->required();
  tm->add_option("--checkpoint", flags.checkpoint, "upgraded checkpoint")->required();
  tm->add_option("--p-pert", flags.p_pert, "perturbation probability");

  auto* sm = app.add_subcommand("sample", "sample one shape");
  common(sm);
  sm->add_option("--checkpoint", flags.checkpoint, "model checkpoint")->required();
  sm->add_option("--shape", flags.shape, "shape id <class>-<seed>")->required();
  sm->add_option("--views", flags.views, "number of input views");
  sm->add_flag("--trace", flags.trace, "write the routing trace");

  auto* ev = app.add_subcommand("eval", "evaluate on the test split");
  common(ev);
  ev->add_option("--checkpoint", flags.checkpoint, "model checkpoint")->required();
  ev->add_option("--data", flags.data, "dataset directory")->required();
  ev->add_option("--views", flags.views, "view counts, comma-separated");

  auto* an = app.add_subcommand("analyze-router", "routing consistency report");
  common(an);
  an->add_option("--trace-file", flags.trace_files, "routing trace files");
  an->add_option("--checkpoint", flags.checkpoint, "routed checkpoint");
  an->add_option("--data", flags.data, "dataset directory");
  an->add_option("--views", flags.views, "view counts, comma-separated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (config_path) flags.config = *config_path;

  try {
    if (*gen) gen_data(flags, std::cout);
    else if (*ts) train_single(flags, std::cout);
    else if (*up) upgrade(flags, std::cout);
    else if (*tm) train_mv(flags, std::cout);
    else if (*sm) sample(flags, std::cout);
    else if (*ev) eval(flags, std::cout);
    else if (*an) analyze_router(flags, std::cout);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const MissingInput& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const trainer::DivergenceError& e) {
    std::cerr << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace roar::cli
