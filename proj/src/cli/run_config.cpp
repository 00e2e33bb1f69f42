#include "roar/cli/run_config.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "roar/numerics/rng.hpp"

namespace roar::cli {

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs, auto&& fmt_one) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt_one(xs[i]);
  return out;
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_map() const {
  auto num = [](auto v) { return fmt::format("{}", v); };
  std::map<std::string, std::string> m;
  m["run.seed"] = num(seed);
  m["run.threads"] = num(threads);
  m["data.train_shapes"] = num(train_shapes);
  m["data.val_shapes"] = num(val_shapes);
  m["data.test_shapes"] = num(test_shapes);
  m["data.points"] = num(points);
  m["data.classes"] = join(classes, [](world::ShapeClass c) { return std::string(world::to_string(c)); });
  m["model.blocks"] = num(model.blocks);
  m["model.grid"] = num(model.grid);
  m["model.channels"] = num(model.channels);
  m["model.dim"] = num(model.dim);
  m["model.heads"] = num(model.heads);
  m["model.head_dim"] = num(model.head_dim);
  m["model.patches"] = num(model.patches);
  m["model.feature_dim"] = num(model.feature_dim);
  m["model.mlp_hidden"] = num(model.mlp_hidden);
  m["model.time_freqs"] = num(model.time_freqs);
  m["model.occupancy_saturation"] = num(model.occupancy_saturation);
  m["train.lr"] = num(train.lr);
  m["train.lr_min"] = num(train.lr_min);
  m["train.weight_decay"] = num(train.weight_decay);
  m["train.grad_clip"] = num(train.grad_clip);
  m["train.batch"] = num(train.batch);
  m["train.p_pert"] = num(train.p_pert);
  m["train.aux_min"] = num(train.aux_min);
  m["train.aux_max"] = num(train.aux_max);
  m["train.log_every"] = num(train.log_every);
  m["train.steps_single"] = num(steps_single);
  m["train.steps_multi"] = num(steps_multi);
  m["train.mv_conditioning"] = model::to_string(mv_conditioning);
  m["eval.view_counts"] = join(view_counts, [](std::size_t k) { return std::to_string(k); });
  m["eval.sampler_steps"] = num(sampler_steps);
  m["eval.shapes"] = num(eval_shapes);
  return m;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  const auto known = to_map();
  for (const auto& [key, text] : values) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    auto sz = [&] { return parse_number<std::size_t>(key, text); };
    auto dbl = [&] { return parse_number<double>(key, text); };
    if (key == "run.seed") seed = parse_number<std::uint64_t>(key, text);
    else if (key == "run.threads") threads = sz();
    else if (key == "data.train_shapes") train_shapes = sz();
    else if (key == "data.val_shapes") val_shapes = sz();
    else if (key == "data.test_shapes") test_shapes = sz();
    else if (key == "data.points") points = sz();
    else if (key == "data.classes") {
      classes.clear();
      try {
        for (const std::string& c : split_list(text)) classes.push_back(world::parse_shape_class(c));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    else if (key == "model.blocks") model.blocks = sz();
    else if (key == "model.grid") model.grid = sz();
    else if (key == "model.channels") model.channels = sz();
    else if (key == "model.dim") model.dim = sz();
    else if (key == "model.heads") model.heads = sz();
    else if (key == "model.head_dim") model.head_dim = sz();
    else if (key == "model.patches") model.patches = sz();
    else if (key == "model.feature_dim") model.feature_dim = sz();
    else if (key == "model.mlp_hidden") model.mlp_hidden = sz();
    else if (key == "model.time_freqs") model.time_freqs = sz();
    else if (key == "model.occupancy_saturation") model.occupancy_saturation = dbl();
    else if (key == "train.lr") train.lr = dbl();
    else if (key == "train.lr_min") train.lr_min = dbl();
    else if (key == "train.weight_decay") train.weight_decay = dbl();
    else if (key == "train.grad_clip") train.grad_clip = dbl();
    else if (key == "train.batch") train.batch = sz();
    else if (key == "train.p_pert") train.p_pert = dbl();
    else if (key == "train.aux_min") train.aux_min = sz();
    else if (key == "train.aux_max") train.aux_max = sz();
    else if (key == "train.log_every") train.log_every = sz();
    else if (key == "train.steps_single") steps_single = sz();
    else if (key == "train.steps_multi") steps_multi = sz();
    else if (key == "train.mv_conditioning") {
      try {
        mv_conditioning = model::parse_conditioning(text);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    else if (key == "eval.view_counts") {
      view_counts.clear();
      for (const std::string& k : split_list(text)) view_counts.push_back(parse_number<std::size_t>(key, k));
    }
    else if (key == "eval.sampler_steps") sampler_steps = sz();
    else if (key == "eval.shapes") eval_shapes = sz();
  }
  train.seed = seed;
  train.threads = threads;
}

void RunConfig::validate() const {
  try {
    model.validate();
    trainer::TrainConfig t = train;
    t.steps = std::max<std::size_t>(1, steps_single);
    t.validate();
    trainer::encoder_for(model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (classes.empty()) throw ConfigError("data.classes must not be empty");
  if (points < 16) throw ConfigError("data.points must be at least 16");
  if (view_counts.empty()) throw ConfigError("eval.view_counts must not be empty");
  for (std::size_t k : view_counts)
    if (k == 0 || k > 64) throw ConfigError("eval.view_counts entries must lie in 1..64");
  if (sampler_steps == 0) throw ConfigError("eval.sampler_steps must be positive");
  if (mv_conditioning == model::Conditioning::single_view) throw ConfigError("train.mv_conditioning must be multi-view");
}

std::string RunConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& [key, value] : to_map()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + fmt::format("[{}]\n", s);
      section = s;
    }
    out += fmt::format("{} = {}\n", key.substr(dot + 1), value);
  }
  return out;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", hash_name(to_ini())); }

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  if (path.extension() == ".json") {
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config JSON must be an object of sections");
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
      for (const auto& [key, value] : body.items()) {
        if (value.is_string()) out[section + "." + key] = value.get<std::string>();
        else if (value.is_array()) {
          std::string s;
          for (const auto& v : value) s += (s.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
          out[section + "." + key] = s;
        } else out[section + "." + key] = value.dump();
      }
    }
    return out;
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("bad INI: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) out[section + "." + key] = value.get_value<std::string>();
  }
  return out;
}

RunConfig resolve_config(const std::filesystem::path* file, const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  cfg.apply({});
  if (file) cfg.apply(read_config_file(*file));
  cfg.apply(overrides);
  cfg.validate();
  return cfg;
}

world::ShapeId parse_shape_id(const std::string& text) {
  const auto dash = text.rfind('-');
  if (dash == std::string::npos || dash + 1 == text.size()) throw ConfigError("shape id must look like <class>-<seed>");
  try {
    return {parse_number<std::uint64_t>("shape", text.substr(dash + 1)), world::parse_shape_class(text.substr(0, dash))};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace roar::cli
