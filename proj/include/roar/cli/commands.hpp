#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roar/cli/run_config.hpp"
#include "roar/trainer/trainer.hpp"

namespace roar::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kMissingInput = 3, kDivergence = 4 };

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  std::optional<std::string> views;  // "K" or, for eval, "K1,K2,..."
  std::optional<double> p_pert;
  bool trace = false;
  bool force = false;

  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::string shape;
  std::optional<std::string> classes;
  std::vector<std::filesystem::path> trace_files;
  std::vector<std::string> set;  // extra "section.key=value" overrides
};

// Flags fold into the config on top of the file values.
RunConfig config_from_flags(const Flags& flags);

// Manifest and shape files under `dir`.
void gen_data(const Flags& flags, std::ostream& log);
// Items of one split ("train", "val" or "test") with their latents.
trainer::Dataset load_split(const std::filesystem::path& dir, const std::string& split, const model::ModelConfig& cfg);

void train_single(const Flags& flags, std::ostream& log);
void upgrade(const Flags& flags, std::ostream& log);
void train_mv(const Flags& flags, std::ostream& log);
void sample(const Flags& flags, std::ostream& log);
void eval(const Flags& flags, std::ostream& log);
void analyze_router(const Flags& flags, std::ostream& log);

// Parses argv, dispatches, and maps failures onto exit codes.
int run(int argc, const char* const* argv);

}  // namespace roar::cli
