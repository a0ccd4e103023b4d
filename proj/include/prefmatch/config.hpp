#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prefmatch/model.hpp"
#include "prefmatch/optim.hpp"
#include "prefmatch/synthetic.hpp"

namespace prefmatch {

struct DataConfig {
  /// Interaction CSVs. When both are empty the synthetic generator is used.
  std::string source;
  std::string target;
  char delimiter = ',';
  SyntheticConfig synthetic;
  SplitConfig split;
  /// Seeds for generation and splitting; default to the training seed.
  std::optional<std::uint64_t> synthetic_seed;
  std::optional<std::uint64_t> split_seed;

  bool is_synthetic() const { return source.empty() && target.empty(); }
};

struct TrainSettings {
  std::optional<std::uint64_t> seed;
  std::size_t epochs = 70;
  std::size_t batch_size = 1024;
  std::size_t negatives = 4;
  AdamOptions adam;
  std::size_t warmup = 10;
  VibWeights beta;
  bool exact_reconstruction = false;
  std::string output_dir = ".";
};

struct EvalSettings {
  /// Validation runs every `every` epochs; 0 disables it.
  std::size_t every = 1;
  /// Evaluations without improvement before stopping.
  std::size_t patience = 10;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  TrainSettings train;
  EvalSettings eval;

  std::uint64_t seed() const;
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json to_json(const Config& config);
/// Strict: unknown keys and wrongly typed values throw ConfigError.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

/// Applies `--key value` overrides. Keys are dotted paths ("train.epochs")
/// or unambiguous leaf names ("epochs"); values are parsed by the type of
/// the key's default.
void apply_overrides(nlohmann::json& j, const std::vector<std::pair<std::string, std::string>>& overrides);

/// Whether `--key` takes no value on the command line (boolean keys).
bool override_is_flag(const std::string& key);

/// Defaults, then the file (if any), then overrides, then validation.
Config resolve_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace prefmatch
