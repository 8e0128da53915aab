#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeess/env.hpp"
#include "safeess/expert.hpp"
#include "safeess/scenarios.hpp"
#include "safeess/training.hpp"

namespace safeess::cli {

struct ScenarioSource {
  enum class Kind { kSynthetic, kFile };
  Kind kind = Kind::kSynthetic;
  std::filesystem::path path;  // kFile
  std::uint64_t seed = 1;      // kSynthetic
  GeneratorConfig generator;
};

struct BenchmarkConfig {
  std::vector<std::filesystem::path> configs;  // per-network run configs; empty = this one
  std::vector<std::string> algos{"td3", "safe-td3", "td3bc", "safe-td3bc"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int jobs = 1;
};

// Everything one command needs. Relative paths are resolved against the
// directory of the config file.
struct RunConfig {
  std::filesystem::path source_file;
  std::filesystem::path network;
  ScenarioSource scenarios;
  double dt_hours = 1.0;
  std::string algo = "td3bc";
  TrainConfig train;
  bool safety = true;
  double eps = 0.002;
  double sigma = 400.0;
  ExpertOptions expert;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> checkpoint;
  BenchmarkConfig benchmark;

  nlohmann::json to_json() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
/// Checks referenced files and value ranges; throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace safeess::cli
