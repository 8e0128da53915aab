#include "run_config.hpp"

#include <fstream>

namespace safeess::cli {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

std::string algo_key(const std::string& algo) {
  if (algo == "td3" || algo == "safe-td3" || algo == "bc" || algo == "td3bc" || algo == "safe-td3bc") return algo;
  throw ConfigError("unknown algo '" + algo + "' (td3, safe-td3, bc, td3bc, safe-td3bc)");
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json scen;
  if (scenarios.kind == ScenarioSource::Kind::kFile) {
    scen = {{"source", "file"}, {"path", scenarios.path.generic_string()}};
  } else {
    scen = {{"source", "synthetic"}, {"seed", scenarios.seed}, {"generator", safeess::to_json(scenarios.generator)}};
  }
  std::vector<std::string> bench_configs;
  for (const auto& p : benchmark.configs) bench_configs.push_back(p.generic_string());
  nlohmann::json j = {
      {"schema", 1},
      {"network", network.generic_string()},
      {"scenarios", scen},
      {"dt_hours", dt_hours},
      {"algo", algo},
      {"train", train.to_json()},
      {"safety", {{"enabled", safety}, {"eps", eps}}},
      {"sigma", sigma},
      {"expert",
       {{"eps", expert.eps},
        {"eps_growth", expert.eps_growth},
        {"max_rounds", expert.max_rounds},
        {"terminal_soc", expert.terminal_soc},
        {"max_iterations", expert.admm.max_iterations}}},
      {"out", out.generic_string()},
      {"seed", seed},
      {"benchmark",
       {{"configs", bench_configs}, {"algos", benchmark.algos}, {"seeds", benchmark.seeds}, {"jobs", benchmark.jobs}}}};
  j["dataset"] = dataset ? nlohmann::json(dataset->generic_string()) : nlohmann::json(nullptr);
  j["checkpoint"] = checkpoint ? nlohmann::json(checkpoint->generic_string()) : nlohmann::json(nullptr);
  return j;
}

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  try {
    RunConfig c;
    const int schema = doc.value("schema", 1);
    if (schema != 1) throw ConfigError("unsupported config schema " + std::to_string(schema));
    if (!doc.contains("network")) throw ConfigError("config: 'network' is required");
    c.network = resolve(base_dir, doc.at("network").get<std::string>());

    if (doc.contains("scenarios")) {
      const auto& s = doc.at("scenarios");
      const std::string source = s.value("source", std::string("synthetic"));
      if (source == "file") {
        c.scenarios.kind = ScenarioSource::Kind::kFile;
        c.scenarios.path = resolve(base_dir, s.at("path").get<std::string>());
      } else if (source == "synthetic") {
        c.scenarios.seed = s.value("seed", c.scenarios.seed);
        if (s.contains("generator")) c.scenarios.generator = generator_config_from_json(s.at("generator"));
      } else {
        throw ConfigError("scenarios.source must be 'synthetic' or 'file'");
      }
    }
    c.dt_hours = doc.value("dt_hours", c.dt_hours);
    c.scenarios.generator.dt_hours = c.dt_hours;
    c.algo = algo_key(doc.value("algo", c.algo));
    if (doc.contains("train")) c.train = TrainConfig::from_json(doc.at("train"));
    if (doc.contains("safety")) {
      const auto& s = doc.at("safety");
      c.safety = s.value("enabled", c.safety);
      c.eps = s.value("eps", c.eps);
    }
    c.sigma = doc.value("sigma", c.sigma);
    if (doc.contains("expert")) {
      const auto& e = doc.at("expert");
      c.expert.eps = e.value("eps", c.expert.eps);
      c.expert.eps_growth = e.value("eps_growth", c.expert.eps_growth);
      c.expert.max_rounds = e.value("max_rounds", c.expert.max_rounds);
      c.expert.terminal_soc = e.value("terminal_soc", c.expert.terminal_soc);
      c.expert.admm.max_iterations = e.value("max_iterations", c.expert.admm.max_iterations);
    }
    c.out = resolve(base_dir, doc.value("out", std::string("out")));
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("dataset") && !doc.at("dataset").is_null()) {
      c.dataset = resolve(base_dir, doc.at("dataset").get<std::string>());
    }
    if (doc.contains("checkpoint") && !doc.at("checkpoint").is_null()) {
      c.checkpoint = resolve(base_dir, doc.at("checkpoint").get<std::string>());
    }
    if (doc.contains("benchmark")) {
      const auto& b = doc.at("benchmark");
      for (const auto& p : b.value("configs", std::vector<std::string>{})) c.benchmark.configs.push_back(resolve(base_dir, p));
      c.benchmark.algos = b.value("algos", c.benchmark.algos);
      for (const auto& a : c.benchmark.algos) algo_key(a);
      c.benchmark.seeds = b.value("seeds", c.benchmark.seeds);
      c.benchmark.jobs = b.value("jobs", c.benchmark.jobs);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ScenarioError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = parse_run_config(doc, path.parent_path());
  c.source_file = path;
  return c;
}

void validate(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.network)) throw ConfigError("network file not found: " + cfg.network.string());
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile && !std::filesystem::exists(cfg.scenarios.path)) {
    throw ConfigError("scenario file not found: " + cfg.scenarios.path.string());
  }
  if (cfg.dataset && !std::filesystem::exists(*cfg.dataset)) {
    throw ConfigError("dataset not found: " + cfg.dataset->string());
  }
  if (cfg.checkpoint && !std::filesystem::exists(*cfg.checkpoint)) {
    throw ConfigError("checkpoint not found: " + cfg.checkpoint->string());
  }
  for (const auto& p : cfg.benchmark.configs) {
    if (!std::filesystem::exists(p)) throw ConfigError("benchmark config not found: " + p.string());
  }
  if (!(cfg.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (!(cfg.eps >= 0.0)) throw ConfigError("safety eps must be >= 0");
  if (!(cfg.dt_hours > 0.0)) throw ConfigError("dt_hours must be > 0");
  if (cfg.benchmark.jobs < 1) throw ConfigError("benchmark.jobs must be >= 1");
}

}  // namespace safeess::cli
