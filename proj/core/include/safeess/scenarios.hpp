#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/network.hpp"

namespace safeess {

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { kConfig, kSchema, kRagged, kValue };

  ScenarioError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// One operating day. Bus series are (non-slack buses) x (steps), in MW/MVAr,
// row order = Network::pos.
struct ScenarioDay {
  std::string date;
  double dt_hours = 1.0;
  std::vector<double> price;  // EUR/MWh
  Eigen::MatrixXd p_load;
  Eigen::MatrixXd q_load;
  Eigen::MatrixXd p_pv;

  int steps() const { return static_cast<int>(price.size()); }
};

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split split);

struct ScenarioSet {
  std::vector<ScenarioDay> days;
  std::vector<Split> split;  // parallel to days
  std::uint64_t seed = 0;

  std::vector<const ScenarioDay*> in(Split s) const;
  std::vector<std::size_t> indices(Split s) const;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
};

/// Contiguous split labels for n days (train first, then val, then test).
/// Every split gets at least one day when n >= 3.
std::vector<Split> assign_splits(std::size_t n, const SplitFractions& frac);

struct GeneratorConfig {
  int days = 365;
  double dt_hours = 1.0;
  std::vector<double> peak_load_mw{0.015};  // one value per non-slack bus, or one for all
  double pv_penetration = 0.5;              // PV peak / bus peak load
  std::vector<int> pv_buses;                // external ids; empty = every non-slack bus
  double power_factor = 0.95;
  double load_day_sigma = 0.08;
  double load_step_sigma = 0.03;
  double cloud_min = 0.4;
  double price_base = 60.0;
  double price_day_sigma = 0.1;
  double price_step_sigma = 0.05;
  SplitFractions split;
};

GeneratorConfig generator_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GeneratorConfig& cfg);

/// Normalized diurnal profiles, hour of day in [0, 24).
double load_shape(double hour);
double pv_shape(double hour);
double price_shape(double hour);

ScenarioSet generate_synthetic(const Network& net, const GeneratorConfig& cfg, std::uint64_t seed);

/// Long-format CSV: date,t,price_eur_mwh,bus,p_load_mw,q_load_mvar,p_pv_mw.
ScenarioSet load_csv(const std::filesystem::path& path, const Network& net, const SplitFractions& frac = {});
void write_csv(const std::filesystem::path& path, const Network& net, const ScenarioSet& set);

/// Checks the per-day invariants; throws ScenarioError.
void validate_day(const ScenarioDay& day, std::size_t load_buses);

}  // namespace safeess
