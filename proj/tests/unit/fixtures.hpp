#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "safeess/network.hpp"

namespace safeess::test {

inline std::string data_path(const std::string& rel) { return std::string(SAFEESS_DATA_DIR) + "/" + rel; }

struct EssAt {
  int bus;
  double p_max = 0.15;
  double e_cap = 1.0;
  double eta = 0.98;
  double soc_init = 0.5;
};

// Chain 1-2-...-n with per-line r and x (pu); `ess` lists storage buses.
inline nlohmann::json chain_json(const std::vector<double>& r, const std::vector<double>& x,
                                 const std::vector<EssAt>& ess = {}, double v0_sq = 1.0) {
  nlohmann::json doc;
  doc["v0_sq"] = v0_sq;
  doc["base_mva"] = 1.0;
  doc["base_kv"] = 12.66;
  doc["buses"] = nlohmann::json::array();
  for (std::size_t i = 0; i <= r.size(); ++i) {
    doc["buses"].push_back({{"id", static_cast<int>(i + 1)}, {"v_min", 0.95}, {"v_max", 1.05}});
  }
  doc["lines"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.size(); ++i) {
    doc["lines"].push_back({{"from", static_cast<int>(i + 1)},
                            {"to", static_cast<int>(i + 2)},
                            {"r", r[i]},
                            {"x", x[i]},
                            {"i_max", 10.0}});
  }
  doc["ess"] = nlohmann::json::array();
  for (const auto& e : ess) {
    doc["ess"].push_back({{"bus", e.bus},
                          {"p_min", -e.p_max},
                          {"p_max", e.p_max},
                          {"e_cap", e.e_cap},
                          {"soc_min", 0.2},
                          {"soc_max", 0.8},
                          {"eta_c", e.eta},
                          {"eta_d", e.eta},
                          {"soc_init", e.soc_init}});
  }
  return doc;
}

inline Network chain(const std::vector<double>& r, const std::vector<double>& x, const std::vector<EssAt>& ess = {},
                     double v0_sq = 1.0) {
  return parse_network(chain_json(r, x, ess, v0_sq));
}

}  // namespace safeess::test
