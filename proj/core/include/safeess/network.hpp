#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace safeess {

/// Raised by network loading and validation. `kind()` tells the failure
/// family apart; the message names the offending element.
class NetworkError : public std::runtime_error {
 public:
  enum class Kind { kParse, kNonRadial, kDuplicateEss, kUnknownBus, kLimit };

  NetworkError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Bus {
  int id = 0;  // internal, 1-based, 1 = slack
  double v_min = 0.0;
  double v_max = 0.0;
  double v_min_sq = 0.0;
  double v_max_sq = 0.0;
  bool has_ess = false;
};

struct Line {
  int from_bus = 0;  // parent
  int to_bus = 0;    // child
  double r = 0.0;
  double x = 0.0;
  double i_max = 0.0;
  double i_max_sq = 0.0;
};

struct EssSpec {
  int bus = 0;  // internal bus id
  double p_min = 0.0;  // MW, negative = discharge
  double p_max = 0.0;  // MW
  double e_cap = 0.0;  // MWh
  double soc_min = 0.0;
  double soc_max = 1.0;
  double eta_c = 1.0;
  double eta_d = 1.0;
  double soc_init = 0.5;
};

// Radial network, re-indexed on load so that bus ids are 1..N with the
// slack at 1, and lines[k] is the unique line feeding bus k + 2. Non-slack
// vectors (injections, sensitivities) use position `id - 2`.
struct Network {
  double v0_sq = 1.0;
  double base_mva = 1.0;
  double base_kv = 1.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<EssSpec> ess;

  std::vector<int> external_ids;            // external id per internal id - 1
  std::vector<int> parent;                  // parent bus id per internal id - 1, 0 for slack
  std::vector<std::vector<int>> children;   // child bus ids per internal id - 1
  std::vector<int> bfs_order;               // bus ids, root first

  std::size_t bus_count() const { return buses.size(); }
  std::size_t load_bus_count() const { return buses.size() - 1; }
  std::size_t ess_count() const { return ess.size(); }

  const Bus& bus(int id) const { return buses.at(static_cast<std::size_t>(id - 1)); }
  const Line& feeder(int id) const { return lines.at(static_cast<std::size_t>(id - 2)); }
  int external_id(int id) const { return external_ids.at(static_cast<std::size_t>(id - 1)); }

  /// Position of a non-slack bus in injection / sensitivity vectors.
  static std::size_t pos(int id) { return static_cast<std::size_t>(id - 2); }
};

Network parse_network(const nlohmann::json& doc);
Network load_network(const std::filesystem::path& path);

/// Serializes with external bus ids and the original (unsquared) limits,
/// so that parse_network(network_to_json(n)) reproduces n.
nlohmann::json network_to_json(const Network& net);

/// SHA-256 of the canonical serialization.
std::string network_hash(const Network& net);

}  // namespace safeess
