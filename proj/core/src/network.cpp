#include "safeess/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>

#include "safeess/hashing.hpp"

namespace safeess {

namespace {

using Kind = NetworkError::Kind;
using nlohmann::json;

double number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw NetworkError(Kind::kParse, where + ": missing numeric field '" + key + "'");
  }
  double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw NetworkError(Kind::kParse, where + ": non-finite '" + key + "'");
  }
  return v;
}

int integer(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    throw NetworkError(Kind::kParse, where + ": missing integer field '" + key + "'");
  }
  return it->get<int>();
}

const json& array(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw NetworkError(Kind::kParse, std::string("missing array '") + key + "'");
  }
  return *it;
}

struct RawLine {
  int a, b;
  double r, x, i_max;
};

}  // namespace

Network parse_network(const json& doc) {
  if (!doc.is_object()) throw NetworkError(Kind::kParse, "network document is not an object");

  Network net;
  net.v0_sq = number(doc, "v0_sq", "network");
  net.base_mva = number(doc, "base_mva", "network");
  net.base_kv = number(doc, "base_kv", "network");
  if (net.v0_sq <= 0.0) throw NetworkError(Kind::kLimit, "network: v0_sq must be positive");
  if (net.base_mva <= 0.0 || net.base_kv <= 0.0) {
    throw NetworkError(Kind::kLimit, "network: bases must be positive");
  }

  // Buses: external id -> (v_min, v_max). Slack keeps internal id 1, the rest
  // are numbered in ascending external id order.
  std::map<int, std::pair<double, double>> raw_buses;
  for (const auto& b : array(doc, "buses")) {
    int id = integer(b, "id", "bus");
    std::string where = "bus " + std::to_string(id);
    double v_min = number(b, "v_min", where);
    double v_max = number(b, "v_max", where);
    if (!(v_min > 0.0 && v_min < v_max)) {
      throw NetworkError(Kind::kLimit, where + ": require 0 < v_min < v_max");
    }
    if (!raw_buses.emplace(id, std::make_pair(v_min, v_max)).second) {
      throw NetworkError(Kind::kParse, where + ": duplicate bus id");
    }
  }
  if (!raw_buses.contains(1)) throw NetworkError(Kind::kUnknownBus, "no slack bus with id 1");

  std::map<int, int> to_internal;
  net.external_ids.push_back(1);
  to_internal[1] = 1;
  for (const auto& [ext, lim] : raw_buses) {
    if (ext == 1) continue;
    to_internal[ext] = static_cast<int>(net.external_ids.size()) + 1;
    net.external_ids.push_back(ext);
  }
  const std::size_t n = net.external_ids.size();
  net.buses.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [v_min, v_max] = raw_buses.at(net.external_ids[i]);
    Bus& bus = net.buses[i];
    bus.id = static_cast<int>(i) + 1;
    bus.v_min = v_min;
    bus.v_max = v_max;
    bus.v_min_sq = v_min * v_min;
    bus.v_max_sq = v_max * v_max;
  }

  std::vector<RawLine> raw_lines;
  for (const auto& l : array(doc, "lines")) {
    int from = integer(l, "from", "line");
    int to = integer(l, "to", "line");
    std::string where = "line " + std::to_string(from) + "->" + std::to_string(to);
    if (!to_internal.contains(from) || !to_internal.contains(to)) {
      throw NetworkError(Kind::kUnknownBus, where + ": references unknown bus");
    }
    if (from == to) throw NetworkError(Kind::kNonRadial, where + ": self loop");
    RawLine raw{to_internal.at(from), to_internal.at(to), number(l, "r", where), number(l, "x", where),
                number(l, "i_max", where)};
    if (raw.r < 0.0 || raw.x < 0.0 || raw.i_max <= 0.0) {
      throw NetworkError(Kind::kLimit, where + ": require r >= 0, x >= 0, i_max > 0");
    }
    raw_lines.push_back(raw);
  }
  if (raw_lines.size() != n - 1) {
    throw NetworkError(Kind::kNonRadial, "network has " + std::to_string(raw_lines.size()) +
                                             " lines for " + std::to_string(n) +
                                             " buses; a radial tree needs exactly N-1");
  }

  // Orient every line away from the slack with a BFS over the undirected graph.
  std::vector<std::vector<std::size_t>> incident(n);
  for (std::size_t k = 0; k < raw_lines.size(); ++k) {
    incident[static_cast<std::size_t>(raw_lines[k].a - 1)].push_back(k);
    incident[static_cast<std::size_t>(raw_lines[k].b - 1)].push_back(k);
  }
  net.parent.assign(n, -1);
  net.children.assign(n, {});
  net.lines.assign(n - 1, Line{});
  std::vector<bool> line_used(raw_lines.size(), false);
  std::queue<int> frontier;
  frontier.push(1);
  net.parent[0] = 0;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    net.bfs_order.push_back(u);
    for (std::size_t k : incident[static_cast<std::size_t>(u - 1)]) {
      if (line_used[k]) continue;
      line_used[k] = true;
      const RawLine& raw = raw_lines[k];
      int v = raw.a == u ? raw.b : raw.a;
      if (net.parent[static_cast<std::size_t>(v - 1)] != -1) {
        throw NetworkError(Kind::kNonRadial, "cycle through external bus " +
                                                 std::to_string(net.external_ids[static_cast<std::size_t>(v - 1)]));
      }
      net.parent[static_cast<std::size_t>(v - 1)] = u;
      net.children[static_cast<std::size_t>(u - 1)].push_back(v);
      net.lines[Network::pos(v)] = Line{u, v, raw.r, raw.x, raw.i_max, raw.i_max * raw.i_max};
      frontier.push(v);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (net.parent[i] == -1) {
      throw NetworkError(Kind::kNonRadial,
                         "bus " + std::to_string(net.external_ids[i]) + " is not connected to the slack");
    }
  }

  std::set<int> ess_buses;
  for (const auto& e : array(doc, "ess")) {
    int ext = integer(e, "bus", "ess");
    std::string where = "ess at bus " + std::to_string(ext);
    if (!to_internal.contains(ext)) throw NetworkError(Kind::kUnknownBus, where + ": unknown bus");
    int id = to_internal.at(ext);
    if (id == 1) throw NetworkError(Kind::kLimit, where + ": storage cannot sit on the slack bus");
    if (!ess_buses.insert(id).second) throw NetworkError(Kind::kDuplicateEss, where + ": duplicate storage");
    EssSpec s;
    s.bus = id;
    s.p_min = number(e, "p_min", where);
    s.p_max = number(e, "p_max", where);
    s.e_cap = number(e, "e_cap", where);
    s.soc_min = number(e, "soc_min", where);
    s.soc_max = number(e, "soc_max", where);
    s.eta_c = number(e, "eta_c", where);
    s.eta_d = number(e, "eta_d", where);
    s.soc_init = number(e, "soc_init", where);
    if (!(s.p_min < 0.0 && s.p_max > 0.0)) throw NetworkError(Kind::kLimit, where + ": require p_min < 0 < p_max");
    if (!(s.e_cap > 0.0)) throw NetworkError(Kind::kLimit, where + ": require e_cap > 0");
    if (!(s.soc_min >= 0.0 && s.soc_min < s.soc_max && s.soc_max <= 1.0)) {
      throw NetworkError(Kind::kLimit, where + ": require 0 <= soc_min < soc_max <= 1");
    }
    if (!(s.soc_init >= s.soc_min && s.soc_init <= s.soc_max)) {
      throw NetworkError(Kind::kLimit, where + ": require soc_min <= soc_init <= soc_max");
    }
    if (!(s.eta_c > 0.0 && s.eta_c <= 1.0 && s.eta_d > 0.0 && s.eta_d <= 1.0)) {
      throw NetworkError(Kind::kLimit, where + ": efficiencies must lie in (0, 1]");
    }
    net.buses[static_cast<std::size_t>(id - 1)].has_ess = true;
    net.ess.push_back(s);
  }
  return net;
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError(Kind::kParse, "cannot open network file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw NetworkError(Kind::kParse, path.string() + ": " + e.what());
  }
  return parse_network(doc);
}

json network_to_json(const Network& net) {
  json doc;
  doc["v0_sq"] = net.v0_sq;
  doc["base_mva"] = net.base_mva;
  doc["base_kv"] = net.base_kv;
  doc["buses"] = json::array();
  for (const Bus& b : net.buses) {
    doc["buses"].push_back({{"id", net.external_id(b.id)}, {"v_min", b.v_min}, {"v_max", b.v_max}});
  }
  doc["lines"] = json::array();
  for (const Line& l : net.lines) {
    doc["lines"].push_back({{"from", net.external_id(l.from_bus)},
                            {"to", net.external_id(l.to_bus)},
                            {"r", l.r},
                            {"x", l.x},
                            {"i_max", l.i_max}});
  }
  doc["ess"] = json::array();
  for (const EssSpec& s : net.ess) {
    doc["ess"].push_back({{"bus", net.external_id(s.bus)},
                          {"p_min", s.p_min},
                          {"p_max", s.p_max},
                          {"e_cap", s.e_cap},
                          {"soc_min", s.soc_min},
                          {"soc_max", s.soc_max},
                          {"eta_c", s.eta_c},
                          {"eta_d", s.eta_d},
                          {"soc_init", s.soc_init}});
  }
  return doc;
}

std::string network_hash(const Network& net) { return sha256_hex(network_to_json(net).dump()); }

}  // namespace safeess
