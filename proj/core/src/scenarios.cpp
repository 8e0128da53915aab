#include "safeess/scenarios.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "safeess/format.hpp"

namespace safeess {

namespace {

using Kind = ScenarioError::Kind;

double bump(double hour, double center, double width) {
  const double d = hour - center;
  return std::exp(-d * d / (2.0 * width * width));
}

// Mean-one lognormal factor, clipped to keep tails physical.
double lognormal_factor(std::mt19937_64& rng, double sigma, double lo, double hi) {
  if (sigma <= 0.0) return 1.0;
  std::normal_distribution<double> normal(-0.5 * sigma * sigma, sigma);
  return std::clamp(std::exp(normal(rng)), lo, hi);
}

// Synthetic days are labelled with ISO dates from 2023-01-01 so that
// lexicographic order is chronological.
std::string iso_date(int offset) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year{2023} / January / 1} + days{offset}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ScenarioError(Kind::kSchema, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<const ScenarioDay*> ScenarioSet::in(Split s) const {
  std::vector<const ScenarioDay*> out;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (split[i] == s) out.push_back(&days[i]);
  }
  return out;
}

std::vector<std::size_t> ScenarioSet::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<Split> assign_splits(std::size_t n, const SplitFractions& frac) {
  auto n_train = static_cast<std::size_t>(std::llround(frac.train * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(frac.val * static_cast<double>(n)));
  if (n >= 3) {
    n_val = std::max<std::size_t>(n_val, 1);
    n_train = std::clamp<std::size_t>(n_train, 1, n - n_val - 1);
  } else {
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
  }
  std::vector<Split> out(n, Split::kTest);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) out[i] = Split::kTrain;
    else if (i < n_train + n_val) out[i] = Split::kVal;
  }
  return out;
}

double load_shape(double hour) { return 0.45 + 0.25 * bump(hour, 8.0, 1.5) + 0.55 * bump(hour, 19.5, 2.0); }

double pv_shape(double hour) {
  if (hour <= 6.0 || hour >= 20.0) return 0.0;
  return std::pow(std::sin(std::numbers::pi * (hour - 6.0) / 14.0), 1.5);
}

double price_shape(double hour) {
  return 1.0 - 0.35 * bump(hour, 3.0, 2.0) - 0.3 * bump(hour, 13.0, 2.0) + 0.2 * bump(hour, 8.0, 1.5) +
         0.9 * bump(hour, 19.5, 1.5);
}

GeneratorConfig generator_config_from_json(const nlohmann::json& doc) {
  GeneratorConfig cfg;
  cfg.days = doc.value("days", cfg.days);
  cfg.dt_hours = doc.value("dt_hours", cfg.dt_hours);
  if (doc.contains("peak_load_mw")) {
    const auto& v = doc.at("peak_load_mw");
    cfg.peak_load_mw = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
  }
  cfg.pv_penetration = doc.value("pv_penetration", cfg.pv_penetration);
  cfg.pv_buses = doc.value("pv_buses", cfg.pv_buses);
  cfg.power_factor = doc.value("power_factor", cfg.power_factor);
  cfg.load_day_sigma = doc.value("load_day_sigma", cfg.load_day_sigma);
  cfg.load_step_sigma = doc.value("load_step_sigma", cfg.load_step_sigma);
  cfg.cloud_min = doc.value("cloud_min", cfg.cloud_min);
  cfg.price_base = doc.value("price_base", cfg.price_base);
  cfg.price_day_sigma = doc.value("price_day_sigma", cfg.price_day_sigma);
  cfg.price_step_sigma = doc.value("price_step_sigma", cfg.price_step_sigma);
  cfg.split.train = doc.value("train_fraction", cfg.split.train);
  cfg.split.val = doc.value("val_fraction", cfg.split.val);
  return cfg;
}

nlohmann::json to_json(const GeneratorConfig& cfg) {
  return {{"days", cfg.days},
          {"dt_hours", cfg.dt_hours},
          {"peak_load_mw", cfg.peak_load_mw},
          {"pv_penetration", cfg.pv_penetration},
          {"pv_buses", cfg.pv_buses},
          {"power_factor", cfg.power_factor},
          {"load_day_sigma", cfg.load_day_sigma},
          {"load_step_sigma", cfg.load_step_sigma},
          {"cloud_min", cfg.cloud_min},
          {"price_base", cfg.price_base},
          {"price_day_sigma", cfg.price_day_sigma},
          {"price_step_sigma", cfg.price_step_sigma},
          {"train_fraction", cfg.split.train},
          {"val_fraction", cfg.split.val}};
}

ScenarioSet generate_synthetic(const Network& net, const GeneratorConfig& cfg, std::uint64_t seed) {
  const std::size_t nb = net.load_bus_count();
  if (cfg.days <= 0) throw ScenarioError(Kind::kConfig, "days must be positive");
  if (!(cfg.dt_hours > 0.0)) throw ScenarioError(Kind::kConfig, "dt_hours must be positive");
  const double steps_real = 24.0 / cfg.dt_hours;
  const auto steps = static_cast<int>(std::llround(steps_real));
  if (std::abs(steps_real - steps) > 1e-9) throw ScenarioError(Kind::kConfig, "dt_hours must divide 24");
  if (cfg.peak_load_mw.size() != 1 && cfg.peak_load_mw.size() != nb) {
    throw ScenarioError(Kind::kConfig, "peak_load_mw needs one value or one per non-slack bus");
  }
  for (double v : cfg.peak_load_mw) {
    if (!(v >= 0.0)) throw ScenarioError(Kind::kConfig, "peak loads must be non-negative");
  }
  if (cfg.pv_penetration < 0.0) throw ScenarioError(Kind::kConfig, "pv_penetration must be non-negative");
  if (!(cfg.power_factor > 0.0 && cfg.power_factor <= 1.0)) {
    throw ScenarioError(Kind::kConfig, "power_factor must lie in (0, 1]");
  }
  if (cfg.price_base < 0.0) throw ScenarioError(Kind::kConfig, "price_base must be non-negative");

  std::vector<bool> has_pv(nb, cfg.pv_buses.empty());
  for (int ext : cfg.pv_buses) {
    bool found = false;
    for (std::size_t i = 1; i < net.external_ids.size(); ++i) {
      if (net.external_ids[i] == ext) {
        has_pv[i - 1] = true;
        found = true;
      }
    }
    if (!found) throw ScenarioError(Kind::kConfig, "pv bus " + std::to_string(ext) + " is not a load bus");
  }
  const double tan_phi = std::tan(std::acos(cfg.power_factor));

  ScenarioSet set;
  set.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cloud(cfg.cloud_min, 1.0);
  for (int d = 0; d < cfg.days; ++d) {
    ScenarioDay day;
    day.date = iso_date(d);
    day.dt_hours = cfg.dt_hours;
    day.price.resize(static_cast<std::size_t>(steps));
    day.p_load = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), steps);
    day.p_pv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), steps);

    const double price_day = lognormal_factor(rng, cfg.price_day_sigma, 0.5, 1.5);
    const double load_day = lognormal_factor(rng, cfg.load_day_sigma, 0.75, 1.25);
    const double cloud_day = cloud(rng);
    for (int t = 0; t < steps; ++t) {
      const double hour = (t + 0.5) * cfg.dt_hours;
      day.price[static_cast<std::size_t>(t)] =
          cfg.price_base * price_shape(hour) * price_day * lognormal_factor(rng, cfg.price_step_sigma, 0.7, 1.3);
      const double pv_step = std::min(1.0, cloud_day * lognormal_factor(rng, 0.1, 0.5, 1.5));
      for (std::size_t b = 0; b < nb; ++b) {
        const double peak = cfg.peak_load_mw.size() == 1 ? cfg.peak_load_mw[0] : cfg.peak_load_mw[b];
        const double noise = lognormal_factor(rng, cfg.load_step_sigma, 0.85, 1.15);
        day.p_load(static_cast<Eigen::Index>(b), t) = peak * load_shape(hour) * load_day * noise;
        if (has_pv[b]) {
          day.p_pv(static_cast<Eigen::Index>(b), t) = cfg.pv_penetration * peak * pv_shape(hour) * pv_step;
        }
      }
    }
    day.q_load = day.p_load * tan_phi;
    set.days.push_back(std::move(day));
  }
  set.split = assign_splits(set.days.size(), cfg.split);
  return set;
}

void validate_day(const ScenarioDay& day, std::size_t load_buses) {
  const auto steps = static_cast<Eigen::Index>(day.price.size());
  const auto nb = static_cast<Eigen::Index>(load_buses);
  if (steps == 0) throw ScenarioError(Kind::kRagged, day.date + ": empty day");
  if (std::abs(steps * day.dt_hours - 24.0) > 1e-9) {
    throw ScenarioError(Kind::kRagged, day.date + ": steps x dt_hours must cover 24 h");
  }
  for (const Eigen::MatrixXd* m : {&day.p_load, &day.q_load, &day.p_pv}) {
    if (m->rows() != nb || m->cols() != steps) {
      throw ScenarioError(Kind::kRagged, day.date + ": series dimensions do not match");
    }
    if (!m->allFinite()) throw ScenarioError(Kind::kValue, day.date + ": non-finite value");
  }
  if ((day.p_pv.array() < 0.0).any()) throw ScenarioError(Kind::kValue, day.date + ": negative PV");
  if ((day.p_load.array() < 0.0).any()) throw ScenarioError(Kind::kValue, day.date + ": negative load");
  for (double p : day.price) {
    if (!std::isfinite(p)) throw ScenarioError(Kind::kValue, day.date + ": non-finite price");
  }
}

ScenarioSet load_csv(const std::filesystem::path& path, const Network& net, const SplitFractions& frac) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(Kind::kSchema, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ScenarioError(Kind::kSchema, path.string() + ": empty file");

  static const std::array<std::string, 7> kColumns = {"date", "t", "price_eur_mwh", "bus",
                                                      "p_load_mw", "q_load_mvar", "p_pv_mw"};
  const auto header = split_csv(line);
  std::array<std::size_t, 7> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) throw ScenarioError(Kind::kSchema, "missing column '" + kColumns[c] + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::map<int, std::size_t> bus_pos;
  for (std::size_t i = 1; i < net.external_ids.size(); ++i) bus_pos[net.external_ids[i]] = i - 1;

  struct Cell {
    double price, p, q, pv;
  };
  // date -> t -> bus position -> values
  std::map<std::string, std::map<int, std::map<std::size_t, Cell>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() < header.size()) {
      throw ScenarioError(Kind::kSchema, "line " + std::to_string(line_no) + ": too few fields");
    }
    const std::string& date = cells[col[0]];
    const int t = static_cast<int>(parse_double(cells[col[1]], line_no));
    const int bus = static_cast<int>(parse_double(cells[col[3]], line_no));
    auto bp = bus_pos.find(bus);
    if (bp == bus_pos.end()) {
      throw ScenarioError(Kind::kSchema, "line " + std::to_string(line_no) + ": bus " + std::to_string(bus) +
                                             " is not a non-slack bus of the network");
    }
    Cell cell{parse_double(cells[col[2]], line_no), parse_double(cells[col[4]], line_no),
              parse_double(cells[col[5]], line_no), parse_double(cells[col[6]], line_no)};
    if (cell.pv < 0.0) throw ScenarioError(Kind::kValue, "line " + std::to_string(line_no) + ": negative PV");
    if (!rows[date][t].emplace(bp->second, cell).second) {
      throw ScenarioError(Kind::kRagged, "line " + std::to_string(line_no) + ": duplicate (date, t, bus)");
    }
  }
  if (rows.empty()) throw ScenarioError(Kind::kSchema, path.string() + ": no data rows");

  const std::size_t nb = net.load_bus_count();
  ScenarioSet set;
  for (const auto& [date, by_t] : rows) {
    const auto steps = static_cast<int>(by_t.size());
    ScenarioDay day;
    day.date = date;
    day.dt_hours = 24.0 / steps;
    day.price.assign(static_cast<std::size_t>(steps), 0.0);
    day.p_load = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), steps);
    day.q_load = day.p_load;
    day.p_pv = day.p_load;
    int expected_t = 0;
    for (const auto& [t, by_bus] : by_t) {
      if (t != expected_t++) throw ScenarioError(Kind::kRagged, date + ": step indices are not 0..T-1");
      if (by_bus.size() != nb) throw ScenarioError(Kind::kRagged, date + ": step " + std::to_string(t) + " misses buses");
      std::set<double> prices;
      for (const auto& [pos, cell] : by_bus) {
        prices.insert(cell.price);
        day.p_load(static_cast<Eigen::Index>(pos), t) = cell.p;
        day.q_load(static_cast<Eigen::Index>(pos), t) = cell.q;
        day.p_pv(static_cast<Eigen::Index>(pos), t) = cell.pv;
      }
      if (prices.size() != 1) throw ScenarioError(Kind::kValue, date + ": inconsistent price at step " + std::to_string(t));
      day.price[static_cast<std::size_t>(t)] = *prices.begin();
    }
    validate_day(day, nb);
    set.days.push_back(std::move(day));
  }
  const int steps0 = set.days.front().steps();
  for (const auto& d : set.days) {
    if (d.steps() != steps0) throw ScenarioError(Kind::kRagged, d.date + ": step count differs from other days");
  }
  set.split = assign_splits(set.days.size(), frac);
  return set;
}

void write_csv(const std::filesystem::path& path, const Network& net, const ScenarioSet& set) {
  std::ofstream out(path);
  if (!out) throw ScenarioError(Kind::kSchema, "cannot write " + path.string());
  out << "date,t,price_eur_mwh,bus,p_load_mw,q_load_mvar,p_pv_mw\n";
  for (const auto& day : set.days) {
    for (int t = 0; t < day.steps(); ++t) {
      for (std::size_t b = 0; b < net.load_bus_count(); ++b) {
        const auto r = static_cast<Eigen::Index>(b);
        out << day.date << ',' << t << ',' << format_double(day.price[static_cast<std::size_t>(t)]) << ','
            << net.external_ids[b + 1] << ',' << format_double(day.p_load(r, t)) << ','
            << format_double(day.q_load(r, t)) << ',' << format_double(day.p_pv(r, t)) << '\n';
      }
    }
  }
}

}  // namespace safeess
