#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "safeess/format.hpp"
#include "safeess/hashing.hpp"
#include "safeess/powerflow.hpp"
#include "safeess/safety_layer.hpp"

namespace safeess::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw CommandError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CommandError("cannot create " + dir.string() + ": " + ec.message());
}

Algo base_algo(const std::string& algo) {
  if (algo == "td3" || algo == "safe-td3") return Algo::kTd3;
  if (algo == "bc") return Algo::kBc;
  return Algo::kTd3Bc;
}

bool safe_variant(const std::string& algo) { return algo.rfind("safe-", 0) == 0; }

TrainConfig train_config_for(const RunConfig& cfg, const std::string& algo, std::uint64_t seed) {
  TrainConfig tc = cfg.train;
  tc.algo = base_algo(algo);
  tc.safety_in_training = algo == "safe-td3";
  tc.seed = seed;
  return tc;
}

// Expert reference solutions for a split: costs of the days that solved
// cleanly, and their schedules for replay.
struct ExpertReference {
  std::map<std::string, double> costs;
  std::map<std::string, Eigen::MatrixXd> schedules;
  std::vector<ExpertDaySummary> summary;
  double seconds = 0.0;
};

ExpertReference expert_reference(const Workspace& ws, const std::vector<const ScenarioDay*>& days,
                                 const ExpertOptions& opts) {
  const auto t0 = Clock::now();
  CollectResult col = collect_dataset(ws.net, ws.sens, days, ws.env_cfg, opts);
  ExpertReference ref;
  for (std::size_t i = 0; i < col.summary.size(); ++i) {
    if (col.summary[i].status != "ok") continue;
    ref.costs[col.summary[i].date] = col.summary[i].replay_cost_eur;
    ref.schedules[col.summary[i].date] = col.trajectories[i].actions;
  }
  ref.summary = std::move(col.summary);
  ref.seconds = seconds_since(t0);
  return ref;
}

double mean_reward(const EvalReport& r) {
  if (r.days.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : r.days) s += d.reward;
  return s / static_cast<double>(r.days.size());
}

void write_days_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw CommandError("cannot write " + path.string());
  out << "date,cost_eur,expert_cost_eur,cost_error,reward,penalty,shaped_reward,voltage_violations,"
         "current_violations,projections_changed,projections_infeasible\n";
  for (const auto& d : report.days) {
    out << d.date << ',' << format_double(d.cost_eur) << ','
        << (d.expert_cost_eur ? format_double(*d.expert_cost_eur) : "") << ','
        << (d.cost_error ? format_double(*d.cost_error) : "") << ',' << format_double(d.reward) << ','
        << format_double(d.penalty) << ',' << format_double(d.shaped_reward) << ',' << d.voltage_violations << ','
        << d.current_violations << ',' << d.projections_changed << ',' << d.projections_infeasible << '\n';
  }
}

std::string mean_std(const std::vector<double>& v, int precision) {
  if (v.empty()) return "n/a";
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return fmt::format("{:.{}f} +- {:.{}f}", m, precision, sd, precision);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Workspace load_workspace(const RunConfig& cfg) {
  validate(cfg);
  Workspace ws;
  ws.net = load_network(cfg.network);
  ws.sens = build_sensitivities(ws.net);
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile) {
    ws.scenarios = load_csv(cfg.scenarios.path, ws.net, cfg.scenarios.generator.split);
  } else {
    ws.scenarios = generate_synthetic(ws.net, cfg.scenarios.generator, cfg.scenarios.seed);
  }
  const auto train_days = ws.scenarios.in(Split::kTrain);
  if (train_days.empty()) throw CommandError("scenario set has no training days");
  ws.env_cfg.sigma = cfg.sigma;
  ws.env_cfg.norm = fit_normalization(ws.net, train_days);
  return ws;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs) {
  const nlohmann::json config = cfg.to_json();
  nlohmann::json in = nlohmann::json::object();
  for (const auto& p : inputs) in[p.generic_string()] = file_sha256(p);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : outputs) out[p.lexically_relative(dir).generic_string()] = file_sha256(p);
  write_json(dir / "manifest.json", {{"schema", 1},
                                      {"command", command},
                                      {"config", config},
                                      {"config_sha256", sha256_hex(config.dump())},
                                      {"inputs", in},
                                      {"outputs", out}});
}

int cmd_collect_expert(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg);
  ensure_dir(cfg.out);
  const auto t0 = Clock::now();
  const CollectResult col = collect_dataset(ws.net, ws.sens, ws.scenarios.in(Split::kTrain), ws.env_cfg, cfg.expert);
  const double secs = seconds_since(t0);

  const auto dataset_path = cfg.out / "dataset.jsonl";
  const auto summary_path = cfg.out / "expert_summary.csv";
  write_dataset(dataset_path, col.dataset);
  write_summary_csv(summary_path, col.summary);
  std::size_t ok = 0;
  for (const auto& s : col.summary) ok += s.status == "ok";
  write_json(cfg.out / "timing.json", {{"collect_seconds", secs}, {"days", col.summary.size()}});

  std::vector<std::filesystem::path> inputs{cfg.network};
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile) inputs.push_back(cfg.scenarios.path);
  write_manifest(cfg.out, "collect-expert", cfg, inputs, {dataset_path, summary_path});
  std::cout << "collect-expert: " << ok << "/" << col.summary.size() << " days, " << col.dataset.pairs.size()
            << " pairs -> " << dataset_path.string() << "\n";
  return ok > 0 ? 0 : 1;
}

int cmd_train(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg);
  const TrainConfig tc = train_config_for(cfg, cfg.algo, cfg.seed);
  std::optional<ExpertDataset> dataset;
  if (tc.algo != Algo::kTd3) {
    if (!cfg.dataset) throw CommandError("train: algo '" + cfg.algo + "' needs an expert dataset (--dataset)");
    dataset = read_dataset(*cfg.dataset);
  }
  ensure_dir(cfg.out);
  const SafetyParams sp = make_safety_params(ws.net, ws.sens, cfg.eps);
  Env env(ws.net, ws.env_cfg);
  const auto t0 = Clock::now();
  TrainResult tr = train(env, ws.scenarios.in(Split::kTrain), ws.scenarios.in(Split::kVal), tc,
                         dataset ? &*dataset : nullptr, &sp);
  const double secs = seconds_since(t0);

  Checkpoint ckpt{cfg.algo, network_hash(ws.net), ws.env_cfg.norm, tc, std::move(tr.agent)};
  const auto ckpt_path = cfg.out / "checkpoint.json";
  const auto curve_path = cfg.out / "curve.csv";
  write_checkpoint(ckpt_path, ckpt);
  write_curve_csv(curve_path, tr.curve);
  write_json(cfg.out / "timing.json", {{"train_seconds", secs}, {"env_steps", tr.env_steps}});

  std::vector<std::filesystem::path> inputs{cfg.network};
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile) inputs.push_back(cfg.scenarios.path);
  if (cfg.dataset) inputs.push_back(*cfg.dataset);
  write_manifest(cfg.out, "train", cfg, inputs, {ckpt_path, curve_path});
  std::cout << "train " << cfg.algo << ": best validation shaped reward " << format_double(tr.best_val_reward)
            << " at update " << tr.best_update << " -> " << ckpt_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, PolicyKind kind) {
  const Workspace ws = load_workspace(cfg);
  const auto test_days = ws.scenarios.in(Split::kTest);
  if (test_days.empty()) throw CommandError("evaluate: scenario set has no test days");

  std::optional<Checkpoint> ckpt;
  EnvConfig env_cfg = ws.env_cfg;
  if (kind == PolicyKind::kCheckpoint) {
    if (!cfg.checkpoint) throw CommandError("evaluate: --checkpoint is required");
    ckpt = read_checkpoint(*cfg.checkpoint);
    if (ckpt->network_hash != network_hash(ws.net)) {
      throw CommandError("evaluate: checkpoint was trained on a different network (hash mismatch)");
    }
    env_cfg.norm = ckpt->norm;
  }
  ensure_dir(cfg.out);
  const ExpertReference ref = expert_reference(ws, test_days, cfg.expert);

  std::unique_ptr<Policy> policy;
  std::string policy_name;
  if (kind == PolicyKind::kCheckpoint) {
    policy = std::make_unique<AgentPolicy>(ckpt->agent);
    policy_name = ckpt->algo;
  } else if (kind == PolicyKind::kZero) {
    policy = std::make_unique<ZeroPolicy>();
    policy_name = "zero";
  } else {
    policy = std::make_unique<ExpertReplayPolicy>(ref.schedules);
    policy_name = "expert";
  }

  // Days the expert could not solve have no schedule to replay.
  std::vector<const ScenarioDay*> days;
  for (const ScenarioDay* d : test_days) {
    if (kind != PolicyKind::kExpert || ref.schedules.count(d->date)) days.push_back(d);
  }

  std::map<std::string, std::string> traces;
  std::map<std::string, std::string> audits;
  EvalHooks hooks;
  hooks.trace = [&](const std::string& day, const nlohmann::json& rec) { traces[day] += rec.dump() + "\n"; };
  hooks.audit = [&](const std::string& day, const nlohmann::json& rec) { audits[day] += rec.dump() + "\n"; };

  const SafetyParams sp = make_safety_params(ws.net, ws.sens, cfg.eps);
  Env env(ws.net, env_cfg);
  const EvalReport report = evaluate(env, *policy, days, cfg.safety ? &sp : nullptr, &ref.costs, hooks);

  std::vector<std::filesystem::path> outputs;
  const auto report_path = cfg.out / "report.json";
  write_json(report_path, {{"schema", 1},
                           {"network_hash", network_hash(ws.net)},
                           {"policy", policy_name},
                           {"safety", cfg.safety},
                           {"eps", cfg.eps},
                           {"split", "test"},
                           {"report", report.to_json()}});
  outputs.push_back(report_path);
  const auto days_path = cfg.out / "days.csv";
  write_days_csv(days_path, report);
  outputs.push_back(days_path);
  const auto bus_path = cfg.out / "bus_violations.csv";
  {
    std::ofstream out(bus_path);
    out << "bus,violations\n";
    for (const auto& [bus, count] : report.bus_violations()) out << bus << ',' << count << '\n';
  }
  outputs.push_back(bus_path);
  ensure_dir(cfg.out / "traces");
  for (const auto& [day, text] : traces) {
    const auto p = cfg.out / "traces" / (day + ".jsonl");
    std::ofstream(p) << text;
    outputs.push_back(p);
  }
  if (!audits.empty()) {
    ensure_dir(cfg.out / "audit");
    for (const auto& [day, text] : audits) {
      const auto p = cfg.out / "audit" / (day + ".jsonl");
      std::ofstream(p) << text;
      outputs.push_back(p);
    }
  }
  nlohmann::json per_day = nlohmann::json::object();
  for (const auto& d : report.days) per_day[d.date] = d.decision_seconds;
  write_json(cfg.out / "timing.json", {{"mean_decision_seconds", report.mean_latency_seconds()},
                                       {"decision_seconds_per_day", per_day},
                                       {"expert_reference_seconds", ref.seconds}});

  std::vector<std::filesystem::path> inputs{cfg.network};
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile) inputs.push_back(cfg.scenarios.path);
  if (ckpt) inputs.push_back(*cfg.checkpoint);
  write_manifest(cfg.out, "evaluate", cfg, inputs, outputs);

  const auto mce = report.mean_cost_error();
  std::cout << "evaluate " << policy_name << (cfg.safety ? " (safety layer)" : "") << ": " << report.days.size()
            << " days, cost " << format_double(report.total_cost()) << " EUR, violations "
            << report.violations_total() << ", mean cost error "
            << (mce ? fmt::format("{:.2f}%", 100.0 * *mce) : std::string("n/a")) << "\n";
  return 0;
}

int cmd_powerflow(const RunConfig& cfg, const PowerflowRequest& req) {
  const Workspace ws = load_workspace(cfg);
  if (req.day < 0 || req.day >= static_cast<int>(ws.scenarios.days.size())) {
    throw CommandError("powerflow: day index out of range");
  }
  const ScenarioDay& day = ws.scenarios.days[static_cast<std::size_t>(req.day)];
  if (req.step < 0 || req.step >= day.steps()) throw CommandError("powerflow: step out of range");
  const auto ne = static_cast<Eigen::Index>(ws.net.ess_count());
  Eigen::VectorXd p_b = Eigen::VectorXd::Zero(ne);
  if (!req.storage_mw.empty()) {
    if (static_cast<Eigen::Index>(req.storage_mw.size()) != ne) {
      throw CommandError("powerflow: expected " + std::to_string(ne) + " storage values");
    }
    for (Eigen::Index b = 0; b < ne; ++b) p_b(b) = req.storage_mw[static_cast<std::size_t>(b)];
  }
  Env env(ws.net, ws.env_cfg);
  env.reset(day);
  const Injections inj = env.injections(req.step, p_b);
  const PowerFlowSolution sol = solve_ac(ws.net, inj);
  const BranchFlowResiduals res = residuals(ws.net, inj, sol);
  const Eigen::VectorXd lin = linear_v_sq(ws.net, ws.sens, inj);
  double lin_err = 0.0;
  for (Eigen::Index i = 0; i < lin.size(); ++i) {
    lin_err = std::max(lin_err, std::abs(std::sqrt(lin(i)) - std::sqrt(sol.v_sq(i))));
  }
  const ViolationReport viol = violations(ws.net, sol);

  ensure_dir(cfg.out);
  const auto path = cfg.out / "powerflow.json";
  write_json(path, {{"schema", 1},
                    {"day", day.date},
                    {"step", req.step},
                    {"storage_mw", std::vector<double>(p_b.data(), p_b.data() + p_b.size())},
                    {"solution", to_json(ws.net, sol)},
                    {"max_residual", res.max()},
                    {"max_linearization_error_pu", lin_err},
                    {"violations", to_json(ws.net, viol)}});
  std::vector<std::filesystem::path> inputs{cfg.network};
  if (cfg.scenarios.kind == ScenarioSource::Kind::kFile) inputs.push_back(cfg.scenarios.path);
  write_manifest(cfg.out, "powerflow", cfg, inputs, {path});

  double v_min = 1e9;
  double v_max = 0.0;
  for (Eigen::Index i = 0; i < sol.v_sq.size(); ++i) {
    v_min = std::min(v_min, std::sqrt(sol.v_sq(i)));
    v_max = std::max(v_max, std::sqrt(sol.v_sq(i)));
  }
  std::cout << fmt::format("{} t={}: converged={} iterations={} v=[{:.5f}, {:.5f}] pu residual={:.2e} "
                           "lin_err={:.2e} violations={}\n",
                           day.date, req.step, sol.converged, sol.iterations, v_min, v_max, res.max(), lin_err,
                           viol.voltage_count() + viol.current_count());
  return sol.converged ? 0 : 1;
}

BenchmarkResult run_benchmark(const RunConfig& cfg) {
  std::vector<RunConfig> nets;
  if (cfg.benchmark.configs.empty()) {
    nets.push_back(cfg);
  } else {
    for (const auto& p : cfg.benchmark.configs) {
      RunConfig nc = load_run_config(p);
      nc.train = cfg.train;
      nc.eps = cfg.eps;
      nets.push_back(std::move(nc));
    }
  }

  BenchmarkResult result;
  for (const RunConfig& nc : nets) {
    const std::string name = nc.network.stem().string();
    const Workspace ws = load_workspace(nc);
    const auto train_days = ws.scenarios.in(Split::kTrain);
    const auto val_days = ws.scenarios.in(Split::kVal);
    const auto test_days = ws.scenarios.in(Split::kTest);

    bool needs_dataset = false;
    for (const auto& a : cfg.benchmark.algos) needs_dataset |= base_algo(a) != Algo::kTd3;
    std::optional<ExpertDataset> dataset;
    const auto t0 = Clock::now();
    if (needs_dataset) {
      dataset = collect_dataset(ws.net, ws.sens, train_days, ws.env_cfg, nc.expert).dataset;
    }
    result.collect_seconds[name] = seconds_since(t0);
    const ExpertReference ref = expert_reference(ws, test_days, nc.expert);
    const SafetyParams sp = make_safety_params(ws.net, ws.sens, cfg.eps);

    // A training unit is shared by the algorithms that differ only in
    // whether the safety layer runs at evaluation time.
    struct Unit {
      std::string train_algo;
      std::uint64_t seed;
      std::vector<std::size_t> runs;
    };
    std::vector<Unit> units;
    std::vector<BenchmarkRun> runs;
    for (const auto& algo : cfg.benchmark.algos) {
      const std::string train_algo = algo == "safe-td3bc" ? "td3bc" : algo;
      for (std::uint64_t seed : cfg.benchmark.seeds) {
        BenchmarkRun run;
        run.network = name;
        run.algo = algo;
        run.seed = seed;
        runs.push_back(run);
        auto it = std::find_if(units.begin(), units.end(),
                               [&](const Unit& u) { return u.train_algo == train_algo && u.seed == seed; });
        if (it == units.end()) {
          units.push_back({train_algo, seed, {}});
          it = units.end() - 1;
        }
        it->runs.push_back(runs.size() - 1);
      }
    }

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
      for (std::size_t u = next++; u < units.size(); u = next++) {
        const Unit& unit = units[u];
        try {
          Env env(ws.net, ws.env_cfg);
          const TrainConfig tc = train_config_for(nc, unit.train_algo, unit.seed);
          const auto t_train = Clock::now();
          const TrainResult tr = train(env, train_days, val_days, tc, dataset ? &*dataset : nullptr, &sp);
          const double train_secs = seconds_since(t_train);
          for (std::size_t idx : unit.runs) {
            BenchmarkRun& run = runs[idx];
            const SafetyParams* layer = safe_variant(run.algo) ? &sp : nullptr;
            AgentPolicy policy(tr.agent);
            const EvalReport val = evaluate(env, policy, val_days, layer);
            const EvalReport test = evaluate(env, policy, test_days, layer, &ref.costs);
            run.ok = true;
            run.updates = tc.updates;
            run.best_update = tr.best_update;
            run.val_reward = mean_reward(val);
            run.val_shaped_reward = val.mean_shaped_reward();
            run.val_violations = val.violations_total();
            run.test_cost_error = test.mean_cost_error().value_or(0.0);
            run.test_violations = test.violations_total();
            run.train_seconds = train_secs;
            run.latency_seconds = test.mean_latency_seconds();
          }
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "benchmark: " << name << " " << unit.train_algo << " seed " << unit.seed << " done in "
                    << fmt::format("{:.1f}", train_secs) << " s\n";
        } catch (const std::exception& e) {
          for (std::size_t idx : unit.runs) runs[idx].error = e.what();
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "benchmark: " << name << " " << unit.train_algo << " seed " << unit.seed
                    << " failed: " << e.what() << "\n";
        }
      }
    };
    const int jobs = std::max(1, std::min<int>(cfg.benchmark.jobs, static_cast<int>(units.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    result.runs.insert(result.runs.end(), runs.begin(), runs.end());
  }
  return result;
}

int cmd_benchmark(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const BenchmarkResult res = run_benchmark(cfg);

  const auto runs_path = cfg.out / "benchmark_runs.csv";
  {
    std::ofstream out(runs_path);
    out << "network,algo,seed,status,updates,best_update,val_reward,val_shaped_reward,val_violations,"
           "test_cost_error,test_violations\n";
    for (const auto& r : res.runs) {
      out << r.network << ',' << r.algo << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',' << r.updates
          << ',' << r.best_update << ',' << format_double(r.val_reward) << ',' << format_double(r.val_shaped_reward)
          << ',' << r.val_violations << ',' << format_double(r.test_cost_error) << ',' << r.test_violations << '\n';
    }
  }

  // Aggregate per (network, algo) in first-seen order.
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : res.runs) {
    const auto key = std::make_pair(r.network, r.algo);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  const auto csv_path = cfg.out / "benchmark.csv";
  std::ofstream csv(csv_path);
  csv << "network,algo,seeds_ok,seeds_failed,updates,val_reward_median,val_shaped_reward_median,"
         "val_violations_mean,cost_error_pct_mean,cost_error_pct_std,test_violations_mean,test_violations_std\n";
  std::string text = fmt::format("{:<8} {:<11} {:>5} {:>8} {:>10} {:>16} {:>14} {:>14} {:>10} {:>12}\n", "network",
                                 "algo", "seeds", "updates", "collect_s", "cost_error_%", "violations", "val_shaped",
                                 "train_s", "latency_ms");
  const auto timing_path = cfg.out / "benchmark_timing.csv";
  std::ofstream timing(timing_path);
  timing << "network,algo,expert_collection_seconds,train_seconds_mean,decision_latency_ms_mean\n";
  bool all_ok = true;
  for (const auto& [network, algo] : keys) {
    std::vector<double> cost_err, viol, val_r, val_s, val_v, train_s, lat;
    int failed = 0;
    long updates = 0;
    for (const auto& r : res.runs) {
      if (r.network != network || r.algo != algo) continue;
      if (!r.ok) {
        ++failed;
        continue;
      }
      updates = r.updates;
      cost_err.push_back(100.0 * r.test_cost_error);
      viol.push_back(r.test_violations);
      val_r.push_back(r.val_reward);
      val_s.push_back(r.val_shaped_reward);
      val_v.push_back(r.val_violations);
      train_s.push_back(r.train_seconds);
      lat.push_back(1e3 * r.latency_seconds);
    }
    all_ok = all_ok && failed == 0;
    const bool uses_expert = base_algo(algo) != Algo::kTd3;
    const double collect = uses_expert ? res.collect_seconds.at(network) : 0.0;
    csv << network << ',' << algo << ',' << cost_err.size() << ',' << failed << ',' << updates << ','
        << format_double(median_of(val_r)) << ',' << format_double(median_of(val_s)) << ','
        << format_double(mean_of(val_v)) << ',' << format_double(mean_of(cost_err)) << ','
        << format_double(std_of(cost_err)) << ',' << format_double(mean_of(viol)) << ','
        << format_double(std_of(viol)) << '\n';
    timing << network << ',' << algo << ',' << format_double(collect) << ',' << format_double(mean_of(train_s)) << ','
           << format_double(mean_of(lat)) << '\n';
    text += fmt::format("{:<8} {:<11} {:>5} {:>8} {:>10} {:>16} {:>14} {:>14.2f} {:>10.1f} {:>12.3f}\n", network,
                        algo, fmt::format("{}/{}", cost_err.size(), cost_err.size() + static_cast<std::size_t>(failed)),
                        updates, uses_expert ? fmt::format("{:.1f}", collect) : std::string("-"),
                        mean_std(cost_err, 1), mean_std(viol, 1), median_of(val_s), mean_of(train_s), mean_of(lat));
  }
  csv.close();
  timing.close();
  std::ofstream(cfg.out / "benchmark.txt") << text;
  std::cout << text;

  std::vector<std::filesystem::path> inputs{cfg.network};
  for (const auto& p : cfg.benchmark.configs) inputs.push_back(p);
  write_manifest(cfg.out, "benchmark", cfg, inputs, {runs_path, csv_path});
  return all_ok ? 0 : 1;
}

}  // namespace safeess::cli
