/*
 * Copyright (C) 2026 The seitphr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: simulate, optimize, mpc, sweep and scenario.
// Exit codes: 0 success, 2 infeasible, 3 solver nonconvergence, 4 configuration error.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seitphr/seitphr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace seitphr;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kInfeasible = 2, kNonConvergence = 3, kConfig = 4 };

struct Globals {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<double> step;
  std::optional<std::size_t> horizon_weeks;
  std::size_t workers = 0;
  bool plots = false;
};

RunConfig load(const Globals& g) {
  RunConfig c;
  if (!g.config_path.empty()) c = apply_config(load_config_file(g.config_path));
  if (g.step) c.step_days = *g.step;
  if (g.horizon_weeks) c.horizon_weeks = *g.horizon_weeks;
  if (g.plots) c.plots = true;
  return c;
}

/// Collects the files and manifest of one run directory.
class RunWriter {
 public:
  RunWriter(fs::path dir, std::string command, const RunConfig& c) : dir_(std::move(dir)), config_(c) {
    manifest_["tool"] = "seitphr";
    manifest_["version"] = std::string(kVersion);
    manifest_["command"] = std::move(command);
    manifest_["deterministic"] = true;
    json cfg = json::object();
    for (const auto& [k, v] : parse_config_text(echo_config(c))) cfg[k] = v;
    manifest_["config"] = cfg;
    manifest_["tolerances"] = tolerances_json(solve_options(c).nlp);
    manifest_["files"] = json::array();
  }

  json& manifest() { return manifest_; }

  void file(const std::string& name, const std::string& text) {
    write_text_file(dir_ / name, text);
    manifest_["files"].push_back(name);
  }

  void trajectory(const std::string& stem, const Trajectory& t) { file(stem + "_trajectory.csv", trajectory_csv(t)); }

  void policy(const std::string& stem, const PiecewisePolicy& p) { file(stem + "_policy.csv", policy_csv(p, config_.p)); }

  void plot(const std::string& name, std::string_view title, const std::vector<PlotSeries>& series,
            std::optional<double> reference = std::nullopt) {
    if (config_.plots) file(name, render_svg(title, "day", series, reference));
  }

  void finish() { write_text_file(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

 private:
  fs::path dir_;
  const RunConfig& config_;
  json manifest_;
};

PlotSeries icu_series(const std::string& label, const Trajectory& t) { return {label, t.times, t.icu_abs}; }

json solution_json(const OcpSolution& s) {
  return {{"status", std::string(to_string(s.status))},
          {"objective", s.objective},
          {"feasible", s.feasible()},
          {"peak_icu", s.trajectory.peak_icu()},
          {"terminal_r_ngm", s.trajectory.r_ngm.empty() ? 0.0 : s.trajectory.r_ngm.back()},
          {"diagnostics", diagnostics_json(s.diagnostics)}};
}

int exit_for(OcpStatus s) {
  switch (s) {
    case OcpStatus::Converged: return kOk;
    case OcpStatus::Infeasible: return kInfeasible;
    case OcpStatus::NonConvergence: return kNonConvergence;
  }
  return kFailure;
}

int exit_for(MpcStatus s) {
  switch (s) {
    case MpcStatus::Completed: return kOk;
    case MpcStatus::Infeasible: return kInfeasible;
    case MpcStatus::NonConvergence: return kNonConvergence;
  }
  return kFailure;
}

std::string mpc_steps_csv(const MpcResult& r, const ModelParameters& p) {
  std::vector<std::string> header = {"step", "t_days", "horizon_weeks", "reused", "status", "objective", "iterations",
                                     "stationarity", "max_violation", "icu_abs", "t_tot", "delta"};
  for (std::size_t i = 1; i <= p.n_groups; ++i) header.push_back("theta_" + std::to_string(i));
  CsvWriter csv(header);
  for (const auto& s : r.steps) {
    std::vector<std::string> cells = {std::to_string(s.index),
                                      format_number(s.t_days),
                                      std::to_string(s.horizon_weeks),
                                      s.reused ? "1" : "0",
                                      std::string(to_string(s.status)),
                                      format_number(s.objective),
                                      std::to_string(s.diagnostics.iterations),
                                      format_number(s.diagnostics.stationarity),
                                      format_number(s.diagnostics.max_violation),
                                      format_number(s.icu_abs),
                                      format_number(s.t_tot)};
    const bool applied = s.applied.theta.size() > 0;
    cells.push_back(applied ? format_number(distancing_factor(s.applied.beta, p)) : "nan");
    for (std::size_t i = 0; i < p.n_groups; ++i) {
      cells.push_back(applied ? format_number(s.applied.theta[static_cast<Eigen::Index>(i)]) : "nan");
    }
    csv.add_row_text(cells);
  }
  return csv.text();
}

json mpc_json(const MpcRun& run) {
  json j = {{"k_weeks", run.k_weeks},
            {"status", std::string(to_string(run.result.status))},
            {"applied_weeks", run.result.applied.size()},
            {"distancing_cost", run.distancing_cost},
            {"peak_icu", run.result.trajectory.peak_icu()}};
  j["failed_step"] = run.result.failed_step ? json(*run.result.failed_step) : json(nullptr);
  j["first_cap_day"] = run.first_cap_day ? json(*run.first_cap_day) : json(nullptr);
  j["last_cap_day"] = run.last_cap_day ? json(*run.last_cap_day) : json(nullptr);
  return j;
}

// ------------------------------------------------------------- commands

int cmd_simulate(const Globals& g, double delta, bool one_group) {
  RunConfig c = load(g);
  if (one_group) c.p = aggregate_to_one_group(c.p);
  const std::size_t weeks = c.horizon_or(kDefaultWeeks);
  const auto policy = PiecewisePolicy::constant(distancing_control(c.p, delta), weeks, c.interval_days);
  const Trajectory t = simulate(initial_state(c.p, c.e0, c.i0), policy, c.p, static_cast<double>(weeks) * c.interval_days,
                                c.step_days);
  RunWriter w(g.out_dir, "simulate", c);
  w.trajectory("simulate", t);
  w.policy("simulate", policy);
  w.plot("simulate_icu.svg", "ICU occupancy", {icu_series("ICU", t)}, c.p.h_icu_max);
  w.manifest()["summary"] = {{"delta", delta},
                             {"peak_icu", t.peak_icu()},
                             {"peak_icu_day", t.peak_icu_day()},
                             {"herd_immunity_day", t.herd_immunity_day ? json(*t.herd_immunity_day) : json(nullptr)}};
  w.finish();
  return kOk;
}

int write_ocp(const Globals& g, const RunConfig& c, const OcpScenarioResult& r, const std::string& stem) {
  RunWriter w(g.out_dir, "optimize " + std::string(to_string(r.spec.kind)), c);
  const OcpSolution& s = r.solution;
  w.trajectory(stem, s.trajectory);
  w.policy(stem, s.policy);
  json summary = solution_json(s);
  summary["kind"] = std::string(to_string(r.spec.kind));
  summary["mean_contacts_nominal"] = mean_contact_rate(c.p.beta0, c.p.N);
  if (r.spec.kind == OcpKind::TestingOnly) {
    const TestingSummary t = summarize_testing(s, c.p);
    summary["testing"] = {{"active_begin_day", t.active_begin_day},
                          {"active_end_day", t.active_end_day},
                          {"peak_mean_rate", t.peak_mean_rate},
                          {"average_daily_tests", t.average_daily_tests},
                          {"turnpike_fraction", t.turnpike_fraction},
                          {"peak_detected_cases", t.peak_detected}};
  } else {
    const auto d = distancing_series(s.policy, c.p);
    summary["min_delta"] = *std::min_element(d.begin(), d.end());
  }
  if (r.seed) {
    w.policy(stem + "_seed", r.seed->policy);
    summary["seed"] = solution_json(*r.seed);
    summary["seed_objective_j3"] = r.seed_objective;
    const std::size_t week = most_restrictive_week(s.policy, c.p);
    const Eigen::VectorXd red = contact_reduction(s.policy.controls[week], c.p);
    summary["most_restrictive_week"] = week;
    summary["contact_reduction"] = std::vector<double>(red.data(), red.data() + red.size());
  }
  w.plot(stem + "_icu.svg", "ICU occupancy", {icu_series("ICU", s.trajectory)}, c.p.h_icu_max);
  w.manifest()["summary"] = summary;
  w.finish();
  return exit_for(s.status);
}

int cmd_optimize(const Globals& g, const std::string& kind) {
  const RunConfig c = load(g);
  const OcpKind k = parse_ocp_kind(kind);
  return write_ocp(g, c, scenario_ocp(c, k), "ocp_" + std::string(to_string(k)));
}

int write_mpc(RunWriter& w, const RunConfig& c, const MpcRun& run, const std::string& stem) {
  w.trajectory(stem, run.result.trajectory);
  w.policy(stem, run.result.applied);
  w.file(stem + "_steps.csv", mpc_steps_csv(run.result, c.p));
  w.plot(stem + "_icu.svg", "ICU occupancy", {icu_series("K=" + std::to_string(run.k_weeks), run.result.trajectory)},
         c.p.h_icu_max);
  return exit_for(run.result.status);
}

int cmd_mpc(const Globals& g, const std::string& kind, std::optional<std::size_t> k, std::optional<std::size_t> total) {
  RunConfig c = load(g);
  if (total) c.total_weeks = *total;
  if (k) c.k_weeks = *k;
  const OcpKind kk = parse_ocp_kind(kind);
  const MpcRun run = scenario_mpc(c, kk, c.k_weeks);
  RunWriter w(g.out_dir, "mpc " + std::string(to_string(kk)), c);
  const int code = write_mpc(w, c, run, "mpc_k" + std::to_string(run.k_weeks));
  w.manifest()["summary"] = mpc_json(run);
  w.finish();
  if (run.result.failed_step) {
    std::cerr << "mpc: recursive feasibility lost at step " << *run.result.failed_step << "\n";
  }
  return code;
}

int cmd_ladder(const Globals& g, const std::string& kind) {
  RunConfig c = load(g);
  const OcpKind kk = parse_ocp_kind(kind);
  const auto runs = scenario_mpc_ladder(c, kk, g.workers);
  RunWriter w(g.out_dir, "scenario mpc-ladder " + std::string(to_string(kk)), c);
  json rungs = json::array();
  std::vector<PlotSeries> series;
  int code = kOk;
  for (const auto& run : runs) {
    code = std::max(code, write_mpc(w, c, run, "mpc_k" + std::to_string(run.k_weeks)));
    rungs.push_back(mpc_json(run));
    series.push_back(icu_series("K=" + std::to_string(run.k_weeks), run.result.trajectory));
  }
  w.plot("mpc_ladder_icu.svg", "ICU occupancy by prediction horizon", series, c.p.h_icu_max);
  w.manifest()["summary"] = {{"kind", std::string(to_string(kk))}, {"runs", rungs}};
  w.finish();
  return code;
}

int write_sweep(const Globals& g, const RunConfig& c, const SweepResult& r, const std::string& name) {
  RunWriter w(g.out_dir, "sweep " + name, c);
  CsvWriter csv({"t_max_factor", "h_icu_max", "feasible", "distancing_cost", "total_tests", "min_test_utilisation",
                 "peak_icu"});
  for (const auto& pt : r.points) {
    csv.add_row({pt.t_max_factor, pt.h_icu_max, pt.feasible ? 1.0 : 0.0, pt.run.distancing_cost, pt.total_tests,
                 pt.min_test_utilisation, pt.run.result.trajectory.peak_icu()});
    const std::string stem = "sweep_t" + format_number(pt.t_max_factor) + "_h" + format_number(pt.h_icu_max);
    if (!pt.run.result.applied.controls.empty()) w.policy(stem, pt.run.result.applied);
  }
  w.file("sweep_" + name + ".csv", csv.text());
  json checks = json::object();
  bool all = true;
  for (const auto& [k, v] : r.checks) {
    checks[k] = v ? "pass" : "fail";
    all = all && v;
  }
  w.manifest()["checks"] = checks;
  w.finish();
  for (const auto& pt : r.points) {
    if (!pt.feasible) return kInfeasible;
  }
  return all ? kOk : kNonConvergence;
}

int write_delta_sweep(const Globals& g, const RunConfig& c, const ConstantDeltaResult& r) {
  RunWriter w(g.out_dir, "sweep delta", c);
  CsvWriter csv({"delta", "peak_icu", "peak_icu_day", "feasible"});
  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < r.deltas.size(); ++i) {
    const Trajectory& t = r.runs[i];
    csv.add_row({r.deltas[i], t.peak_icu(), t.peak_icu_day(), t.peak_icu() <= c.p.h_icu_max ? 1.0 : 0.0});
    w.trajectory("delta_" + format_number(r.deltas[i]), t);
    series.push_back(icu_series("delta=" + format_number(r.deltas[i]), t));
  }
  w.file("sweep_delta.csv", csv.text());
  json rebounds = json::array();
  for (const auto& rb : r.rebounds) {
    w.trajectory("lift_delta_" + format_number(rb.delta), rb.trajectory);
    rebounds.push_back({{"delta", rb.delta},
                        {"peak_before_lift", rb.peak_before},
                        {"peak_after_lift", rb.peak_after},
                        {"peak_after_lift_day", rb.peak_after_day}});
  }
  w.plot("sweep_delta_icu.svg", "ICU occupancy under constant distancing", series, c.p.h_icu_max);
  const bool rebound_order = r.rebounds.size() == 2 && r.rebounds[0].peak_after > r.rebounds[1].peak_after;
  w.manifest()["summary"] = {{"threshold_delta", r.threshold.delta},
                             {"first_infeasible_delta", r.threshold.infeasible_delta},
                             {"bisections", r.threshold.bisections},
                             {"rebounds", rebounds}};
  w.manifest()["checks"] = {{"stricter_delta_rebounds_higher", rebound_order ? "pass" : "fail"}};
  w.finish();
  return kOk;
}

int cmd_sweep(const Globals& g, const std::string& which) {
  const RunConfig c = load(g);
  if (which == "tmax") return write_sweep(g, c, sweep_tmax(c, g.workers), "tmax");
  if (which == "hmax") return write_sweep(g, c, sweep_hmax(c, g.workers), "hmax");
  return write_delta_sweep(g, c, scenario_constant_delta(c));
}

int cmd_baseline(const Globals& g) {
  const RunConfig c = load(g);
  const BaselineResult r = scenario_baseline(c);
  RunWriter w(g.out_dir, "scenario baseline", c);
  w.trajectory("baseline_groups", r.three_groups);
  w.trajectory("baseline_one_group", r.one_group);
  w.plot("baseline_icu.svg", "ICU occupancy without countermeasures",
         {icu_series("age groups", r.three_groups), icu_series("one group", r.one_group)}, c.p.h_icu_max);
  w.manifest()["summary"] = {{"groups_peak_icu", r.three_groups.peak_icu()},
                             {"groups_peak_icu_day", r.three_groups.peak_icu_day()},
                             {"one_group_peak_icu", r.one_group.peak_icu()},
                             {"one_group_peak_icu_day", r.one_group.peak_icu_day()}};
  w.finish();
  return kOk;
}

const std::vector<std::string> kScenarios = {"baseline",          "constant-delta",   "ocp-testing",
                                             "ocp-homogeneous",   "ocp-age-dependent", "mpc-homogeneous",
                                             "mpc-age-dependent", "sweep-tmax",        "sweep-hmax"};

int cmd_scenario(const Globals& g, const std::string& id) {
  if (id == "baseline") return cmd_baseline(g);
  if (id == "constant-delta") return cmd_sweep(g, "delta");
  if (id == "ocp-testing") return cmd_optimize(g, "testing");
  if (id == "ocp-homogeneous") return cmd_optimize(g, "homogeneous");
  if (id == "ocp-age-dependent") return cmd_optimize(g, "age-dependent");
  if (id == "mpc-homogeneous") return cmd_ladder(g, "homogeneous");
  if (id == "mpc-age-dependent") return cmd_ladder(g, "age-dependent");
  if (id == "sweep-tmax") return cmd_sweep(g, "tmax");
  return cmd_sweep(g, "hmax");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-structured epidemic simulation, optimal control and MPC"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--step", g.step, "integration step in days");
  app.add_option("--horizon-weeks", g.horizon_weeks, "horizon in weeks");
  app.add_option("--workers", g.workers, "sweep worker threads (0: hardware concurrency)");
  app.add_flag("--plots", g.plots, "also write SVG plots");

  int code = kOk;
  double delta = 1.0;
  bool one_group = false;
  auto* sim = app.add_subcommand("simulate", "constant homogeneous distancing, no tests");
  sim->add_option("--delta", delta, "distancing factor")->check(CLI::Range(0.0, 1.0));
  sim->add_flag("--one-group", one_group, "aggregate to a single group");
  sim->callback([&] { code = cmd_simulate(g, delta, one_group); });

  std::string kind;
  auto* opt = app.add_subcommand("optimize", "solve an optimal control problem");
  opt->add_option("kind", kind)->required()->check(CLI::IsMember({"testing", "homogeneous", "age-dependent"}));
  opt->callback([&] { code = cmd_optimize(g, kind); });

  std::string mpc_kind = "homogeneous";
  std::optional<std::size_t> k_weeks, total_weeks;
  auto* mpc = app.add_subcommand("mpc", "receding-horizon closed loop");
  mpc->add_option("kind", mpc_kind)->check(CLI::IsMember({"testing", "homogeneous", "age-dependent"}));
  mpc->add_option("-k,--k-weeks", k_weeks, "prediction horizon in intervals")->check(CLI::PositiveNumber);
  mpc->add_option("--total-weeks", total_weeks, "closed-loop length in intervals")->check(CLI::PositiveNumber);
  mpc->callback([&] { code = cmd_mpc(g, mpc_kind, k_weeks, total_weeks); });

  std::string sweep;
  auto* sw = app.add_subcommand("sweep", "sensitivity sweeps");
  sw->add_option("which", sweep)->required()->check(CLI::IsMember({"tmax", "hmax", "delta"}));
  sw->callback([&] { code = cmd_sweep(g, sweep); });

  std::string scenario;
  auto* sc = app.add_subcommand("scenario", "run a registered experiment");
  sc->add_option("id", scenario)->required()->check(CLI::IsMember(kScenarios));
  sc->callback([&] { code = cmd_scenario(g, scenario); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const StructuralError& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const BracketError& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return code;
}
