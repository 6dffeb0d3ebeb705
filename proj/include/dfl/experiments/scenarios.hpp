// Copyright 2026 The dfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Configured experiment runs. Each scenario resolves an ExperimentConfig from
// key=value pairs (with scenario defaults), then produces tables and a JSON
// summary. Hierarchy breaches are collected in `violations`.

#pragma once

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfl/bounds.hpp"
#include "dfl/classical_sme.hpp"
#include "dfl/controllers.hpp"
#include "dfl/experiments/config.hpp"
#include "dfl/experiments/output.hpp"
#include "dfl/sme_engine.hpp"

namespace dfl::experiments {

struct Numerics {
  double dt = 1e-3;
  double t_final = 10.0;
  double burn_in = -1.0;
  int trajectories = 100;
  std::uint64_t seed = 1;
  int record_stride = 1000;
  sme::UpdateForm form = sme::UpdateForm::kraus;
  double classical_dt = 1e-3;
  int realizations = 400;
  classical::InitialProfile classical_initial = classical::InitialProfile::coherent_equator;
  int positivity_stride = 1000;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::bounds_table;
  bool full_scale = false;

  // physics
  int n_atoms = 1;
  std::string m_target = "max";
  std::vector<std::string> m_targets;  // bounds ("all") and n4-sweep cells
  double gamma = 0.0;
  std::vector<double> gammas;
  double kappa = 0.4;
  std::vector<double> kappas;
  double u_max = 1.0;
  bool gamma_over_n = false;
  bool kappa_over_n = false;
  std::vector<int> n_grid;

  // markovian
  std::vector<double> windows;  // gamma * window values
  int steps_per_window = 5;

  // trajectory dump
  std::string controller = "op";
  std::uint64_t stream = 0;

  double mc_sigma = 3.0;  // Monte Carlo slack (in combined stderr) for B_DS comparisons
  Numerics num;

  nlohmann::json echo() const {
    nlohmann::json j;
    j["scenario"] = scenario_name(scenario);
    j["full_scale"] = full_scale;
    j["n_atoms"] = n_atoms;
    j["m_target"] = m_target;
    j["m_targets"] = m_targets;
    j["gamma"] = gamma;
    j["gammas"] = gammas;
    j["kappa"] = kappa;
    j["kappas"] = kappas;
    j["u_max"] = u_max;
    j["gamma_over_n"] = gamma_over_n;
    j["kappa_over_n"] = kappa_over_n;
    j["n_grid"] = n_grid;
    j["windows"] = windows;
    j["steps_per_window"] = steps_per_window;
    j["controller"] = controller;
    j["stream"] = stream;
    j["mc_sigma"] = mc_sigma;
    j["dt"] = num.dt;
    j["t_final"] = num.t_final;
    j["burn_in"] = num.burn_in;
    j["trajectories"] = num.trajectories;
    j["seed"] = num.seed;
    j["record_stride"] = num.record_stride;
    j["update_form"] = num.form == sme::UpdateForm::kraus ? "kraus" : "euler";
    j["classical_dt"] = num.classical_dt;
    j["realizations"] = num.realizations;
    j["positivity_stride"] = num.positivity_stride;
    return j;
  }
};

namespace detail {

inline std::vector<int> to_ints(const std::vector<double>& xs, const char* key) {
  std::vector<int> out;
  for (double x : xs) {
    if (x != std::round(x) || x < 1) throw UsageError(std::string(key) + ": expected positive integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

inline classical::InitialProfile parse_profile(const std::string& s) {
  if (s == "coherent_equator") return classical::InitialProfile::coherent_equator;
  if (s == "uniform") return classical::InitialProfile::uniform;
  if (s == "random_coherent") return classical::InitialProfile::random_coherent;
  throw UsageError("classical_initial: expected coherent_equator|uniform|random_coherent, got '" + s + "'");
}

}  // namespace detail

/// Resolves scenario defaults (desk scale unless full_scale) and overrides.
inline ExperimentConfig resolve_config(Scenario scenario, const KeyValueConfig& kv) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.full_scale = kv.get_bool("full_scale", false);
  const bool full = c.full_scale;
  auto& n = c.num;

  // Scenario defaults.
  switch (scenario) {
    case Scenario::bounds_table:
      c.n_grid = {1, 2, 4, 6};
      c.gammas = {0.1, 0.5, 1.0, 2.0};
      c.m_targets = {"all"};
      break;
    case Scenario::qubit_sweep:
      c.n_atoms = 1;
      c.gammas = {0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
      n.trajectories = full ? 2000 : 500;
      n.t_final = 10.0;
      break;
    case Scenario::n4_sweep:
      c.n_atoms = 4;
      c.m_targets = {"max", "zero"};
      c.kappas = {0.4, 2.0};
      c.gammas = {0.05, 0.1, 0.2, 0.3};
      n.trajectories = full ? 500 : 100;
      n.t_final = 30.0;
      break;
    case Scenario::n_scaling:
      c.n_grid = {1, 2, 4, 6};
      c.gamma = 0.8;
      c.gamma_over_n = true;
      c.kappa_over_n = true;
      n.trajectories = full ? 1000 : 100;
      n.t_final = 30.0;
      break;
    case Scenario::markovian_qubit:
      c.n_atoms = 1;
      c.gamma = 1.0;
      c.windows = {0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
      n.trajectories = full ? 2000 : 500;
      n.t_final = 10.0;
      break;
    case Scenario::gamma_zero:
      c.n_atoms = 4;
      n.trajectories = full ? 10000 : 500;
      n.t_final = 20.0;
      n.record_stride = 250;
      break;
    case Scenario::classical_bds:
      c.n_atoms = 1;
      c.gamma = 0.5;
      n.t_final = 20.0;
      n.realizations = full ? 10000 : 2000;
      break;
    case Scenario::trajectory:
      c.n_atoms = 1;
      c.gamma = 0.5;
      n.trajectories = 1;
      n.record_stride = 10;
      break;
  }

  c.n_atoms = static_cast<int>(kv.get_int("n_atoms", c.n_atoms));
  if (c.n_atoms < 1) throw UsageError("n_atoms must be >= 1");
  c.m_target = kv.get_string("m_target", c.m_target);
  c.m_targets = kv.get_strings("m_targets", c.m_targets);
  c.gamma = kv.get_double("gamma", c.gamma);
  c.gammas = kv.get_doubles("gammas", c.gammas.empty() ? std::vector<double>{c.gamma} : c.gammas);
  c.kappa = kv.get_double("kappa", c.kappa);
  c.kappas = kv.get_doubles("kappas", c.kappas.empty() ? std::vector<double>{c.kappa} : c.kappas);
  c.u_max = kv.get_double("u_max", c.u_max);
  c.gamma_over_n = kv.get_bool("gamma_over_n", c.gamma_over_n);
  c.kappa_over_n = kv.get_bool("kappa_over_n", c.kappa_over_n);
  if (!c.n_grid.empty() || kv.has("n_grid")) {
    c.n_grid = detail::to_ints(kv.get_doubles("n_grid", std::vector<double>(c.n_grid.begin(), c.n_grid.end())), "n_grid");
  }
  c.windows = kv.get_doubles("windows", c.windows.empty() ? std::vector<double>{0.1} : c.windows);
  c.steps_per_window = static_cast<int>(kv.get_int("steps_per_window", c.steps_per_window));
  c.controller = kv.get_string("controller", c.controller);
  c.stream = kv.get_u64("stream", c.stream);
  c.mc_sigma = kv.get_double("mc_sigma", c.mc_sigma);

  n.dt = kv.get_double("dt", n.dt);
  n.t_final = kv.get_double("t_final", n.t_final);
  n.burn_in = kv.get_double("burn_in", n.burn_in);
  n.trajectories = static_cast<int>(kv.get_int("trajectories", n.trajectories));
  n.seed = kv.get_u64("seed", n.seed);
  n.record_stride = static_cast<int>(kv.get_int("record_stride", n.record_stride));
  const std::string form = kv.get_string("update_form", "kraus");
  if (form == "kraus") {
    n.form = sme::UpdateForm::kraus;
  } else if (form == "euler") {
    n.form = sme::UpdateForm::euler_maruyama;
  } else {
    throw UsageError("update_form: expected kraus|euler, got '" + form + "'");
  }
  n.classical_dt = kv.get_double("classical_dt", n.dt);
  n.realizations = static_cast<int>(kv.get_int("realizations", scenario == Scenario::classical_bds
                                                                       ? n.realizations
                                                                       : std::max(400, 4 * n.trajectories)));
  n.classical_initial = detail::parse_profile(kv.get_string("classical_initial", "coherent_equator"));
  n.positivity_stride = static_cast<int>(kv.get_int("positivity_stride", n.positivity_stride));

  if (!(n.dt > 0.0) || !(n.t_final > 0.0) || !(n.classical_dt > 0.0)) throw UsageError("dt, t_final must be > 0");
  if (n.trajectories < 1 || n.realizations < 2) throw UsageError("trajectories >= 1 and realizations >= 2 required");
  if (n.record_stride < 1) throw UsageError("record_stride must be >= 1");
  if (c.steps_per_window < 1) throw UsageError("steps_per_window must be >= 1");
  if (!(c.u_max >= 0.0)) throw UsageError("u_max must be >= 0");
  if (!(c.mc_sigma >= 0.0)) throw UsageError("mc_sigma must be >= 0");
  for (double g : c.gammas) {
    if (!(g >= 0.0)) throw UsageError("gammas must be >= 0");
  }
  for (double k : c.kappas) {
    if (!(k >= 0.0)) throw UsageError("kappas must be >= 0");
  }
  if (!(c.gamma >= 0.0 && c.kappa >= 0.0)) throw UsageError("gamma, kappa must be >= 0");
  for (double w : c.windows) {
    if (!(w > 0.0)) throw UsageError("windows must be > 0");
  }
  return c;
}

struct ScenarioResult {
  std::vector<std::pair<std::string, Table>> tables;  // file name -> table
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> violations;
};

// ---------------------------------------------------------------------------
// Shared building blocks.

/// SME model for Dicke control: homodyne sqrt(kappa) Jz, heterodyne sqrt(gamma) J-.
inline sme::TrajectoryModel dicke_trajectory_model(int n_atoms, HalfInt m_t, double gamma, double kappa,
                                                   double u_max) {
  const auto sys = spin::build_system(n_atoms);
  sme::TrajectoryModel m{{sme::MonitoringChannel::homodyne(std::sqrt(kappa) * sys.jz),
                          sme::MonitoringChannel::heterodyne(std::sqrt(gamma) * sys.jminus)},
                         sys.dicke_state(m_t),
                         sme::RandomCoherentState{n_atoms},
                         0.0};
  const double nn = static_cast<double>(n_atoms);
  m.fastest_rate = std::max({gamma * nn * nn, kappa * nn * nn, u_max * std::sqrt(nn)});
  return m;
}

inline sme::SMEConfig sme_config(const Numerics& n) {
  sme::SMEConfig s;
  s.dt = n.dt;
  s.t_final = n.t_final;
  s.burn_in = n.burn_in;
  s.n_trajectories = n.trajectories;
  s.master_seed = n.seed;
  s.record_stride = n.record_stride;
  s.form = n.form;
  s.positivity_stride = n.positivity_stride;
  return s;
}

inline classical::ClassicalConfig classical_config(const Numerics& n, double gamma, double kappa, double u_max) {
  classical::ClassicalConfig c;
  c.gamma = gamma;
  c.kappa = kappa;
  c.u_max = u_max;
  c.dt = n.classical_dt;
  c.t_final = n.t_final;
  c.burn_in = n.burn_in;
  c.n_realizations = n.realizations;
  // Realizations use a disjoint seed so they are not paired with trajectories.
  c.master_seed = n.seed ^ 0x5EEDC1A551CA1ULL;
  c.record_stride = std::max(1, static_cast<int>(std::lround(n.record_stride * n.dt / n.classical_dt)));
  c.initial = n.classical_initial;
  return c;
}

struct ControlledPoint {
  double f_op = 0, f_op_err = 0, f_fp = 0, f_fp_err = 0;
  double b_ds = 0, b_ds_err = 0;
  double min_eigenvalue = 0;
  double max_clamp = 0;
  bounds::BoundReport report;
};

/// OP and FP ensembles with Euclidean weights, the B_DS estimate and all analytic bounds.
inline ControlledPoint controlled_point(int n_atoms, HalfInt m_t, double gamma, double kappa, double u_max,
                                        const Numerics& num, bool run_fp = true) {
  ControlledPoint p;
  const auto sys = spin::build_system(n_atoms);
  const auto model = dicke_trajectory_model(n_atoms, m_t, gamma, kappa, u_max);
  const auto cfg = sme_config(num);
  const auto w = control::euclidean_weights(sys.l, m_t);
  const auto op = sme::run_ensemble(model, control::LocalCostController(sys, w, u_max, control::PhaseMode::optimized), cfg);
  p.f_op = op.steady_state_mean;
  p.f_op_err = op.steady_state_stderr;
  p.min_eigenvalue = op.min_eigenvalue;
  if (run_fp) {
    const auto fp = sme::run_ensemble(model, control::LocalCostController(sys, w, u_max, control::PhaseMode::fixed), cfg);
    p.f_fp = fp.steady_state_mean;
    p.f_fp_err = fp.steady_state_stderr;
    p.min_eigenvalue = std::min(p.min_eigenvalue, fp.min_eigenvalue);
  } else {
    p.f_fp = p.f_fp_err = std::nan("");
  }
  const auto bds = classical::estimate_bds(classical_config(num, gamma, kappa, u_max), sys.l, m_t);
  p.b_ds = bds.bds;
  p.b_ds_err = bds.bds_stderr;
  p.max_clamp = bds.max_clamp;
  p.report = bounds::dicke_bound_report(bounds::dicke_model(n_atoms, m_t, gamma, kappa), u_max);
  return p;
}

inline void check_hierarchy(const std::string& where, const bounds::BoundReport& r, double b_ds, double b_ds_err,
                            double sigma, std::vector<std::string>& violations) {
  if (!r.hierarchy_holds(1e-12)) {
    violations.push_back(where + ": analytic hierarchy B_D <= B_QSL <= B_KY violated");
  }
  if (r.b_d && b_ds > *r.b_d + sigma * b_ds_err + 1e-12) {
    violations.push_back(where + ": B_DS=" + format_double(b_ds) + " exceeds B_D=" + format_double(*r.b_d) +
                         " beyond Monte Carlo slack");
  }
}

inline void note_positivity(double min_eig, nlohmann::json& summary, const std::string& where) {
  if (min_eig < -1e-6) {
    std::clog << "warning: " << where << ": conditional state eigenvalue " << min_eig << " below -1e-6\n";
    summary["positivity_warnings"].push_back(where);
  }
}

inline double effective_rate(double value, bool over_n, int n_atoms) { return over_n ? value / n_atoms : value; }

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"gamma", "F_OP", "F_OP_err", "F_FP", "F_FP_err", "B_DS",
                                             "B_DS_err", "B_D", "B_QSL", "B_KY"};
  return cols;
}

inline std::vector<double> sweep_row(double gamma, const ControlledPoint& p) {
  return {gamma, p.f_op, p.f_op_err, p.f_fp, p.f_fp_err, p.b_ds, p.b_ds_err, p.report.b_d.value_or(std::nan("")),
          p.report.b_qsl, p.report.b_ky};
}

// ---------------------------------------------------------------------------
// Scenarios.

inline ScenarioResult run_bounds_table(const ExperimentConfig& c) {
  ScenarioResult res;
  Table t;
  t.columns = {"N", "m_T", "gamma", "kappa", "delta_c_sq", "A_star", "B_star", "delta_E", "B_QSL", "B_KY", "B_D",
               "B_QSL_closed_form"};
  const bool all = c.m_targets.size() == 1 && c.m_targets[0] == "all";
  for (int n : c.n_grid) {
    std::vector<HalfInt> targets;
    const HalfInt l = HalfInt::from_twice(n);
    if (all) {
      for (HalfInt m = -l; m <= l; m = m + 1) targets.push_back(m);
    } else {
      for (const auto& s : c.m_targets) targets.push_back(resolve_m_target(s, n));
    }
    for (HalfInt m : targets) {
      for (double g0 : c.gammas) {
        for (double k0 : c.kappas) {
          const double g = effective_rate(g0, c.gamma_over_n, n);
          const double k = effective_rate(k0, c.kappa_over_n, n);
          const auto r = bounds::dicke_bound_report(bounds::dicke_model(n, m, g, k), c.u_max);
          double closed = std::nan("");
          if (c.u_max > 0.0) {
            if (m == l) closed = bounds::qsl_bound_max_excited(n, g / c.u_max);
            else if (m.twice() == 0) closed = bounds::qsl_bound_entangled(n, g / c.u_max);
          }
          t.add_row({double(n), m.value(), g, k, r.inputs.delta_c_sq, r.inputs.a_star, r.inputs.b_star,
                     r.inputs.delta_e, r.b_qsl, r.b_ky, *r.b_d, closed});
          const std::string where = "N=" + std::to_string(n) + " m_T=" + m.str() + " gamma=" + format_short(g);
          check_hierarchy(where, r, 0.0, 0.0, 0.0, res.violations);
          if ((r.inputs.delta_c_sq == 0.0) != (r.b_qsl == 1.0)) {
            res.violations.push_back(where + ": B_QSL = 1 must hold exactly when delta_c^2 = 0");
          }
          if (!std::isnan(closed) && std::abs(closed - r.b_qsl) > 1e-12) {
            res.violations.push_back(where + ": general B_QSL disagrees with the closed form");
          }
        }
      }
    }
  }
  res.summary["rows"] = t.rows.size();
  res.tables.emplace_back("bounds.csv", std::move(t));
  return res;
}

inline ScenarioResult run_qubit_sweep(const ExperimentConfig& c) {
  ScenarioResult res;
  Table t;
  t.columns = sweep_columns();
  const HalfInt m_t = resolve_m_target(c.m_target, 1);
  for (double g : c.gammas) {
    const auto p = controlled_point(1, m_t, g, c.kappa, c.u_max, c.num);
    t.add_row(sweep_row(g, p));
    const std::string where = "gamma=" + format_short(g);
    check_hierarchy(where, p.report, p.b_ds, p.b_ds_err, c.mc_sigma, res.violations);
    note_positivity(p.min_eigenvalue, res.summary, where);
  }
  res.summary["kappa"] = c.kappa;
  res.summary["m_target"] = m_t.value();
  res.tables.emplace_back("qubit_sweep.csv", std::move(t));
  return res;
}

inline ScenarioResult run_n4_sweep(const ExperimentConfig& c) {
  ScenarioResult res;
  Table all;
  all.columns = {"m_T", "kappa"};
  for (const auto& col : sweep_columns()) all.columns.push_back(col);
  for (const auto& ms : c.m_targets) {
    const HalfInt m_t = resolve_m_target(ms, c.n_atoms);
    for (double k : c.kappas) {
      Table cell;
      cell.columns = sweep_columns();
      for (double g : c.gammas) {
        const auto p = controlled_point(c.n_atoms, m_t, g, k, c.u_max, c.num);
        auto row = sweep_row(g, p);
        cell.add_row(row);
        row.insert(row.begin(), {m_t.value(), k});
        all.add_row(row);
        const std::string where = "m_T=" + m_t.str() + " kappa=" + format_short(k) + " gamma=" + format_short(g);
        check_hierarchy(where, p.report, p.b_ds, p.b_ds_err, c.mc_sigma, res.violations);
        note_positivity(p.min_eigenvalue, res.summary, where);
      }
      res.tables.emplace_back("n4_sweep_mT" + format_short(m_t.value()) + "_kappa" + format_short(k) + ".csv",
                              std::move(cell));
    }
  }
  res.tables.insert(res.tables.begin(), {"n4_sweep.csv", std::move(all)});
  return res;
}

inline ScenarioResult run_n_scaling(const ExperimentConfig& c) {
  ScenarioResult res;
  Table t;
  t.columns = {"N", "m_T", "gamma", "kappa", "F_OP", "F_OP_err", "F_FP", "F_FP_err", "B_DS", "B_DS_err", "B_D", "B_QSL"};
  for (int n : c.n_grid) {
    const HalfInt m_t = resolve_m_target(c.m_target, n);
    const double g = effective_rate(c.gamma, c.gamma_over_n, n);
    const double k = effective_rate(c.kappa, c.kappa_over_n, n);
    const auto p = controlled_point(n, m_t, g, k, c.u_max, c.num);
    t.add_row({double(n), m_t.value(), g, k, p.f_op, p.f_op_err, p.f_fp, p.f_fp_err, p.b_ds, p.b_ds_err,
               p.report.b_d.value_or(std::nan("")), p.report.b_qsl});
    const std::string where = "N=" + std::to_string(n);
    check_hierarchy(where, p.report, p.b_ds, p.b_ds_err, c.mc_sigma, res.violations);
    note_positivity(p.min_eigenvalue, res.summary, where);
  }
  res.tables.emplace_back("n_scaling.csv", std::move(t));
  return res;
}

struct MarkovianPoint {
  double gamma_window = 0, infidelity = 0, stderr_ = 0, bound = 0, bound_substituted = 0;
};

/// Steady-state infidelity of the qubit under F = -sqrt(gamma) sigma_y feedback with the given window.
inline MarkovianPoint markovian_point(double gamma, double gamma_window, int steps_per_window, const Numerics& num) {
  if (!(gamma > 0.0)) throw UsageError("markovian-qubit: gamma must be > 0");
  const double window = gamma_window / gamma;
  if (window < num.dt * (1.0 - 1e-12)) throw DomainError("markovian-qubit: window shorter than dt");
  Numerics n = num;
  n.dt = window / steps_per_window;
  if (n.dt > num.dt * (1.0 + 1e-12)) {
    // Keep the step no coarser than the configured dt: use more steps per window.
    n.dt = window / std::ceil(window / num.dt - 1e-9);
  }
  const auto sys = spin::build_system(1);
  const auto excited = sys.dicke_state(sys.l);
  sme::TrajectoryModel model{{sme::MonitoringChannel::homodyne(std::sqrt(gamma) * sys.jminus)},
                             excited,
                             spin::DensityOperator::pure(excited),
                             gamma};
  auto cfg = sme_config(n);
  cfg.scheme = sme::HamiltonianScheme::exact_unitary;
  cfg.record_stride = std::max(1, static_cast<int>(std::lround(num.record_stride * num.dt / n.dt)));
  const auto st = sme::run_ensemble(model, control::markovian_qubit_controller(gamma, window), cfg);
  return {gamma_window, 1.0 - st.steady_state_mean, st.steady_state_stderr,
          bounds::markovian_qubit_infidelity_bound(gamma, window),
          bounds::markovian_qubit_infidelity_substituted(gamma, window)};
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need >= 2 matching points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("loglog_slope: values must be > 0");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

inline ScenarioResult run_markovian_qubit(const ExperimentConfig& c) {
  ScenarioResult res;
  Table t;
  t.columns = {"gamma_dt", "infidelity_sim", "stderr", "infidelity_bound", "infidelity_bound_substituted"};
  std::vector<double> xs, ys;
  for (double x : c.windows) {
    const auto p = markovian_point(c.gamma, x, c.steps_per_window, c.num);
    t.add_row({p.gamma_window, p.infidelity, p.stderr_, p.bound, p.bound_substituted});
    if (p.infidelity < p.bound - c.mc_sigma * p.stderr_) {
      res.violations.push_back("gamma*window=" + format_short(x) + ": simulated infidelity below the lower bound");
    }
    if (x <= 0.05) {
      xs.push_back(x);
      ys.push_back(p.infidelity);
    }
  }
  if (xs.size() >= 2) res.summary["small_window_loglog_slope"] = loglog_slope(xs, ys);
  res.summary["gamma"] = c.gamma;
  res.tables.emplace_back("markovian_qubit.csv", std::move(t));
  return res;
}

struct GammaZeroCurves {
  sme::EnsembleStats op, op_local;
  classical::BdsEstimate b_ds;
};

inline GammaZeroCurves gamma_zero_curves(int n_atoms, HalfInt m_t, double kappa, double u_max, const Numerics& num) {
  const auto sys = spin::build_system(n_atoms);
  const auto model = dicke_trajectory_model(n_atoms, m_t, 0.0, kappa, u_max);
  const auto cfg = sme_config(num);
  GammaZeroCurves out;
  out.op = sme::run_ensemble(
      model, control::LocalCostController(sys, control::euclidean_weights(sys.l, m_t), u_max, control::PhaseMode::optimized), cfg);
  out.op_local = sme::run_ensemble(
      model, control::LocalCostController(sys, control::infidelity_weights(sys.l, m_t), u_max, control::PhaseMode::optimized),
      cfg);
  auto cc = classical_config(num, 0.0, kappa, u_max);
  // Same initial directions as the quantum ensemble, realization i <-> trajectory i.
  cc.initial = classical::InitialProfile::random_coherent;
  cc.master_seed = num.seed;
  cc.n_realizations = std::max(2, num.trajectories);
  out.b_ds = classical::estimate_bds(cc, sys.l, m_t);
  return out;
}

inline ScenarioResult run_gamma_zero(const ExperimentConfig& c) {
  ScenarioResult res;
  const HalfInt m_t = resolve_m_target(c.m_target, c.n_atoms);
  Numerics num = c.num;
  num.classical_dt = num.dt;  // curves share one time grid
  const auto g = gamma_zero_curves(c.n_atoms, m_t, c.kappa, c.u_max, num);
  Table t;
  t.columns = {"t", "F_OP", "F_OP_err", "F_OP_local", "F_OP_local_err", "B_DS", "B_DS_err"};
  for (std::size_t i = 0; i < g.op.times.size(); ++i) {
    t.add_row({g.op.times[i], g.op.mean_fidelity[i], g.op.stderr_fidelity[i], g.op_local.mean_fidelity[i],
               g.op_local.stderr_fidelity[i], g.b_ds.curve[i], g.b_ds.curve_stderr[i]});
    const double slack_op = c.mc_sigma * std::hypot(g.op.stderr_fidelity[i], g.b_ds.curve_stderr[i]);
    const double slack_loc = c.mc_sigma * std::hypot(g.op_local.stderr_fidelity[i], g.b_ds.curve_stderr[i]);
    if (g.op.mean_fidelity[i] > g.b_ds.curve[i] + slack_op || g.op_local.mean_fidelity[i] > g.b_ds.curve[i] + slack_loc) {
      res.violations.push_back("t=" + format_short(g.op.times[i]) + ": a controller curve exceeds B_DS(t)");
    }
  }
  res.summary["plateau_op"] = g.op.steady_state_mean;
  res.summary["plateau_op_err"] = g.op.steady_state_stderr;
  res.summary["plateau_op_local"] = g.op_local.steady_state_mean;
  res.summary["plateau_op_local_err"] = g.op_local.steady_state_stderr;
  res.summary["plateau_b_ds"] = g.b_ds.bds;
  res.summary["plateau_b_ds_err"] = g.b_ds.bds_stderr;
  res.tables.emplace_back("gamma_zero.csv", std::move(t));
  return res;
}

inline ScenarioResult run_classical_bds(const ExperimentConfig& c) {
  ScenarioResult res;
  const HalfInt m_t = resolve_m_target(c.m_target, c.n_atoms);
  const HalfInt l = HalfInt::from_twice(c.n_atoms);
  const double g = effective_rate(c.gamma, c.gamma_over_n, c.n_atoms);
  const double k = effective_rate(c.kappa, c.kappa_over_n, c.n_atoms);
  auto cc = classical_config(c.num, g, k, c.u_max);
  cc.master_seed = c.num.seed;
  const auto est = classical::estimate_bds(cc, l, m_t);
  Table t;
  t.columns = {"t", "mean_a_mT", "stderr"};
  for (std::size_t i = 0; i < est.times.size(); ++i) t.add_row({est.times[i], est.curve[i], est.curve_stderr[i]});
  const double b_d = bounds::dicke_bound(l, m_t, g, c.u_max);
  res.summary["bds"] = est.bds;
  res.summary["stderr"] = est.bds_stderr;
  res.summary["B_D"] = b_d;
  res.summary["max_overshoot"] = est.max_clamp;
  if (est.bds > b_d + c.mc_sigma * est.bds_stderr + 1e-12) {
    res.violations.push_back("B_DS=" + format_double(est.bds) + " exceeds B_D=" + format_double(b_d));
  }
  res.tables.emplace_back("classical_bds.csv", std::move(t));
  return res;
}

inline ScenarioResult run_trajectory_dump(const ExperimentConfig& c) {
  ScenarioResult res;
  const HalfInt m_t = resolve_m_target(c.m_target, c.n_atoms);
  const auto sys = spin::build_system(c.n_atoms);
  const auto model = dicke_trajectory_model(c.n_atoms, m_t, c.gamma, c.kappa, c.u_max);
  auto cfg = sme_config(c.num);
  cfg.record_photocurrents = true;
  sme::TrajectoryRecord rec;
  if (c.controller == "op" || c.controller == "fp" || c.controller == "op_local") {
    const auto w = c.controller == "op_local" ? control::infidelity_weights(sys.l, m_t) : control::euclidean_weights(sys.l, m_t);
    const auto mode = c.controller == "fp" ? control::PhaseMode::fixed : control::PhaseMode::optimized;
    rec = sme::run_trajectory(model, control::LocalCostController(sys, w, c.u_max, mode), cfg, c.stream);
  } else if (c.controller == "none") {
    rec = sme::run_trajectory(model, sme::StaticHamiltonian::zero(sys.dim()), cfg, c.stream);
  } else {
    throw UsageError("controller: expected op|fp|op_local|none, got '" + c.controller + "'");
  }
  res.summary["steady_state_mean"] = rec.steady_state_mean;
  res.summary["final_fidelity"] = rec.fidelities.back();
  res.summary["stream"] = c.stream;
  res.tables.emplace_back("trajectory.csv", trajectory_table(rec));
  return res;
}

inline ScenarioResult run_scenario(const ExperimentConfig& c) {
  switch (c.scenario) {
    case Scenario::bounds_table: return run_bounds_table(c);
    case Scenario::qubit_sweep: return run_qubit_sweep(c);
    case Scenario::n4_sweep: return run_n4_sweep(c);
    case Scenario::n_scaling: return run_n_scaling(c);
    case Scenario::markovian_qubit: return run_markovian_qubit(c);
    case Scenario::gamma_zero: return run_gamma_zero(c);
    case Scenario::classical_bds: return run_classical_bds(c);
    case Scenario::trajectory: return run_trajectory_dump(c);
  }
  throw UsageError("unknown scenario");
}

/// Opens the output directory and writes the manifest.
inline RunWriter open_run(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  nlohmann::json manifest;
  manifest["config"] = c.echo();
  manifest["master_seed"] = c.num.seed;
  return RunWriter(out_dir, manifest);
}

/// Writes the tables and summary.json. Throws InvariantViolation after
/// writing when any check failed, so the failing data stays inspectable.
inline ScenarioResult publish(const ExperimentConfig& c, RunWriter& writer, ScenarioResult res) {
  for (const auto& [name, table] : res.tables) writer.write_csv(name, table);
  res.summary["scenario"] = scenario_name(c.scenario);
  res.summary["violations"] = res.violations;
  writer.write_json("summary.json", res.summary);
  if (!res.violations.empty()) {
    std::string msg = "invariant violations:";
    for (const auto& v : res.violations) msg += "\n  " + v;
    throw InvariantViolation(msg);
  }
  return res;
}

/// Writes manifest.json, runs the scenario, then publishes its outputs.
inline ScenarioResult execute(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  RunWriter writer = open_run(c, out_dir);
  return publish(c, writer, run_scenario(c));
}

}  // namespace dfl::experiments
