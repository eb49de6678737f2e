#include "olcsim/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "olcsim/olc.hpp"

#ifndef OLCSIM_DEFAULT_CASE_DIR
#define OLCSIM_DEFAULT_CASE_DIR "cases"
#endif

namespace olcsim {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_tol(double value, double tol) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << value << " (tol " << tol
     << ")";
  return os.str();
}

Eigen::VectorXd to_user_bus_order(const Network& net,
                                  const Eigen::VectorXd& internal) {
  Eigen::VectorXd out(internal.size());
  for (int u = 0; u < net.bus_count(); ++u) {
    out[u] = internal[net.internal_of_user(u)];
  }
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void warn_if_inconsistent_flows(const Scenario& scenario, const Network& net,
                                const InitialConditions& ic,
                                std::ostream& err) {
  if (scenario.initial.flows && !flows_consistent_with_angles(net, ic.flows)) {
    err << "warning: initial flows are not realizable by any angle vector; "
           "the flow limit will depend on this initialization\n";
  }
}

struct CaseResults {
  OlcSolution sol;
  Trajectory traj;
  EquilibriumReference reference;
};

CaseResults solve_and_simulate(const Scenario& scenario, const Network& net,
                               double warn_threshold, std::ostream& err) {
  CaseResults results;
  results.sol = solve_olc(net, warn_threshold);
  if (results.sol.frequency_warning) {
    err << "warning: |nu*| = " << std::abs(results.sol.nu_star)
        << " rad/s exceeds the linear-range threshold\n";
  }
  const InitialConditions ic = scenario.build_initial(net);
  warn_if_inconsistent_flows(scenario, net, ic, err);
  results.reference = make_equilibrium_reference(net, results.sol.nu_star,
                                                 results.sol.flows.point);
  results.traj = simulate(net, ic, scenario.integrator, &results.reference,
                          /*compute_kkt=*/true);
  return results;
}

}  // namespace

int guarded_run(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const nlohmann::json::parse_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitOutput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

const std::vector<std::string>& builtin_cases() {
  static const std::vector<std::string> cases = {
      "n1_tree",    "star4_tree",           "ring3_mesh",
      "ring3_consistent_init", "ring3_random_init", "zero_disturbance",
      "mesh68_synthetic"};
  return cases;
}

std::string resolve_case_path(const std::string& arg) {
  namespace fs = std::filesystem;
  if (fs::exists(arg)) return arg;
  const char* env = std::getenv("OLC_SIM_CASE_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(OLCSIM_DEFAULT_CASE_DIR);
  for (const fs::path& candidate : {dir / arg, dir / (arg + ".json")}) {
    if (fs::exists(candidate)) return candidate.string();
  }
  throw ParseError("scenario not found: " + arg);
}

nlohmann::ordered_json solution_document(const Network& net,
                                         const OlcSolution& sol) {
  nlohmann::ordered_json doc;
  doc["nu_star"] = sol.nu_star;
  doc["d_star"] = to_std(to_user_bus_order(net, sol.d_star));
  doc["d_hat_star"] = to_std(to_user_bus_order(net, sol.d_hat_star));
  doc["h_star"] = to_std(to_user_bus_order(net, sol.h_star));
  doc["flow_point"] = to_std(sol.flows.point);
  nlohmann::ordered_json basis = nlohmann::ordered_json::array();
  for (int k = 0; k < sol.flows.null_basis.cols(); ++k) {
    basis.push_back(to_std(sol.flows.null_basis.col(k)));
  }
  doc["null_basis"] = std::move(basis);
  doc["objective"] = sol.objective;
  return doc;
}

void write_trajectory_csv(std::ostream& out, const Network& net,
                          const Trajectory& traj) {
  out << "t";
  for (int u = 0; u < net.bus_count(); ++u) {
    out << ",omega_" << net.bus(net.internal_of_user(u)).id;
  }
  for (const Line& line : net.lines()) {
    out << ",P_" << line.from << "-" << line.to;
  }
  for (int u = 0; u < net.bus_count(); ++u) {
    out << ",d_" << net.bus(net.internal_of_user(u)).id;
  }
  for (int u = 0; u < net.bus_count(); ++u) {
    out << ",dhat_" << net.bus(net.internal_of_user(u)).id;
  }
  out << ",U,kkt_stationarity,kkt_sync\n";
  for (const TrajectorySample& s : traj.samples) {
    out << fmt17(s.time);
    const Eigen::VectorXd omega = to_user_bus_order(net, s.omega);
    for (int u = 0; u < omega.size(); ++u) out << "," << fmt17(omega[u]);
    for (int e = 0; e < s.flows.size(); ++e) out << "," << fmt17(s.flows[e]);
    const Eigen::VectorXd load = to_user_bus_order(net, s.load);
    for (int u = 0; u < load.size(); ++u) out << "," << fmt17(load[u]);
    const Eigen::VectorXd sens = to_user_bus_order(net, s.sensitive_load);
    for (int u = 0; u < sens.size(); ++u) out << "," << fmt17(sens[u]);
    out << "," << fmt17(s.lyapunov) << "," << fmt17(s.kkt_stationarity) << ","
        << fmt17(s.kkt_sync) << "\n";
  }
}

int CheckReport::failures() const {
  int count = 0;
  for (const CheckRow& row : rows) {
    if (row.status == CheckRow::Status::Fail) ++count;
  }
  return count;
}

CheckReport run_checks(const Scenario& scenario, double warn_threshold) {
  CheckReport report;
  const auto add = [&report](const std::string& name, bool pass,
                             const std::string& detail) {
    report.rows.push_back({name,
                           pass ? CheckRow::Status::Pass
                                : CheckRow::Status::Fail,
                           detail});
  };
  const auto not_applicable = [&report](const std::string& name,
                                        const std::string& why) {
    report.rows.push_back({name, CheckRow::Status::NotApplicable, why});
  };

  const Network net = scenario.build_network();
  std::ostringstream warnings;  // checks re-derive everything; keep quiet
  const CaseResults r =
      solve_and_simulate(scenario, net, warn_threshold, warnings);
  const bool sampled =
      scenario.integrator.controller == ControllerMode::Sampled;
  const InitialConditions ic = scenario.build_initial(net);
  const bool consistent = flows_consistent_with_angles(net, ic.flows);

  // Mode-aware trajectory tolerances; the theory rows keep 1e-9.
  const double freq_tol = sampled ? 1e-4 : 1e-6;
  const double load_tol = sampled ? 1e-3 : 1e-6;
  const double cost_tol = sampled ? 1e-3 : 1e-6;
  const double flow_tol = sampled ? 1e-4 : 1e-6;
  const double sync_tol = sampled ? 1e-4 : 2e-6;

  const double balance =
      std::abs(r.sol.d_star.sum() + r.sol.d_hat_star.sum() -
               net.total_disturbance());
  const double balance_tol =
      1e-9 * std::max(1.0, std::abs(net.total_disturbance()));
  add("balance at optimum", balance <= balance_tol,
      fmt_tol(balance, balance_tol));

  const double feasibility =
      (net.incidence().cast<double>() * r.sol.flows.point - r.sol.h_star)
          .lpNorm<Eigen::Infinity>();
  add("flow point feasible", feasibility <= 1e-9, fmt_tol(feasibility, 1e-9));

  const SystemState eq_state = assemble_state(
      net, 0.0,
      Eigen::VectorXd::Constant(net.generator_count(), r.sol.nu_star),
      r.sol.flows.point, scenario.integrator.algebraic_tol);
  const Derivatives eq_rhs = rhs(net, eq_state);
  const double rhs_norm =
      std::max(eq_rhs.omega_gen_dot.lpNorm<Eigen::Infinity>(),
               eq_rhs.flow_dot.lpNorm<Eigen::Infinity>());
  add("equilibrium is fixed point", rhs_norm <= 1e-9, fmt_tol(rhs_norm, 1e-9));

  const KktResiduals eq_kkt = kkt_residuals(net, eq_state);
  const double kkt_norm = std::max(eq_kkt.stationarity, eq_kkt.sync);
  add("equilibrium satisfies KKT", kkt_norm <= 1e-9, fmt_tol(kkt_norm, 1e-9));

  add("algebraic residual", r.traj.max_algebraic_residual <= 1e-9,
      fmt_tol(r.traj.max_algebraic_residual, 1e-9));
  add("energy accounting", r.traj.max_energy_residual <= 1e-9,
      fmt_tol(r.traj.max_energy_residual, 1e-9));

  const Eigen::VectorXd final_omega = r.traj.final_state.omega_full();
  const double freq_err =
      (final_omega.array() - r.sol.nu_star).abs().maxCoeff();
  add("frequency limit matches nu*", freq_err <= freq_tol,
      fmt_tol(freq_err, freq_tol));

  const double load_err = std::max(
      (r.traj.final_state.load - r.sol.d_star).lpNorm<Eigen::Infinity>(),
      (r.traj.final_state.sensitive_load - r.sol.d_hat_star)
          .lpNorm<Eigen::Infinity>());
  add("loads limit matches primal optimum", load_err <= load_tol,
      fmt_tol(load_err, load_tol));

  const double final_cost =
      olc_objective(net, r.traj.final_state.load,
                    r.traj.final_state.sensitive_load);
  const double cost_gap = std::abs(final_cost - r.sol.objective);
  add("cost converges to optimum", cost_gap <= cost_tol,
      fmt_tol(cost_gap, cost_tol));

  const double flow_residual =
      (net.incidence().cast<double>() * r.traj.final_state.flows -
       r.sol.h_star)
          .lpNorm<Eigen::Infinity>();
  add("limit lies in equilibrium flow set", flow_residual <= flow_tol,
      fmt_tol(flow_residual, flow_tol));

  const double sync_err = kkt_residuals(net, r.traj.final_state).sync;
  add("frequency sync at horizon", sync_err <= sync_tol,
      fmt_tol(sync_err, sync_tol));

  const double point_err = (r.traj.final_state.flows - r.sol.flows.point)
                               .lpNorm<Eigen::Infinity>();
  if (net.is_tree()) {
    add("tree limit unique", point_err <= flow_tol,
        fmt_tol(point_err, flow_tol));
    not_applicable("mesh limit matches projection", "network is a tree");
  } else {
    not_applicable("tree limit unique", "network is a mesh");
    if (consistent) {
      add("mesh limit matches projection", point_err <= flow_tol,
          fmt_tol(point_err, flow_tol));
    } else {
      not_applicable("mesh limit matches projection",
                     "initial flows violate the angle form");
    }
  }

  if (!sampled) {
    add("lyapunov monotone", r.traj.max_lyapunov_increase <= 1e-8,
        fmt_tol(r.traj.max_lyapunov_increase, 1e-8));
    if (net.is_tree() || consistent) {
      add("lyapunov final value", r.traj.final_lyapunov <= 1e-10,
          fmt_tol(r.traj.final_lyapunov, 1e-10));
    } else {
      not_applicable("lyapunov final value",
                     "reference differs from the trajectory limit");
    }
    add("converges to a point", r.traj.max_tail_variation <= 1e-8,
        fmt_tol(r.traj.max_tail_variation, 1e-8));
  } else {
    not_applicable("lyapunov monotone", "sampled controller");
    not_applicable("lyapunov final value", "sampled controller");
    not_applicable("converges to a point", "sampled controller");
  }

  return report;
}

int cmd_solve(const Scenario& scenario, double warn_threshold,
              std::ostream& out, std::ostream& err) {
  const Network net = scenario.build_network();
  const OlcSolution sol = solve_olc(net, warn_threshold);
  if (sol.frequency_warning) {
    err << "warning: |nu*| = " << std::abs(sol.nu_star)
        << " rad/s exceeds the linear-range threshold\n";
  }
  out << solution_document(net, sol).dump(2) << "\n";
  return kExitOk;
}

int cmd_simulate(const Scenario& scenario, const std::string& out_path,
                 double warn_threshold, std::ostream& out, std::ostream& err) {
  const Network net = scenario.build_network();
  const OlcSolution sol = solve_olc(net, warn_threshold);
  if (sol.frequency_warning) {
    err << "warning: |nu*| = " << std::abs(sol.nu_star)
        << " rad/s exceeds the linear-range threshold\n";
  }
  const InitialConditions ic = scenario.build_initial(net);
  warn_if_inconsistent_flows(scenario, net, ic, err);

  EquilibriumReference reference;
  const EquilibriumReference* ref = nullptr;
  if (scenario.analysis.lyapunov) {
    reference = make_equilibrium_reference(net, sol.nu_star, sol.flows.point);
    ref = &reference;
  }
  const Trajectory traj =
      simulate(net, ic, scenario.integrator, ref, scenario.analysis.kkt);

  std::ofstream csv(out_path);
  if (!csv) {
    throw OutputError("cannot open output file: " + out_path);
  }
  write_trajectory_csv(csv, net, traj);
  csv.flush();
  if (!csv) {
    throw OutputError("failed while writing: " + out_path);
  }

  const Eigen::VectorXd final_omega = traj.final_state.omega_full();
  const double final_cost = olc_objective(net, traj.final_state.load,
                                          traj.final_state.sensitive_load);
  nlohmann::ordered_json summary;
  summary["name"] = scenario.name;
  summary["nu_star"] = sol.nu_star;
  summary["objective"] = sol.objective;
  summary["final_time"] = traj.final_state.time;
  summary["final_omega"] = to_std(to_user_bus_order(net, final_omega));
  summary["final_flows"] = to_std(traj.final_state.flows);
  summary["final_d"] = to_std(to_user_bus_order(net, traj.final_state.load));
  summary["final_d_hat"] =
      to_std(to_user_bus_order(net, traj.final_state.sensitive_load));
  summary["max_omega_error"] =
      (final_omega.array() - sol.nu_star).abs().maxCoeff();
  summary["flow_residual"] =
      (net.incidence().cast<double>() * traj.final_state.flows - sol.h_star)
          .lpNorm<Eigen::Infinity>();
  summary["flow_set_distance"] =
      distance_to_flow_set(sol.flows, traj.final_state.flows);
  summary["final_cost"] = final_cost;
  summary["cost_gap"] = std::abs(final_cost - sol.objective);
  summary["tail_variation"] = traj.max_tail_variation;
  if (scenario.analysis.lyapunov) {
    summary["lyapunov"] = {
        {"max_step_increase", traj.max_lyapunov_increase},
        {"final_value", traj.final_lyapunov},
        {"monotone", traj.max_lyapunov_increase <= 1e-8}};
  } else {
    summary["lyapunov"] = nullptr;
  }
  summary["diverged"] = false;
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_check(const Scenario& scenario, double warn_threshold,
              std::ostream& out, std::ostream& err) {
  (void)err;
  const CheckReport report = run_checks(scenario, warn_threshold);
  int passed = 0, na = 0;
  for (const CheckRow& row : report.rows) {
    const char* status = row.status == CheckRow::Status::Pass ? "PASS"
                         : row.status == CheckRow::Status::Fail ? "FAIL"
                                                                : "N/A ";
    if (row.status == CheckRow::Status::Pass) ++passed;
    if (row.status == CheckRow::Status::NotApplicable) ++na;
    out << "  " << status << "  " << std::left << std::setw(36) << row.name
        << " " << row.detail << "\n";
  }
  const int failed = report.failures();
  out << "result: " << passed << " passed, " << failed << " failed, " << na
      << " n/a\n";
  return failed == 0 ? kExitOk : kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"load-side primary frequency control: OLC solver and simulator"};
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);

  struct Overrides {
    std::optional<double> step;
    std::optional<double> horizon;
    std::optional<int> decimation;
    std::optional<std::string> controller;
    double warn_threshold = kFrequencyWarnThreshold;
  };

  std::string solve_file, sim_file, sim_out, check_file;
  bool check_all = false;
  Overrides solve_opt, sim_opt, check_opt;

  const auto add_common = [](CLI::App* cmd, Overrides& o) {
    cmd->add_option("--h", o.step, "integrator step in seconds");
    cmd->add_option("--horizon", o.horizon, "horizon in seconds");
    cmd->add_option("--decimation", o.decimation,
                    "record every this many steps");
    cmd->add_option("--controller", o.controller,
                    "continuous or sampled:<ms>");
    cmd->add_option("--nu-warn", o.warn_threshold,
                    "|nu*| warning threshold in rad/s");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the load-control optimum");
  solve->add_option("file", solve_file, "scenario file or case name")
      ->required();
  add_common(solve, solve_opt);

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the closed loop");
  simulate->add_option("file", sim_file, "scenario file or case name")
      ->required();
  simulate->add_option("--out", sim_out, "trajectory CSV path")->required();
  add_common(simulate, sim_opt);

  CLI::App* check = app.add_subcommand("check", "run all cross-checks");
  check->add_option("file", check_file, "scenario file or case name");
  check->add_flag("--all", check_all, "check every built-in case");
  add_common(check, check_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto load_with = [](const std::string& file, const Overrides& o) {
    Scenario sc = load_scenario(resolve_case_path(file));
    if (o.step) sc.integrator.step = *o.step;
    if (o.horizon) sc.integrator.horizon = *o.horizon;
    if (o.decimation) sc.integrator.decimation = *o.decimation;
    if (o.controller) apply_controller_spec(*o.controller, sc.integrator);
    sc.integrator.validate();
    return sc;
  };

  if (solve->parsed()) {
    return guarded_run(
        [&] {
          return cmd_solve(load_with(solve_file, solve_opt),
                           solve_opt.warn_threshold, std::cout, std::cerr);
        },
        std::cerr);
  }
  if (simulate->parsed()) {
    return guarded_run(
        [&] {
          return cmd_simulate(load_with(sim_file, sim_opt), sim_out,
                              sim_opt.warn_threshold, std::cout, std::cerr);
        },
        std::cerr);
  }
  if (check->parsed()) {
    if (!check_all && check_file.empty()) {
      std::cerr << "error: check needs a scenario file or --all\n";
      return kExitUsage;
    }
    if (check_all && !check_file.empty()) {
      std::cerr << "error: check takes either a file or --all, not both\n";
      return kExitUsage;
    }
    const std::vector<std::string> files =
        check_all ? builtin_cases() : std::vector<std::string>{check_file};
    int worst = kExitOk;
    for (const std::string& file : files) {
      std::cout << "case: " << file << "\n";
      const int code = guarded_run(
          [&] {
            return cmd_check(load_with(file, check_opt),
                             check_opt.warn_threshold, std::cout, std::cerr);
          },
          std::cerr);
      worst = std::max(worst, code);
    }
    return worst;
  }
  return kExitUsage;
}

}  // namespace olcsim
