#include "olcsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace olcsim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// (C P)_j = P_out_j - P_in_j for every bus, internal order.
Eigen::VectorXd net_injection(const Network& net,
                              const Eigen::VectorXd& flows) {
  Eigen::VectorXd inj = Eigen::VectorXd::Zero(net.bus_count());
  for (int e = 0; e < net.line_count(); ++e) {
    inj[net.edge_source(e)] += flows[e];
    inj[net.edge_target(e)] -= flows[e];
  }
  return inj;
}

// Root of omega -> D omega + d(omega) - target. The load bounds give a
// rigorous bracket: the map is strictly increasing with slope >= D.
double solve_bus_frequency(const CostFunction& cost, double damping,
                           double target, double tol) {
  if (!std::isfinite(target)) {
    // Let the integrator's divergence guard report this.
    return std::numeric_limits<double>::quiet_NaN();
  }
  double lo = (target - cost.upper()) / damping;
  double hi = (target - cost.lower()) / damping;
  const auto eval = [&](double omega) {
    return damping * omega + load_response(cost, omega) - target;
  };
  // Relative acceptance so the solve stays usable when a diverging
  // trajectory pushes the balance to huge magnitudes.
  const double accept = std::max(tol, 1e-12 * std::abs(target));
  double flo = eval(lo);
  double fhi = eval(hi);
  if (std::abs(flo) <= accept) return lo;
  if (std::abs(fhi) <= accept) return hi;

  // False position with the Illinois cut, bisection every few rounds as a
  // guaranteed-shrink fallback.
  int stuck_side = 0;
  for (int it = 0; it < 300; ++it) {
    double mid;
    if (it % 8 == 7 || fhi == flo) {
      mid = 0.5 * (lo + hi);
    } else {
      mid = lo - flo * (hi - lo) / (fhi - flo);
    }
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval exhausted
    const double fm = eval(mid);
    if (std::abs(fm) <= accept) return mid;
    if (fm < 0.0) {
      lo = mid;
      flo = fm;
      if (stuck_side == -1) fhi *= 0.5;
      stuck_side = -1;
    } else {
      hi = mid;
      fhi = fm;
      if (stuck_side == 1) flo *= 0.5;
      stuck_side = 1;
    }
  }
  const double mid = 0.5 * (lo + hi);
  if (std::abs(eval(mid)) <= std::max(accept, 1e-9 * std::max(1.0, std::abs(target)))) {
    return mid;
  }
  throw SolverError("load-bus frequency solve failed to converge");
}

Eigen::VectorXd load_frequencies(const Network& net,
                                 const Eigen::VectorXd& flows, double tol,
                                 const Eigen::VectorXd* held_load) {
  const Eigen::VectorXd inj = net_injection(net, flows);
  const int generators = net.generator_count();
  Eigen::VectorXd omega(net.load_count());
  for (int j = 0; j < net.load_count(); ++j) {
    const int i = generators + j;
    const Bus& bus = net.bus(i);
    const double target = bus.disturbance - inj[i];
    if (held_load) {
      omega[j] = (target - (*held_load)[i]) / bus.damping;
    } else {
      omega[j] = solve_bus_frequency(*bus.cost, bus.damping, target, tol);
    }
  }
  return omega;
}

SystemState make_state(const Network& net, double time,
                       const Eigen::VectorXd& omega_gen,
                       const Eigen::VectorXd& flows, double tol,
                       const Eigen::VectorXd* held_load) {
  SystemState state;
  state.time = time;
  state.omega_gen = omega_gen;
  state.flows = flows;
  state.omega_load = load_frequencies(net, flows, tol, held_load);
  const int n = net.bus_count();
  const int generators = net.generator_count();
  state.load.resize(n);
  state.sensitive_load.resize(n);
  for (int i = 0; i < n; ++i) {
    const double omega =
        i < generators ? omega_gen[i] : state.omega_load[i - generators];
    state.load[i] =
        held_load ? (*held_load)[i] : load_response(*net.bus(i).cost, omega);
    state.sensitive_load[i] = net.bus(i).damping * omega;
  }
  return state;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(step > 0.0)) throw ValidationError("integrator step h must be > 0");
  if (!(horizon > 0.0)) throw ValidationError("integrator horizon must be > 0");
  if (decimation < 1) throw ValidationError("decimation must be >= 1");
  if (!(algebraic_tol > 0.0)) {
    throw ValidationError("algebraic tolerance must be > 0");
  }
  const double steps = horizon / step;
  if (std::abs(steps - std::llround(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ValidationError("horizon must be an integer multiple of step h");
  }
  if (controller == ControllerMode::Sampled) {
    if (!(control_interval >= step)) {
      throw ValidationError("control interval must be >= step h");
    }
    const double per = control_interval / step;
    if (std::abs(per - std::llround(per)) > 1e-9 * std::max(1.0, per)) {
      throw ValidationError(
          "control interval must be an integer multiple of step h");
    }
  }
}

long long IntegratorConfig::step_count() const {
  return std::llround(horizon / step);
}

long long IntegratorConfig::steps_per_control() const {
  return std::llround(control_interval / step);
}

Eigen::VectorXd SystemState::omega_full() const {
  Eigen::VectorXd omega(omega_gen.size() + omega_load.size());
  omega << omega_gen, omega_load;
  return omega;
}

EquilibriumReference make_equilibrium_reference(const Network& net,
                                                double omega_star,
                                                Eigen::VectorXd flow_star) {
  EquilibriumReference ref;
  ref.omega_star = omega_star;
  ref.flow_star = std::move(flow_star);
  ref.gamma.resize(net.generator_count());
  for (int g = 0; g < net.generator_count(); ++g) {
    ref.gamma[g] = 1.0 / *net.bus(g).inertia;
  }
  ref.xi.resize(net.line_count());
  for (int e = 0; e < net.line_count(); ++e) ref.xi[e] = net.stiffness(e);

  const Eigen::VectorXd inj = net_injection(net, ref.flow_star);
  for (int i = 0; i < net.bus_count(); ++i) {
    const Bus& bus = net.bus(i);
    const double stationarity =
        phi_derivative(*bus.cost, bus.damping, bus.disturbance, omega_star) -
        inj[i];
    if (std::abs(stationarity) > 1e-9) {
      throw ValidationError(
          "equilibrium reference violates stationarity at bus " +
          std::to_string(bus.id));
    }
  }
  return ref;
}

Eigen::VectorXd solve_load_frequencies(const Network& net,
                                       const Eigen::VectorXd& flows,
                                       double tol) {
  return load_frequencies(net, flows, tol, nullptr);
}

Eigen::VectorXd solve_load_frequencies_held(const Network& net,
                                            const Eigen::VectorXd& flows,
                                            const Eigen::VectorXd& held_load) {
  return load_frequencies(net, flows, 0.0, &held_load);
}

SystemState assemble_state(const Network& net, double time,
                           const Eigen::VectorXd& omega_gen,
                           const Eigen::VectorXd& flows, double tol) {
  return make_state(net, time, omega_gen, flows, tol, nullptr);
}

SystemState assemble_state_held(const Network& net, double time,
                                const Eigen::VectorXd& omega_gen,
                                const Eigen::VectorXd& flows,
                                const Eigen::VectorXd& held_load) {
  return make_state(net, time, omega_gen, flows, 0.0, &held_load);
}

Derivatives rhs(const Network& net, const SystemState& state) {
  const Eigen::VectorXd inj = net_injection(net, state.flows);
  Derivatives out;
  out.omega_gen_dot.resize(net.generator_count());
  for (int g = 0; g < net.generator_count(); ++g) {
    const Bus& bus = net.bus(g);
    out.omega_gen_dot[g] = -(state.load[g] + state.sensitive_load[g] -
                             bus.disturbance + inj[g]) /
                           *bus.inertia;
  }
  const Eigen::VectorXd omega = state.omega_full();
  out.flow_dot.resize(net.line_count());
  for (int e = 0; e < net.line_count(); ++e) {
    out.flow_dot[e] =
        net.stiffness(e) * (omega[net.edge_source(e)] - omega[net.edge_target(e)]);
  }
  return out;
}

SystemState step(const Network& net, const SystemState& state,
                 const IntegratorConfig& config) {
  const double h = config.step;
  const bool held = config.controller == ControllerMode::Sampled;
  const Eigen::VectorXd* held_load = held ? &state.load : nullptr;

  const auto eval = [&](const Eigen::VectorXd& omega_gen,
                        const Eigen::VectorXd& flows) {
    return rhs(net, make_state(net, state.time, omega_gen, flows,
                               config.algebraic_tol, held_load));
  };

  const Derivatives k1 = rhs(net, state);
  const Derivatives k2 = eval(state.omega_gen + 0.5 * h * k1.omega_gen_dot,
                              state.flows + 0.5 * h * k1.flow_dot);
  const Derivatives k3 = eval(state.omega_gen + 0.5 * h * k2.omega_gen_dot,
                              state.flows + 0.5 * h * k2.flow_dot);
  const Derivatives k4 = eval(state.omega_gen + h * k3.omega_gen_dot,
                              state.flows + h * k3.flow_dot);

  const Eigen::VectorXd omega_gen =
      state.omega_gen +
      (h / 6.0) * (k1.omega_gen_dot + 2.0 * k2.omega_gen_dot +
                   2.0 * k3.omega_gen_dot + k4.omega_gen_dot);
  const Eigen::VectorXd flows =
      state.flows + (h / 6.0) * (k1.flow_dot + 2.0 * k2.flow_dot +
                                 2.0 * k3.flow_dot + k4.flow_dot);
  return make_state(net, state.time + h, omega_gen, flows,
                    config.algebraic_tol, held_load);
}

Eigen::VectorXd initial_flows_from_angles(const Network& net,
                                          const Eigen::VectorXd& theta0) {
  Eigen::VectorXd flows(net.line_count());
  for (int e = 0; e < net.line_count(); ++e) {
    flows[e] = net.stiffness(e) *
               (theta0[net.edge_source(e)] - theta0[net.edge_target(e)]);
  }
  return flows;
}

double lyapunov_value(const SystemState& state,
                      const EquilibriumReference& reference) {
  double value = 0.0;
  for (int g = 0; g < state.omega_gen.size(); ++g) {
    const double diff = state.omega_gen[g] - reference.omega_star;
    value += 0.5 * diff * diff / reference.gamma[g];
  }
  for (int e = 0; e < state.flows.size(); ++e) {
    const double diff = state.flows[e] - reference.flow_star[e];
    value += 0.5 * diff * diff / reference.xi[e];
  }
  return value;
}

KktResiduals kkt_residuals(const Network& net, const SystemState& state) {
  const Eigen::VectorXd omega = state.omega_full();
  const Eigen::VectorXd inj = net_injection(net, state.flows);
  KktResiduals res;
  for (int i = 0; i < net.bus_count(); ++i) {
    const Bus& bus = net.bus(i);
    const double gap =
        phi_derivative(*bus.cost, bus.damping, bus.disturbance, omega[i]) -
        inj[i];
    res.stationarity = std::max(res.stationarity, std::abs(gap));
  }
  for (int e = 0; e < net.line_count(); ++e) {
    res.sync = std::max(
        res.sync,
        std::abs(omega[net.edge_source(e)] - omega[net.edge_target(e)]));
  }
  return res;
}

namespace {

double algebraic_residual(const Network& net, const SystemState& state) {
  const Eigen::VectorXd inj = net_injection(net, state.flows);
  double worst = 0.0;
  for (int j = 0; j < net.load_count(); ++j) {
    const int i = net.generator_count() + j;
    const Bus& bus = net.bus(i);
    const double r = bus.damping * state.omega_load[j] + state.load[i] -
                     bus.disturbance + inj[i];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

double energy_residual(const Network& net, const SystemState& state,
                       const Derivatives& deriv) {
  double sum = 0.0;
  for (int g = 0; g < net.generator_count(); ++g) {
    sum += *net.bus(g).inertia * deriv.omega_gen_dot[g];
  }
  for (int i = 0; i < net.bus_count(); ++i) {
    sum += state.load[i] + state.sensitive_load[i] - net.bus(i).disturbance;
  }
  return std::abs(sum);
}

}  // namespace

Trajectory simulate(const Network& net, const InitialConditions& initial,
                    const IntegratorConfig& config,
                    const EquilibriumReference* reference, bool compute_kkt) {
  config.validate();
  if (initial.omega_gen.size() != net.generator_count()) {
    throw ValidationError("initial omega_G size mismatch");
  }
  if (initial.flows.size() != net.line_count()) {
    throw ValidationError("initial flow vector size mismatch");
  }

  const long long n_steps = config.step_count();
  const bool sampled = config.controller == ControllerMode::Sampled;
  const long long per_control = sampled ? config.steps_per_control() : 0;

  SystemState state;
  Eigen::VectorXd held = Eigen::VectorXd::Zero(net.bus_count());
  const auto refresh_control = [&](const Eigen::VectorXd& omega_gen,
                                   const Eigen::VectorXd& flows, double time) {
    // Measure the frequencies produced by the previous hold, then actuate.
    SystemState measured =
        assemble_state_held(net, time, omega_gen, flows, held);
    const Eigen::VectorXd omega = measured.omega_full();
    for (int i = 0; i < net.bus_count(); ++i) {
      held[i] = load_response(*net.bus(i).cost, omega[i]);
    }
    return assemble_state_held(net, time, omega_gen, flows, held);
  };

  if (sampled) {
    state = refresh_control(initial.omega_gen, initial.flows, 0.0);
  } else {
    state = assemble_state(net, 0.0, initial.omega_gen, initial.flows,
                           config.algebraic_tol);
  }

  Trajectory traj;
  traj.max_lyapunov_increase = reference ? 0.0 : kNan;
  traj.final_lyapunov = kNan;
  const long long tail_start = n_steps - n_steps / 10;
  Eigen::VectorXd tail_min, tail_max;
  double prev_lyapunov = reference ? lyapunov_value(state, *reference) : kNan;

  for (long long k = 0;; ++k) {
    if (sampled && k > 0 && k % per_control == 0) {
      state = refresh_control(state.omega_gen, state.flows, state.time);
    }

    const double lyap =
        reference ? lyapunov_value(state, *reference) : kNan;
    if (reference && k > 0) {
      traj.max_lyapunov_increase =
          std::max(traj.max_lyapunov_increase, lyap - prev_lyapunov);
    }
    prev_lyapunov = lyap;

    if (k % config.decimation == 0 || k == n_steps) {
      TrajectorySample sample;
      sample.time = state.time;
      sample.omega = state.omega_full();
      sample.flows = state.flows;
      sample.load = state.load;
      sample.sensitive_load = state.sensitive_load;
      sample.lyapunov = lyap;
      if (compute_kkt) {
        const KktResiduals res = kkt_residuals(net, state);
        sample.kkt_stationarity = res.stationarity;
        sample.kkt_sync = res.sync;
      } else {
        sample.kkt_stationarity = kNan;
        sample.kkt_sync = kNan;
      }
      traj.samples.push_back(std::move(sample));
      traj.max_algebraic_residual =
          std::max(traj.max_algebraic_residual, algebraic_residual(net, state));
      traj.max_energy_residual = std::max(
          traj.max_energy_residual, energy_residual(net, state, rhs(net, state)));
    }

    if (k >= tail_start) {
      Eigen::VectorXd dynamic(state.omega_gen.size() + state.flows.size());
      dynamic << state.omega_gen, state.flows;
      if (tail_min.size() == 0) {
        tail_min = dynamic;
        tail_max = dynamic;
      } else {
        tail_min = tail_min.cwiseMin(dynamic);
        tail_max = tail_max.cwiseMax(dynamic);
      }
    }

    if (k == n_steps) break;

    state = step(net, state, config);
    state.time = static_cast<double>(k + 1) * config.step;  // avoid drift
    if (!state.omega_gen.allFinite() || !state.flows.allFinite() ||
        !state.omega_load.allFinite()) {
      std::ostringstream os;
      os << "non-finite state at t = " << state.time
         << "; the step h is too large for this system";
      throw DivergenceError(os.str());
    }
  }

  traj.final_state = state;
  traj.final_lyapunov = prev_lyapunov;
  traj.max_tail_variation =
      tail_min.size() ? (tail_max - tail_min).lpNorm<Eigen::Infinity>() : 0.0;
  return traj;
}

}  // namespace olcsim
