#pragma once

#include <vector>

#include <Eigen/Core>

#include "olcsim/network.hpp"
#include "olcsim/olc.hpp"

namespace olcsim {

enum class ControllerMode { Continuous, Sampled };

struct IntegratorConfig {
  double step = 1e-3;            // s
  double horizon = 20.0;         // s, must be an integer multiple of step
  int decimation = 10;           // record every this many steps
  double algebraic_tol = 1e-12;  // residual tolerance of the load-bus solve
  ControllerMode controller = ControllerMode::Continuous;
  double control_interval = 0.25;  // s, sampled mode; integer multiple of step

  void validate() const;        // throws ValidationError
  long long step_count() const;
  long long steps_per_control() const;
};

/// Snapshot of the closed-loop system at one instant. omega_gen and flows
/// are the dynamic variables; omega_load solves the load-bus power balance,
/// and load / sensitive_load are the per-bus controllable and
/// frequency-sensitive load deviations (internal bus order).
struct SystemState {
  double time = 0.0;
  Eigen::VectorXd omega_gen;
  Eigen::VectorXd flows;
  Eigen::VectorXd omega_load;
  Eigen::VectorXd load;            // d
  Eigen::VectorXd sensitive_load;  // dhat = D omega

  /// Full frequency vector in internal bus order (generators, then loads).
  Eigen::VectorXd omega_full() const;
};

/// Equilibrium used as the reference of the Lyapunov function. gamma and xi
/// are the primal-dual stepsizes identified with the physics: gamma_j =
/// 1 / M_j per generator, xi_e = B_e per line; the Lyapunov weights are
/// their inverses.
struct EquilibriumReference {
  double omega_star = 0.0;
  Eigen::VectorXd flow_star;
  Eigen::VectorXd gamma;
  Eigen::VectorXd xi;
};

/// Builds a reference and verifies it is an equilibrium: flow_star must
/// reproduce the equilibrium injections at omega_star to 1e-9.
EquilibriumReference make_equilibrium_reference(const Network& net,
                                                double omega_star,
                                                Eigen::VectorXd flow_star);

/// Frequencies of the load buses for given branch flows: per bus the unique
/// root of the strictly increasing map
///   omega -> D_j omega + d_j(omega) - P_m_j + P_j_out - P_j_in,
/// found to |residual| <= tol. Buses decouple because the flow terms depend
/// only on P.
Eigen::VectorXd solve_load_frequencies(const Network& net,
                                       const Eigen::VectorXd& flows,
                                       double tol);

/// Same balance with the controllable load frozen at `held_load`; the
/// equation is then linear in omega.
Eigen::VectorXd solve_load_frequencies_held(const Network& net,
                                            const Eigen::VectorXd& flows,
                                            const Eigen::VectorXd& held_load);

/// Completes a state from the dynamic variables, re-solving the load-bus
/// balance and applying the control law d_j = d_j(omega_j).
SystemState assemble_state(const Network& net, double time,
                           const Eigen::VectorXd& omega_gen,
                           const Eigen::VectorXd& flows, double tol);

/// Sampled-control variant: d stays at held_load for every bus.
SystemState assemble_state_held(const Network& net, double time,
                                const Eigen::VectorXd& omega_gen,
                                const Eigen::VectorXd& flows,
                                const Eigen::VectorXd& held_load);

struct Derivatives {
  Eigen::VectorXd omega_gen_dot;  // -(d + dhat - P_m + P_out - P_in) / M
  Eigen::VectorXd flow_dot;       // B_ij (omega_i - omega_j)
};

/// Requires a state whose omega_load is freshly solved.
Derivatives rhs(const Network& net, const SystemState& state);

/// One classical fourth-order Runge-Kutta step on (omega_gen, flows); the
/// load-bus balance is re-solved at every stage. In sampled mode the
/// controllable load is held at state.load through all stages.
SystemState step(const Network& net, const SystemState& state,
                 const IntegratorConfig& config);

/// P0_ij = B_ij (theta_i - theta_j); theta in internal bus order. Flows of
/// this form are exactly the admissible initial conditions of the branch
/// dynamics.
Eigen::VectorXd initial_flows_from_angles(const Network& net,
                                          const Eigen::VectorXd& theta0);

/// U = 1/2 (omega_G - w* 1)^T diag(1/gamma) (omega_G - w* 1)
///   + 1/2 (P - P*)^T diag(1/xi) (P - P*).
double lyapunov_value(const SystemState& state,
                      const EquilibriumReference& reference);

struct KktResiduals {
  double stationarity = 0.0;  // max_j |Phi_j'(omega_j) - (C P)_j|
  double sync = 0.0;          // max_(i,j) |omega_i - omega_j|
};

KktResiduals kkt_residuals(const Network& net, const SystemState& state);

struct TrajectorySample {
  double time = 0.0;
  Eigen::VectorXd omega;  // |N|, internal order
  Eigen::VectorXd flows;
  Eigen::VectorXd load;
  Eigen::VectorXd sensitive_load;
  double lyapunov = 0.0;          // NaN when no reference was supplied
  double kkt_stationarity = 0.0;  // NaN when KKT analysis is off
  double kkt_sync = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  SystemState final_state;
  /// Largest one-step increase of U, tracked at every step (not just at
  /// recorded samples). NaN without a reference.
  double max_lyapunov_increase = 0.0;
  double final_lyapunov = 0.0;
  /// Largest per-component spread of (omega_G, P) over the last 10% of the
  /// horizon; small values certify convergence to a point.
  double max_tail_variation = 0.0;
  /// Worst load-bus balance residual seen at recorded samples.
  double max_algebraic_residual = 0.0;
  /// Worst violation of sum_G M_j omega_dot_j + sum_N (d + dhat - P_m) = 0
  /// at recorded samples.
  double max_energy_residual = 0.0;
};

struct InitialConditions {
  Eigen::VectorXd omega_gen;
  Eigen::VectorXd flows;
};

/// Integrates to the horizon, recording every `decimation`-th step plus the
/// final state. Lyapunov values are computed when a reference is given, KKT
/// residuals when compute_kkt is set. Throws DivergenceError on non-finite
/// states.
Trajectory simulate(const Network& net, const InitialConditions& initial,
                    const IntegratorConfig& config,
                    const EquilibriumReference* reference = nullptr,
                    bool compute_kkt = true);

}  // namespace olcsim
