#pragma once

#include <optional>
#include <utility>

#include <Eigen/Core>

#include "olcsim/network.hpp"

namespace olcsim {

/// Default |nu*| warning threshold: 0.5 Hz expressed in rad/s. Beyond this
/// the linearized model is physically questionable, so the solvers flag it.
inline constexpr double kFrequencyWarnThreshold = 2.0 * 3.14159265358979323846 * 0.5;

struct DualBracket {
  double lo = -1.0;
  double hi = 1.0;
};

/// Unique root nu* of g(nu) = sum_j (d_j(nu) + D_j nu) - sum_j P_m_j,
/// located by bisection on a bracket that is doubled until it straddles a
/// sign change. Satisfies |g(nu*)| <= 1e-9 * max(1, |sum P_m|).
double solve_dual(const Network& net, DualBracket bracket = {});

/// Componentwise optimum: d*_j = d_j(nu*), dhat*_j = D_j nu*.
/// Vectors follow the internal bus order.
std::pair<Eigen::VectorXd, Eigen::VectorXd> recover_primal(const Network& net,
                                                           double nu_star);

/// Equilibrium net injections h*_j = -d_j(nu*) - D_j nu* + P_m_j.
/// They sum to zero (to the dual solver's tolerance).
Eigen::VectorXd equilibrium_injections(const Network& net, double nu_star);

/// Description of the equilibrium flow set { P : C P = h* }.
///
/// `point` is the unique solution for trees. For meshes it is the member
/// with zero stiffness-weighted circulation, B C~^T (C~ B C~^T)^{-1} h~*,
/// which is also the limit reached from angle-consistent initial flows;
/// `null_basis` spans the directions along which the set extends
/// (|E| - |N| + 1 columns, empty for trees).
struct EquilibriumFlows {
  Eigen::VectorXd point;
  Eigen::MatrixXd null_basis;
};

/// Basis of the null space of the reduced incidence matrix (the cycle space
/// of the graph). Column count is |E| - |N| + 1.
Eigen::MatrixXd reduced_incidence_null_basis(
    const Network& net, std::optional<int> dropped_internal = std::nullopt);

/// Solves C P = h* for the equilibrium flow set. The dropped row of the
/// incidence matrix defaults to the last bus; the result does not depend on
/// the choice. Requires sum(h_star) = 0.
EquilibriumFlows equilibrium_flows(
    const Network& net, const Eigen::VectorXd& h_star,
    std::optional<int> dropped_internal = std::nullopt);

/// Aggregate objective sum_j c_j(d_j) + dhat_j^2 / (2 D_j).
double olc_objective(const Network& net, const Eigen::VectorXd& d,
                     const Eigen::VectorXd& d_hat);

struct OlcSolution {
  double nu_star = 0.0;
  Eigen::VectorXd d_star;
  Eigen::VectorXd d_hat_star;
  Eigen::VectorXd h_star;
  EquilibriumFlows flows;
  double objective = 0.0;
  bool frequency_warning = false;
};

OlcSolution solve_olc(const Network& net,
                      double warn_threshold = kFrequencyWarnThreshold);

/// Exhaustive grid search over the load box for instances with at most
/// three buses. The frequency-sensitive part is minimized analytically for
/// each grid point: with residual r = sum P_m - sum d, the optimal split is
/// dhat_j = D_j r / sum D with objective contribution r^2 / (2 sum D).
struct OracleSolution {
  Eigen::VectorXd d;
  Eigen::VectorXd d_hat;
  double cost = 0.0;
};

OracleSolution brute_force_oracle(const Network& net, double grid_step);

/// The member of the equilibrium flow set reached from `initial_flows`:
/// the flow dynamics conserve the stiffness-weighted circulation of P, so
/// the limit is the unique point of the set with the same circulation as
/// the initial condition.
Eigen::VectorXd predicted_flow_limit(const Network& net,
                                     const EquilibriumFlows& flows,
                                     const Eigen::VectorXd& initial_flows);

/// Euclidean distance from P to the affine set point + span(null_basis).
double distance_to_flow_set(const EquilibriumFlows& flows,
                            const Eigen::VectorXd& p);

/// True iff `flows` can be written as B_ij (theta_i - theta_j) for some
/// angle vector theta. Always true on trees.
bool flows_consistent_with_angles(const Network& net,
                                  const Eigen::VectorXd& flows);

}  // namespace olcsim
