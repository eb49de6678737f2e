#include "olcsim/olc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace olcsim {

namespace {

// g(nu) = sum_j (d_j(nu) + D_j nu) - sum_j P_m_j; strictly increasing with
// slope at least sum_j D_j.
double balance_gap(const Network& net, double nu) {
  double sum = 0.0;
  for (const Bus& bus : net.buses()) {
    sum += load_response(*bus.cost, nu) + bus.damping * nu;
  }
  return sum - net.total_disturbance();
}

// Reduced row echelon form with partial pivoting, in place. Returns the
// pivot column of each pivot row.
std::vector<int> rref(Eigen::MatrixXd& m) {
  std::vector<int> pivots;
  int row = 0;
  for (int col = 0; col < m.cols() && row < m.rows(); ++col) {
    int best = row;
    for (int r = row + 1; r < m.rows(); ++r) {
      if (std::abs(m(r, col)) > std::abs(m(best, col))) best = r;
    }
    if (std::abs(m(best, col)) < 1e-12) continue;
    m.row(best).swap(m.row(row));
    m.row(row) /= m(row, col);
    for (int r = 0; r < m.rows(); ++r) {
      if (r != row && m(r, col) != 0.0) {
        m.row(r) -= m(r, col) * m.row(row);
      }
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

Eigen::MatrixXd null_basis_of(const Eigen::MatrixXd& matrix) {
  Eigen::MatrixXd r = matrix;
  const std::vector<int> pivots = rref(r);
  const int rank = static_cast<int>(pivots.size());
  const int cols = static_cast<int>(matrix.cols());
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(cols, cols - rank);
  std::vector<char> is_pivot(cols, 0);
  for (int p : pivots) is_pivot[p] = 1;
  int k = 0;
  for (int free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    basis(free, k) = 1.0;
    for (int pr = 0; pr < rank; ++pr) {
      basis(pivots[pr], k) = -r(pr, free);
    }
    ++k;
  }
  return basis;
}

}  // namespace

double solve_dual(const Network& net, DualBracket bracket) {
  double lo = bracket.lo;
  double hi = bracket.hi;
  if (!(lo < hi)) {
    throw SolverError("solve_dual: bracket must satisfy lo < hi");
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(net.total_disturbance()));

  double glo = balance_gap(net, lo);
  double ghi = balance_gap(net, hi);
  double width = hi - lo;
  int expansions = 0;
  while (ghi < 0.0) {
    if (++expansions > 200) {
      throw SolverError("solve_dual: bracket expansion failed");
    }
    lo = hi;
    glo = ghi;
    hi += width;
    width *= 2.0;
    ghi = balance_gap(net, hi);
  }
  while (glo > 0.0) {
    if (++expansions > 200) {
      throw SolverError("solve_dual: bracket expansion failed");
    }
    hi = lo;
    ghi = glo;
    lo -= width;
    width *= 2.0;
    glo = balance_gap(net, lo);
  }

  // Bisect down to the floating-point limit: the tolerance is then met with
  // orders of magnitude to spare and dyadic optima are hit exactly.
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // no representable midpoint left
    const double gm = balance_gap(net, mid);
    if (gm == 0.0) return mid;
    if (gm < 0.0) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
  }
  const double root = std::abs(glo) <= std::abs(ghi) ? lo : hi;
  if (std::abs(balance_gap(net, root)) > tol) {
    throw SolverError("solve_dual: bisection failed to reach tolerance");
  }
  return root;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> recover_primal(const Network& net,
                                                           double nu_star) {
  const int n = net.bus_count();
  Eigen::VectorXd d(n);
  Eigen::VectorXd d_hat(n);
  for (int i = 0; i < n; ++i) {
    d[i] = load_response(*net.bus(i).cost, nu_star);
    d_hat[i] = net.bus(i).damping * nu_star;
  }
  return {d, d_hat};
}

Eigen::VectorXd equilibrium_injections(const Network& net, double nu_star) {
  const int n = net.bus_count();
  Eigen::VectorXd h(n);
  for (int i = 0; i < n; ++i) {
    const Bus& bus = net.bus(i);
    h[i] = phi_derivative(*bus.cost, bus.damping, bus.disturbance, nu_star);
  }
  return h;
}

Eigen::MatrixXd reduced_incidence_null_basis(
    const Network& net, std::optional<int> dropped_internal) {
  const int dropped = dropped_internal.value_or(net.bus_count() - 1);
  return null_basis_of(net.reduced_incidence(dropped).cast<double>());
}

EquilibriumFlows equilibrium_flows(const Network& net,
                                   const Eigen::VectorXd& h_star,
                                   std::optional<int> dropped_internal) {
  const int n = net.bus_count();
  const int e = net.line_count();
  const int dropped = dropped_internal.value_or(n - 1);
  const Eigen::MatrixXd reduced =
      net.reduced_incidence(dropped).cast<double>();
  Eigen::VectorXd h_reduced(n - 1);
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == dropped) continue;
    h_reduced[row++] = h_star[i];
  }

  EquilibriumFlows flows;
  if (net.is_tree()) {
    flows.point = Eigen::PartialPivLU<Eigen::MatrixXd>(reduced).solve(h_reduced);
    flows.null_basis = Eigen::MatrixXd::Zero(e, 0);
  } else {
    Eigen::VectorXd stiffness(e);
    for (int edge = 0; edge < e; ++edge) stiffness[edge] = net.stiffness(edge);
    const Eigen::MatrixXd weighted =
        reduced * stiffness.asDiagonal() * reduced.transpose();
    const Eigen::VectorXd y =
        Eigen::PartialPivLU<Eigen::MatrixXd>(weighted).solve(h_reduced);
    flows.point = stiffness.asDiagonal() * (reduced.transpose() * y);
    flows.null_basis = null_basis_of(reduced);
    if (flows.null_basis.cols() != e - n + 1) {
      throw SolverError("equilibrium_flows: unexpected null-space dimension");
    }
  }
  if (!flows.point.allFinite()) {
    throw SolverError("equilibrium_flows: singular reduced system");
  }
  const Eigen::VectorXd residual =
      net.incidence().cast<double>() * flows.point - h_star;
  if (residual.lpNorm<Eigen::Infinity>() >
      1e-9 * std::max(1.0, h_star.lpNorm<Eigen::Infinity>())) {
    throw SolverError("equilibrium_flows: flow point violates C P = h*");
  }
  return flows;
}

double olc_objective(const Network& net, const Eigen::VectorXd& d,
                     const Eigen::VectorXd& d_hat) {
  double sum = 0.0;
  for (int i = 0; i < net.bus_count(); ++i) {
    const Bus& bus = net.bus(i);
    sum += bus.cost->value(d[i]) + d_hat[i] * d_hat[i] / (2.0 * bus.damping);
  }
  return sum;
}

OlcSolution solve_olc(const Network& net, double warn_threshold) {
  OlcSolution sol;
  sol.nu_star = solve_dual(net);
  std::tie(sol.d_star, sol.d_hat_star) = recover_primal(net, sol.nu_star);
  sol.h_star = equilibrium_injections(net, sol.nu_star);
  sol.flows = equilibrium_flows(net, sol.h_star);
  sol.objective = olc_objective(net, sol.d_star, sol.d_hat_star);
  sol.frequency_warning = std::abs(sol.nu_star) > warn_threshold;
  return sol;
}

OracleSolution brute_force_oracle(const Network& net, double grid_step) {
  const int n = net.bus_count();
  if (n > 3) {
    throw ValidationError("brute_force_oracle supports at most 3 buses");
  }
  if (!(grid_step > 0.0)) {
    throw ValidationError("brute_force_oracle requires grid_step > 0");
  }

  // Per-bus grids over [d_min, d_max] with the exact endpoints included.
  std::vector<std::vector<double>> grids(3, std::vector<double>{0.0});
  std::vector<std::vector<double>> costs(3, std::vector<double>{0.0});
  for (int i = 0; i < n; ++i) {
    const CostFunction& cost = *net.bus(i).cost;
    std::vector<double> grid;
    for (long long k = 0;; ++k) {
      const double v = cost.lower() + static_cast<double>(k) * grid_step;
      if (v >= cost.upper()) break;
      grid.push_back(v);
    }
    grid.push_back(cost.upper());
    std::vector<double> c(grid.size());
    for (size_t k = 0; k < grid.size(); ++k) c[k] = cost.value(grid[k]);
    grids[i] = std::move(grid);
    costs[i] = std::move(c);
  }

  const double total_disturbance = net.total_disturbance();
  const double inv_two_d = 1.0 / (2.0 * net.total_damping());
  double best = std::numeric_limits<double>::infinity();
  size_t bi = 0, bj = 0, bk = 0;
  for (size_t i = 0; i < grids[0].size(); ++i) {
    const double c0 = costs[0][i];
    const double r0 = total_disturbance - grids[0][i];
    for (size_t j = 0; j < grids[1].size(); ++j) {
      const double c01 = c0 + costs[1][j];
      const double r01 = r0 - grids[1][j];
      const double* c2 = costs[2].data();
      const double* g2 = grids[2].data();
      const size_t m = grids[2].size();
      for (size_t k = 0; k < m; ++k) {
        const double r = r01 - g2[k];
        const double total = c01 + c2[k] + r * r * inv_two_d;
        if (total < best) {
          best = total;
          bi = i;
          bj = j;
          bk = k;
        }
      }
    }
  }

  OracleSolution result;
  result.d = Eigen::VectorXd::Zero(n);
  const size_t picks[3] = {bi, bj, bk};
  double residual = total_disturbance;
  for (int i = 0; i < n; ++i) {
    result.d[i] = grids[i][picks[i]];
    residual -= result.d[i];
  }
  result.d_hat = Eigen::VectorXd::Zero(n);
  const double total_damping = net.total_damping();
  for (int i = 0; i < n; ++i) {
    result.d_hat[i] = net.bus(i).damping * residual / total_damping;
  }
  result.cost = best;
  return result;
}

Eigen::VectorXd predicted_flow_limit(const Network& net,
                                     const EquilibriumFlows& flows,
                                     const Eigen::VectorXd& initial_flows) {
  if (flows.null_basis.cols() == 0) {
    return flows.point;
  }
  // The flow dynamics keep the stiffness-weighted circulation of P fixed,
  // so the limit shares it with the initial condition.
  Eigen::VectorXd inv_b(net.line_count());
  for (int e = 0; e < net.line_count(); ++e) inv_b[e] = 1.0 / net.stiffness(e);
  const Eigen::MatrixXd weighted = inv_b.asDiagonal() * flows.null_basis;
  const Eigen::MatrixXd gram = flows.null_basis.transpose() * weighted;
  const Eigen::VectorXd target =
      weighted.transpose() * (initial_flows - flows.point);
  const Eigen::VectorXd coeff =
      Eigen::PartialPivLU<Eigen::MatrixXd>(gram).solve(target);
  return flows.point + flows.null_basis * coeff;
}

double distance_to_flow_set(const EquilibriumFlows& flows,
                            const Eigen::VectorXd& p) {
  const Eigen::VectorXd offset = p - flows.point;
  if (flows.null_basis.cols() == 0) {
    return offset.norm();
  }
  const Eigen::MatrixXd gram = flows.null_basis.transpose() * flows.null_basis;
  const Eigen::VectorXd coeff = Eigen::PartialPivLU<Eigen::MatrixXd>(gram).solve(
      flows.null_basis.transpose() * offset);
  return (offset - flows.null_basis * coeff).norm();
}

bool flows_consistent_with_angles(const Network& net,
                                  const Eigen::VectorXd& flows) {
  if (net.is_tree()) {
    return true;  // any flow vector is realizable by some angle vector
  }
  const Eigen::MatrixXd basis = reduced_incidence_null_basis(net);
  Eigen::VectorXd weighted(net.line_count());
  for (int e = 0; e < net.line_count(); ++e) {
    weighted[e] = flows[e] / net.stiffness(e);
  }
  const double circulation =
      (basis.transpose() * weighted).lpNorm<Eigen::Infinity>();
  return circulation <=
         1e-9 * std::max(1.0, flows.lpNorm<Eigen::Infinity>());
}

}  // namespace olcsim
