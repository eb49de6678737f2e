#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "olcsim/costs.hpp"
#include "olcsim/errors.hpp"

namespace olcsim {

enum class BusKind { Generator, Load };

struct Bus {
  int id = 0;                     // unique, in 1..N
  BusKind kind = BusKind::Load;
  std::optional<double> inertia;  // M > 0, generators only
  double damping = 0.0;           // D > 0
  double disturbance = 0.0;       // P_m, constant step deviation
  CostPtr cost;
};

/// Nominal per-unit quantities a line stiffness can be derived from.
struct LineRaw {
  double v_from = 1.0;
  double v_to = 1.0;
  double reactance = 0.0;
  double theta0_from = 0.0;
  double theta0_to = 0.0;
};

/// Directed line. Stiffness may be given directly, derived from the raw
/// parameters, or both (in which case they must agree to relative 1e-9).
struct Line {
  int from = 0;
  int to = 0;
  std::optional<double> stiffness;  // B > 0
  std::optional<LineRaw> raw;
};

/// B = 3 |V_i| |V_j| cos(theta_i0 - theta_j0) / x.
/// Requires x > 0 and |theta_i0 - theta_j0| < pi/2; the result must be > 0.
double compute_line_stiffness(double v_i, double v_j, double reactance,
                              double theta_i0, double theta_j0);

/// Immutable, validated transmission graph.
///
/// Buses are stored generators-first regardless of input order; the
/// permutation to and from the caller's order is recorded so file I/O can
/// round-trip. Lines keep their input order and orientation verbatim.
/// The graph must be connected and contain at least one generator.
class Network {
 public:
  static Network build(std::vector<Bus> buses, std::vector<Line> lines);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int generator_count() const { return generator_count_; }
  int load_count() const { return bus_count() - generator_count_; }
  int line_count() const { return static_cast<int>(lines_.size()); }

  /// True iff |E| = |N| - 1 (connectivity is guaranteed by construction).
  bool is_tree() const { return line_count() == bus_count() - 1; }

  /// Buses in internal order: generators first, then loads.
  const Bus& bus(int internal) const { return buses_[internal]; }
  const std::vector<Bus>& buses() const { return buses_; }

  const Line& line(int edge) const { return lines_[edge]; }
  const std::vector<Line>& lines() const { return lines_; }
  double stiffness(int edge) const { return *lines_[edge].stiffness; }

  /// Internal bus indices of a line's endpoints.
  int edge_source(int edge) const { return edge_source_[edge]; }
  int edge_target(int edge) const { return edge_target_[edge]; }

  /// Bus-by-edge incidence matrix: +1 at the source row, -1 at the target
  /// row of each column. Rows follow the internal bus order, so the first
  /// generator_count() rows are the generator block.
  const Eigen::MatrixXi& incidence() const { return incidence_; }

  /// Incidence matrix with one bus row removed; full row rank |N| - 1.
  Eigen::MatrixXi reduced_incidence(int dropped_internal) const;

  int internal_index(int bus_id) const;  // throws on unknown id
  int user_position(int internal) const { return user_position_[internal]; }
  int internal_of_user(int user_pos) const {
    return internal_of_user_[user_pos];
  }

  double total_damping() const;
  double total_disturbance() const;

 private:
  Network() = default;

  std::vector<Bus> buses_;   // generators first
  std::vector<Line> lines_;  // input order, stiffness resolved
  int generator_count_ = 0;
  std::vector<int> edge_source_;
  std::vector<int> edge_target_;
  std::vector<int> user_position_;
  std::vector<int> internal_of_user_;
  std::unordered_map<int, int> id_to_internal_;
  Eigen::MatrixXi incidence_;
};

}  // namespace olcsim
