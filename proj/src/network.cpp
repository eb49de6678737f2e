#include "olcsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

namespace olcsim {

namespace {

constexpr double kHalfPi = 1.57079632679489661923;

std::string line_label(const Line& line) {
  std::ostringstream os;
  os << "line " << line.from << "->" << line.to;
  return os.str();
}

}  // namespace

double compute_line_stiffness(double v_i, double v_j, double reactance,
                              double theta_i0, double theta_j0) {
  if (!(reactance > 0.0)) {
    throw ValidationError("line reactance must be > 0");
  }
  const double angle = theta_i0 - theta_j0;
  if (!(std::abs(angle) < kHalfPi)) {
    throw ValidationError(
        "nominal angle difference must satisfy |theta_i0 - theta_j0| < pi/2");
  }
  const double b = 3.0 * (v_i * v_j) * std::cos(angle) / reactance;
  if (!(b > 0.0)) {
    throw ValidationError("line stiffness must be > 0");
  }
  return b;
}

Network Network::build(std::vector<Bus> buses, std::vector<Line> lines) {
  const int n = static_cast<int>(buses.size());
  if (n == 0) {
    throw ValidationError("network requires at least one bus");
  }

  // Bus ids must be exactly 1..N.
  std::vector<int> seen(static_cast<size_t>(n) + 1, 0);
  for (const Bus& bus : buses) {
    if (bus.id < 1 || bus.id > n) {
      throw ValidationError("bus " + std::to_string(bus.id) +
                            ": id must lie in 1.." + std::to_string(n));
    }
    if (seen[bus.id]++) {
      throw ValidationError("bus " + std::to_string(bus.id) +
                            ": duplicate id");
    }
  }

  int generators = 0;
  for (const Bus& bus : buses) {
    const std::string label = "bus " + std::to_string(bus.id);
    if (!(bus.damping > 0.0)) {
      throw ValidationError(label + ": damping D must be > 0");
    }
    if (bus.kind == BusKind::Generator) {
      ++generators;
      if (!bus.inertia || !(*bus.inertia > 0.0)) {
        throw ValidationError(label +
                              ": generator requires inertia M > 0");
      }
    } else if (bus.inertia) {
      throw ValidationError(label + ": load bus must not carry inertia M");
    }
    if (!bus.cost) {
      throw ValidationError(label + ": missing cost function");
    }
  }
  if (generators == 0) {
    throw ValidationError("network requires at least one generator bus");
  }

  Network net;
  net.generator_count_ = generators;

  // Generators-first internal order, stable within each kind.
  net.internal_of_user_.resize(n);
  net.user_position_.resize(n);
  net.buses_.reserve(n);
  int next = 0;
  for (int pass = 0; pass < 2; ++pass) {
    const BusKind want = pass == 0 ? BusKind::Generator : BusKind::Load;
    for (int u = 0; u < n; ++u) {
      if (buses[u].kind != want) continue;
      net.internal_of_user_[u] = next;
      net.user_position_[next] = u;
      net.id_to_internal_[buses[u].id] = next;
      net.buses_.push_back(buses[u]);
      ++next;
    }
  }

  // Resolve line stiffness and reject duplicate or anti-parallel pairs.
  const int e_count = static_cast<int>(lines.size());
  std::set<std::pair<int, int>> directed;
  for (Line& line : lines) {
    const std::string label = line_label(line);
    if (!net.id_to_internal_.count(line.from) ||
        !net.id_to_internal_.count(line.to)) {
      throw ValidationError(label + ": endpoint is not a known bus id");
    }
    if (line.from == line.to) {
      throw ValidationError(label + ": endpoints must differ");
    }
    if (!directed.insert({line.from, line.to}).second) {
      throw ValidationError(label + ": duplicate line");
    }
    if (directed.count({line.to, line.from})) {
      throw ValidationError(label + ": anti-parallel counterpart present");
    }
    if (line.raw) {
      double computed = 0.0;
      try {
        computed = compute_line_stiffness(line.raw->v_from, line.raw->v_to,
                                          line.raw->reactance,
                                          line.raw->theta0_from,
                                          line.raw->theta0_to);
      } catch (const ValidationError& err) {
        throw ValidationError(label + ": " + err.what());
      }
      if (line.stiffness &&
          std::abs(*line.stiffness - computed) > 1e-9 * computed) {
        std::ostringstream os;
        os << label << ": given stiffness " << *line.stiffness
           << " disagrees with value " << computed
           << " derived from the raw parameters";
        throw ValidationError(os.str());
      }
      line.stiffness = computed;
    } else if (line.stiffness) {
      if (!(*line.stiffness > 0.0)) {
        throw ValidationError(label + ": stiffness B must be > 0");
      }
    } else {
      throw ValidationError(label +
                            ": needs stiffness B or raw line parameters");
    }
  }

  net.lines_ = std::move(lines);
  net.edge_source_.resize(e_count);
  net.edge_target_.resize(e_count);
  net.incidence_ = Eigen::MatrixXi::Zero(n, e_count);
  for (int e = 0; e < e_count; ++e) {
    const int src = net.id_to_internal_.at(net.lines_[e].from);
    const int tgt = net.id_to_internal_.at(net.lines_[e].to);
    net.edge_source_[e] = src;
    net.edge_target_[e] = tgt;
    net.incidence_(src, e) = 1;
    net.incidence_(tgt, e) = -1;
  }

  // Connectivity over the undirected graph.
  std::vector<std::vector<int>> adj(n);
  for (int e = 0; e < e_count; ++e) {
    adj[net.edge_source_[e]].push_back(net.edge_target_[e]);
    adj[net.edge_target_[e]].push_back(net.edge_source_[e]);
  }
  std::vector<char> reached(n, 0);
  std::vector<int> stack{0};
  reached[0] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!reached[w]) {
        reached[w] = 1;
        stack.push_back(w);
      }
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!reached[v]) {
      throw ValidationError("network is not connected: bus " +
                            std::to_string(net.buses_[v].id) +
                            " is unreachable");
    }
  }

  return net;
}

Eigen::MatrixXi Network::reduced_incidence(int dropped_internal) const {
  if (dropped_internal < 0 || dropped_internal >= bus_count()) {
    throw ValidationError("reduced_incidence: bus index out of range");
  }
  Eigen::MatrixXi reduced(bus_count() - 1, line_count());
  int row = 0;
  for (int i = 0; i < bus_count(); ++i) {
    if (i == dropped_internal) continue;
    reduced.row(row++) = incidence_.row(i);
  }
  return reduced;
}

int Network::internal_index(int bus_id) const {
  const auto it = id_to_internal_.find(bus_id);
  if (it == id_to_internal_.end()) {
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
  }
  return it->second;
}

double Network::total_damping() const {
  double sum = 0.0;
  for (const Bus& bus : buses_) sum += bus.damping;
  return sum;
}

double Network::total_disturbance() const {
  double sum = 0.0;
  for (const Bus& bus : buses_) sum += bus.disturbance;
  return sum;
}

}  // namespace olcsim
