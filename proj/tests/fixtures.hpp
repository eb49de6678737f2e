#pragma once

// Small instances shared across the test suites.

#include <memory>
#include <vector>

#include "olcsim/network.hpp"
#include "oracles.hpp"

namespace fixtures {

inline olcsim::Bus generator(int id, double inertia, double damping,
                             double disturbance, olcsim::CostPtr cost) {
  olcsim::Bus bus;
  bus.id = id;
  bus.kind = olcsim::BusKind::Generator;
  bus.inertia = inertia;
  bus.damping = damping;
  bus.disturbance = disturbance;
  bus.cost = std::move(cost);
  return bus;
}

inline olcsim::Bus load(int id, double damping, double disturbance,
                        olcsim::CostPtr cost) {
  olcsim::Bus bus;
  bus.id = id;
  bus.kind = olcsim::BusKind::Load;
  bus.damping = damping;
  bus.disturbance = disturbance;
  bus.cost = std::move(cost);
  return bus;
}

inline olcsim::Line line(int from, int to, double stiffness) {
  olcsim::Line l;
  l.from = from;
  l.to = to;
  l.stiffness = stiffness;
  return l;
}

inline olcsim::CostPtr quadratic(double alpha, double lo, double hi) {
  return std::make_shared<olcsim::QuadraticCost>(alpha, lo, hi);
}

/// Two buses, one line with B = 6: generator (M=1, D=1, P_m=1) feeding a
/// load (D=1); quadratic alpha = 1 costs. nu* = 1/4, P* = 1/2.
inline olcsim::Network n1(double d_min = -10.0, double d_max = 10.0) {
  return olcsim::Network::build(
      {generator(1, 1.0, 1.0, 1.0, quadratic(1.0, d_min, d_max)),
       load(2, 1.0, 0.0, quadratic(1.0, d_min, d_max))},
      {line(1, 2, 6.0)});
}

/// n1 with tight load bounds [-0.1, 0.1]; both responses clip, nu* = 0.4.
inline olcsim::Network n1_clipped() { return n1(-0.1, 0.1); }

/// Three-bus ring, all B = 6, P_m = (1, 0, 0.5): h* = (1/2, -1/2, 0) and
/// the circulation-free flow point is (1/3, -1/6, 1/6).
inline olcsim::Network ring3() {
  return olcsim::Network::build(
      {generator(1, 1.0, 1.0, 1.0, quadratic(1.0, -10.0, 10.0)),
       load(2, 1.0, 0.0, quadratic(1.0, -10.0, 10.0)),
       load(3, 1.0, 0.5, quadratic(1.0, -10.0, 10.0))},
      {line(1, 2, 6.0), line(2, 3, 6.0), line(1, 3, 6.0)});
}

/// Connected instance with `n` buses: a random spanning tree plus optional
/// extra edges, mixed clipped/unclipped quadratic costs.
inline olcsim::Network random_network(oracles::Rng& rng, int n,
                                      bool allow_mesh = true) {
  std::vector<olcsim::Bus> buses;
  const int generators = rng.uniform_int(1, n);
  for (int id = 1; id <= n; ++id) {
    const double alpha = rng.uniform(0.5, 3.0);
    const bool clipped = rng.unit() < 0.5;
    const double bound = clipped ? rng.uniform(0.02, 0.2) : 10.0;
    olcsim::CostPtr cost = quadratic(alpha, -bound, bound);
    const double damping = rng.uniform(0.5, 2.0);
    const double disturbance = rng.uniform(-2.0, 2.0);
    if (id <= generators) {
      buses.push_back(generator(id, rng.uniform(0.5, 4.0), damping,
                                disturbance, cost));
    } else {
      buses.push_back(load(id, damping, disturbance, cost));
    }
  }
  std::vector<olcsim::Line> lines;
  for (int id = 2; id <= n; ++id) {  // spanning tree
    lines.push_back(line(rng.uniform_int(1, id - 1), id,
                         rng.uniform(2.0, 10.0)));
  }
  if (allow_mesh && n >= 3) {
    const int extras = rng.uniform_int(0, 2);
    for (int k = 0; k < extras; ++k) {
      const int a = rng.uniform_int(1, n - 2);
      const int b = a + 2;  // may collide with an existing edge, so check
      bool taken = false;
      for (const olcsim::Line& existing : lines) {
        if ((existing.from == a && existing.to == b) ||
            (existing.from == b && existing.to == a)) {
          taken = true;
          break;
        }
      }
      if (!taken && b <= n) lines.push_back(line(a, b, rng.uniform(2.0, 10.0)));
    }
  }
  return olcsim::Network::build(std::move(buses), std::move(lines));
}

}  // namespace fixtures
