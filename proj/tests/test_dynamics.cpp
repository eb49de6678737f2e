#include "olcsim/dynamics.hpp"

#include <cmath>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace olcsim;

namespace {

IntegratorConfig fast_config(double step = 1e-3, double horizon = 20.0) {
  IntegratorConfig config;
  config.step = step;
  config.horizon = horizon;
  config.decimation = 100;
  return config;
}

InitialConditions at_rest(const Network& net) {
  return {Eigen::VectorXd::Zero(net.generator_count()),
          Eigen::VectorXd::Zero(net.line_count())};
}

}  // namespace

TEST_CASE("load-bus frequencies") {
  const Network net = fixtures::n1();
  Eigen::VectorXd flows(1);
  flows << 0.5;  // inflow 1/2 at the load bus
  const Eigen::VectorXd omega = solve_load_frequencies(net, flows, 1e-12);
  CHECK(omega.size() == 1);
  CHECK(omega[0] == doctest::Approx(0.25).epsilon(1e-10));

  CHECK(solve_load_frequencies(net, Eigen::VectorXd::Zero(1), 1e-12)[0] ==
        0.0);

  const Network clipped = fixtures::n1_clipped();
  CHECK(solve_load_frequencies(clipped, flows, 1e-12)[0] ==
        doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("load-bus solve matches a scalar bisection oracle") {
  oracles::Rng rng(61);
  for (int trial = 0; trial < 25; ++trial) {
    const Network net = fixtures::random_network(rng, rng.uniform_int(2, 7));
    Eigen::VectorXd flows(net.line_count());
    for (int e = 0; e < flows.size(); ++e) flows[e] = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd omega = solve_load_frequencies(net, flows, 1e-12);
    // Recompute each bus target and compare against an expanding bisection.
    Eigen::VectorXd inj = Eigen::VectorXd::Zero(net.bus_count());
    for (int e = 0; e < net.line_count(); ++e) {
      inj[net.edge_source(e)] += flows[e];
      inj[net.edge_target(e)] -= flows[e];
    }
    for (int j = 0; j < net.load_count(); ++j) {
      const Bus& bus = net.bus(net.generator_count() + j);
      const double target = bus.disturbance - inj[net.generator_count() + j];
      const double expected = oracles::bisect_increasing(
          [&](double w) {
            return bus.damping * w + load_response(*bus.cost, w) - target;
          },
          -1.0, 1.0, 1e-14);
      CHECK(std::abs(omega[j] - expected) <= 1e-9);
    }
  }
}

TEST_CASE("rhs at the initial instant and at the optimum") {
  const Network net = fixtures::n1();
  const SystemState zero = assemble_state(net, 0.0, Eigen::VectorXd::Zero(1),
                                          Eigen::VectorXd::Zero(1), 1e-12);
  const Derivatives d0 = rhs(net, zero);
  CHECK(d0.omega_gen_dot[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d0.flow_dot[0] == 0.0);

  Eigen::VectorXd p_star(1);
  p_star << 0.5;
  const SystemState eq = assemble_state(
      net, 0.0, Eigen::VectorXd::Constant(1, 0.25), p_star, 1e-13);
  const Derivatives de = rhs(net, eq);
  CHECK(std::abs(de.omega_gen_dot[0]) <= 1e-9);
  CHECK(std::abs(de.flow_dot[0]) <= 1e-9);

  const Network quiet = Network::build(
      {fixtures::generator(1, 1.0, 1.0, 0.0, fixtures::quadratic(1, -1, 1)),
       fixtures::load(2, 1.0, 0.0, fixtures::quadratic(1, -1, 1))},
      {fixtures::line(1, 2, 6.0)});
  const SystemState still = assemble_state(
      quiet, 0.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1e-12);
  CHECK(rhs(quiet, still).omega_gen_dot.isZero());
  CHECK(rhs(quiet, still).flow_dot.isZero());
}

TEST_CASE("one integration step") {
  const Network net = fixtures::n1();
  const IntegratorConfig config = fast_config();

  SUBCASE("matches a much finer reference and the leading Taylor term") {
    const SystemState start = assemble_state(
        net, 0.0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1e-13);
    const SystemState once = step(net, start, config);
    CHECK(once.omega_gen[0] == doctest::Approx(0.000999).epsilon(2e-3));

    IntegratorConfig fine = config;
    fine.step = config.step / 100.0;
    SystemState reference = start;
    for (int i = 0; i < 100; ++i) reference = step(net, reference, fine);
    CHECK(std::abs(once.omega_gen[0] - reference.omega_gen[0]) <= 1e-9);
    CHECK(std::abs(once.flows[0] - reference.flows[0]) <= 1e-9);
  }

  SUBCASE("equilibrium is a fixed point") {
    Eigen::VectorXd p_star(1);
    p_star << 0.5;
    const SystemState eq = assemble_state(
        net, 0.0, Eigen::VectorXd::Constant(1, 0.25), p_star, 1e-13);
    const SystemState next = step(net, eq, config);
    CHECK(std::abs(next.omega_gen[0] - 0.25) <= 1e-12);
    CHECK(std::abs(next.flows[0] - 0.5) <= 1e-12);
  }

  SUBCASE("halving the step shrinks the endpoint error about 16x") {
    const auto endpoint = [&](double h) {
      IntegratorConfig c = fast_config(h, 1.0);
      const Trajectory t = simulate(net, at_rest(net), c);
      Eigen::VectorXd y(2);
      y << t.final_state.omega_gen[0], t.final_state.flows[0];
      return y;
    };
    const Eigen::VectorXd coarse = endpoint(0.05);
    const Eigen::VectorXd medium = endpoint(0.025);
    const Eigen::VectorXd fine = endpoint(0.0125);
    const double ratio =
        (coarse - medium).norm() / (medium - fine).norm();
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 32.0);
  }
}

TEST_CASE("initial flows from angles") {
  const Network net = fixtures::n1();
  CHECK(initial_flows_from_angles(net, Eigen::VectorXd::Zero(2)).isZero());

  Eigen::VectorXd theta(2);
  theta << 0.1, 0.0;
  CHECK(initial_flows_from_angles(net, theta)[0] ==
        doctest::Approx(0.6).epsilon(1e-12));

  const Network ring = fixtures::ring3();
  oracles::Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd t3(3);
    for (int i = 0; i < 3; ++i) t3[i] = rng.uniform(-0.5, 0.5);
    const Eigen::VectorXd p0 = initial_flows_from_angles(ring, t3);
    // Around the cycle the stiffness-normalized flows cancel.
    const double cycle = p0[0] / ring.stiffness(0) + p0[1] / ring.stiffness(1) -
                         p0[2] / ring.stiffness(2);
    CHECK(std::abs(cycle) <= 1e-12);
  }
}

TEST_CASE("lyapunov value") {
  const Network net = fixtures::n1();
  Eigen::VectorXd p_star(1);
  p_star << 0.5;
  const EquilibriumReference ref =
      make_equilibrium_reference(net, 0.25, p_star);
  CHECK(ref.gamma[0] == 1.0);     // 1/M
  CHECK(ref.xi[0] == 6.0);        // B

  const SystemState eq = assemble_state(
      net, 0.0, Eigen::VectorXd::Constant(1, 0.25), p_star, 1e-13);
  CHECK(lyapunov_value(eq, ref) <= 1e-24);

  const SystemState zero = assemble_state(net, 0.0, Eigen::VectorXd::Zero(1),
                                          Eigen::VectorXd::Zero(1), 1e-12);
  CHECK(lyapunov_value(zero, ref) ==
        doctest::Approx(0.052083333333333336).epsilon(1e-12));

  oracles::Rng rng(71);
  for (int i = 0; i < 30; ++i) {
    const SystemState s = assemble_state(
        net, 0.0, Eigen::VectorXd::Constant(1, rng.uniform(-2.0, 2.0)),
        Eigen::VectorXd::Constant(1, rng.uniform(-2.0, 2.0)), 1e-12);
    CHECK(lyapunov_value(s, ref) >= 0.0);
  }

  Eigen::VectorXd wrong(1);
  wrong << 0.75;  // not an equilibrium flow
  CHECK_THROWS_AS(make_equilibrium_reference(net, 0.25, wrong),
                  ValidationError);
}

TEST_CASE("kkt residuals") {
  const Network net = fixtures::n1();
  Eigen::VectorXd p_star(1);
  p_star << 0.5;
  const SystemState eq = assemble_state(
      net, 0.0, Eigen::VectorXd::Constant(1, 0.25), p_star, 1e-13);
  const KktResiduals at_opt = kkt_residuals(net, eq);
  CHECK(at_opt.stationarity <= 1e-9);
  CHECK(at_opt.sync <= 1e-9);

  const SystemState zero = assemble_state(net, 0.0, Eigen::VectorXd::Zero(1),
                                          Eigen::VectorXd::Zero(1), 1e-12);
  const KktResiduals at_zero = kkt_residuals(net, zero);
  CHECK(at_zero.stationarity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_zero.sync == 0.0);  // synchronized (all zero)
}

TEST_CASE("simulation reaches the optimum on the two-bus line") {
  const Network net = fixtures::n1();
  const OlcSolution sol = solve_olc(net);
  const EquilibriumReference ref =
      make_equilibrium_reference(net, sol.nu_star, sol.flows.point);
  const Trajectory traj = simulate(net, at_rest(net), fast_config(), &ref);

  const Eigen::VectorXd omega = traj.final_state.omega_full();
  CHECK((omega.array() - 0.25).abs().maxCoeff() <= 1e-6);
  CHECK(std::abs(traj.final_state.flows[0] - 0.5) <= 1e-6);
  CHECK((traj.final_state.load - sol.d_star).lpNorm<Eigen::Infinity>() <=
        1e-6);
  CHECK((traj.final_state.sensitive_load - sol.d_hat_star)
            .lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(traj.max_lyapunov_increase <= 1e-8);
  CHECK(traj.final_lyapunov <= 1e-10);
  CHECK(traj.max_tail_variation <= 1e-8);
  CHECK(traj.max_algebraic_residual <= 1e-9);
  CHECK(traj.max_energy_residual <= 1e-9);
}

TEST_CASE("zero disturbance stays exactly at rest") {
  const Network net = Network::build(
      {fixtures::generator(1, 1.0, 1.0, 0.0, fixtures::quadratic(1, -1, 1)),
       fixtures::load(2, 1.0, 0.0, fixtures::quadratic(1, -1, 1))},
      {fixtures::line(1, 2, 6.0)});
  const Trajectory traj = simulate(net, at_rest(net), fast_config(1e-3, 1.0));
  for (const TrajectorySample& s : traj.samples) {
    CHECK(s.omega.isZero());
    CHECK(s.flows.isZero());
    CHECK(s.load.isZero());
    CHECK(s.sensitive_load.isZero());
  }
}

TEST_CASE("mesh trajectories: projection point and set membership") {
  const Network net = fixtures::ring3();
  const OlcSolution sol = solve_olc(net);
  const EquilibriumReference ref =
      make_equilibrium_reference(net, sol.nu_star, sol.flows.point);

  SUBCASE("angle-consistent start lands on the projection point") {
    Eigen::VectorXd theta(3);
    theta << 0.05, -0.02, 0.0;
    const InitialConditions ic{Eigen::VectorXd::Zero(1),
                               initial_flows_from_angles(net, theta)};
    const Trajectory traj = simulate(net, ic, fast_config(), &ref);
    CHECK((traj.final_state.flows - sol.flows.point)
              .lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(traj.max_lyapunov_increase <= 1e-8);
    CHECK(traj.final_lyapunov <= 1e-10);
  }

  SUBCASE("arbitrary start still lands in the equilibrium set") {
    Eigen::VectorXd p0(3);
    p0 << 0.6, 0.0, 0.0;  // no angle vector produces this
    REQUIRE_FALSE(flows_consistent_with_angles(net, p0));
    const InitialConditions ic{Eigen::VectorXd::Zero(1), p0};
    const Trajectory traj = simulate(net, ic, fast_config(), &ref);
    const Eigen::VectorXd final_omega = traj.final_state.omega_full();
    CHECK((final_omega.array() - sol.nu_star).abs().maxCoeff() <= 1e-6);
    CHECK((net.incidence().cast<double>() * traj.final_state.flows -
           sol.h_star)
              .lpNorm<Eigen::Infinity>() <= 1e-6);
    // The limit it picks is the one the conserved circulation predicts.
    CHECK((traj.final_state.flows - predicted_flow_limit(net, sol.flows, p0))
              .lpNorm<Eigen::Infinity>() <= 1e-6);
    // U is still monotone for a reference it does not converge to.
    CHECK(traj.max_lyapunov_increase <= 1e-8);
    CHECK(traj.max_tail_variation <= 1e-8);
  }

  SUBCASE("a different member of the set also works as reference") {
    const Eigen::VectorXd other =
        sol.flows.point + 0.37 * sol.flows.null_basis.col(0);
    const EquilibriumReference shifted =
        make_equilibrium_reference(net, sol.nu_star, other);
    const Trajectory traj =
        simulate(net, at_rest(net), fast_config(), &shifted);
    CHECK(traj.max_lyapunov_increase <= 1e-8);
  }
}

TEST_CASE("sampled controller holds the load between control instants") {
  const Network net = fixtures::n1();
  IntegratorConfig config = fast_config(1e-3, 0.5);
  config.controller = ControllerMode::Sampled;
  config.control_interval = 0.05;
  config.decimation = 10;  // samples fall inside each hold interval
  const Trajectory traj = simulate(net, at_rest(net), config);

  REQUIRE(traj.samples.size() >= 11);
  for (size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const TrajectorySample& a = traj.samples[k];
    const TrajectorySample& b = traj.samples[k + 1];
    const bool same_interval =
        std::floor(a.time / 0.05 + 1e-9) == std::floor(b.time / 0.05 + 1e-9);
    if (same_interval) {
      CHECK((a.load - b.load).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
  // The hold does change across instants while the transient is alive.
  CHECK((traj.samples[0].load - traj.samples[5].load)
            .lpNorm<Eigen::Infinity>() > 0.0);

  // dhat stays continuous: it tracks omega, not the hold.
  for (const TrajectorySample& s : traj.samples) {
    for (int i = 0; i < net.bus_count(); ++i) {
      CHECK(s.sensitive_load[i] ==
            doctest::Approx(net.bus(i).damping * s.omega[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampled controller still settles to the optimum") {
  const Network net = fixtures::n1();
  IntegratorConfig config = fast_config(1e-3, 20.0);
  config.controller = ControllerMode::Sampled;
  config.control_interval = 0.25;
  const Trajectory traj = simulate(net, at_rest(net), config);
  const OlcSolution sol = solve_olc(net);
  const Eigen::VectorXd omega = traj.final_state.omega_full();
  CHECK((omega.array() - sol.nu_star).abs().maxCoeff() <= 1e-4);
}

TEST_CASE("integrator config validation") {
  IntegratorConfig config;
  config.step = 0.0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  config.horizon = 0.0105;  // not a multiple of 1e-3
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  config.decimation = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config = {};
  config.controller = ControllerMode::Sampled;
  config.control_interval = 0.0005;  // below the step
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.control_interval = 0.0033;  // not a multiple
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.control_interval = 0.25;
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("divergence guard aborts on a hopeless step size") {
  const Network net = fixtures::n1();
  IntegratorConfig config;
  config.step = 10.0;
  config.horizon = 10000.0;
  config.decimation = 1000;
  CHECK_THROWS_AS(simulate(net, at_rest(net), config), DivergenceError);
}

TEST_CASE("lyapunov decrease holds on random instances") {
  oracles::Rng rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = fixtures::random_network(rng, rng.uniform_int(2, 8));
    const OlcSolution sol = solve_olc(net);
    const EquilibriumReference ref =
        make_equilibrium_reference(net, sol.nu_star, sol.flows.point);
    InitialConditions ic = at_rest(net);
    for (int e = 0; e < ic.flows.size(); ++e) {
      ic.flows[e] = rng.uniform(-0.5, 0.5);
    }
    const Trajectory traj = simulate(net, ic, fast_config(1e-3, 5.0), &ref);
    CHECK(traj.max_lyapunov_increase <= 1e-8);
    CHECK(traj.max_algebraic_residual <= 1e-9);
    CHECK(traj.max_energy_residual <= 1e-9);
  }
}

TEST_CASE("energy accounting holds at arbitrary states") {
  oracles::Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = fixtures::random_network(rng, rng.uniform_int(2, 7));
    Eigen::VectorXd omega_gen(net.generator_count());
    for (int g = 0; g < omega_gen.size(); ++g) {
      omega_gen[g] = rng.uniform(-1.0, 1.0);
    }
    Eigen::VectorXd flows(net.line_count());
    for (int e = 0; e < flows.size(); ++e) flows[e] = rng.uniform(-1.0, 1.0);
    const SystemState state =
        assemble_state(net, 0.0, omega_gen, flows, 1e-12);
    const Derivatives deriv = rhs(net, state);
    double sum = 0.0;
    for (int g = 0; g < net.generator_count(); ++g) {
      sum += *net.bus(g).inertia * deriv.omega_gen_dot[g];
    }
    for (int i = 0; i < net.bus_count(); ++i) {
      sum += state.load[i] + state.sensitive_load[i] -
             net.bus(i).disturbance;
    }
    CHECK(std::abs(sum) <= 1e-9);
  }
}
