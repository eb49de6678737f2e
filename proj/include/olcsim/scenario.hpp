#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "olcsim/dynamics.hpp"
#include "olcsim/network.hpp"

namespace olcsim {

/// Quadratic cost parameters as they appear in scenario files.
struct CostSpec {
  double alpha = 1.0;
  double d_min = 0.0;
  double d_max = 0.0;
};

struct BusSpec {
  int id = 0;
  BusKind kind = BusKind::Load;
  std::optional<double> inertia;
  double damping = 0.0;
  double disturbance = 0.0;
  CostSpec cost;
};

/// Initial conditions in file terms: generator frequencies by bus id and
/// either explicit per-line flows or per-bus angles.
struct InitialSpec {
  std::map<int, double> omega_gen;
  std::optional<std::vector<double>> flows;
  std::optional<std::map<int, double>> angles;
};

struct AnalysisToggles {
  bool lyapunov = true;
  bool kkt = true;
};

/// A fully validated scenario. Loading builds the network once, so a
/// Scenario in hand always describes a usable instance; the raw bus/line
/// lists are kept in input order for round-tripping.
struct Scenario {
  int version = 1;
  std::string name;
  std::string description;
  std::vector<BusSpec> buses;
  std::vector<Line> lines;  // stiffness/raw exactly as given
  InitialSpec initial;
  IntegratorConfig integrator;
  AnalysisToggles analysis;

  Network build_network() const;
  InitialConditions build_initial(const Network& net) const;
};

/// Parses "continuous" or "sampled:<ms>" (the CLI grammar).
void apply_controller_spec(const std::string& spec, IntegratorConfig& config);
std::string controller_spec(const IntegratorConfig& config);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json scenario_to_json(const Scenario& scenario);

/// Reads and validates a scenario file. Throws ParseError when the file is
/// missing or not JSON, ScenarioError on schema violations, and
/// ValidationError when the described network or config is invalid.
Scenario load_scenario(const std::string& path);

}  // namespace olcsim
