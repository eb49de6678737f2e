#include "olcsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace olcsim {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path,
                               const std::string& what) {
  throw ScenarioError(path + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& path) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      schema_error(path + "." + item.key(), "unknown field");
    }
  }
}

const json& require(const json& obj, const char* key,
                    const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    schema_error(path + "." + key, "missing required field");
  }
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) schema_error(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected a string");
  return v.get<std::string>();
}

const json& as_object(const json& v, const std::string& path) {
  if (!v.is_object()) schema_error(path, "expected an object");
  return v;
}

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array");
  return v;
}

std::map<int, double> id_map(const json& obj, const std::string& path) {
  std::map<int, double> out;
  for (const auto& item : as_object(obj, path).items()) {
    int id = 0;
    try {
      size_t pos = 0;
      id = std::stoi(item.key(), &pos);
      if (pos != item.key().size()) throw std::invalid_argument(item.key());
    } catch (const std::exception&) {
      schema_error(path + "." + item.key(), "key must be a bus id");
    }
    out[id] = as_number(item.value(), path + "." + item.key());
  }
  return out;
}

BusSpec parse_bus(const json& j, const std::string& path) {
  check_keys(as_object(j, path), {"id", "kind", "M", "D", "P_m", "cost"},
             path);
  BusSpec bus;
  bus.id = as_int(require(j, "id", path), path + ".id");
  const std::string kind = as_string(require(j, "kind", path), path + ".kind");
  if (kind == "generator") {
    bus.kind = BusKind::Generator;
  } else if (kind == "load") {
    bus.kind = BusKind::Load;
  } else {
    schema_error(path + ".kind", "must be \"generator\" or \"load\"");
  }
  if (j.contains("M")) bus.inertia = as_number(j["M"], path + ".M");
  bus.damping = as_number(require(j, "D", path), path + ".D");
  if (j.contains("P_m")) {
    bus.disturbance = as_number(j["P_m"], path + ".P_m");
  }
  const json& cost = as_object(require(j, "cost", path), path + ".cost");
  check_keys(cost, {"alpha", "d_min", "d_max"}, path + ".cost");
  bus.cost.alpha =
      as_number(require(cost, "alpha", path + ".cost"), path + ".cost.alpha");
  bus.cost.d_min =
      as_number(require(cost, "d_min", path + ".cost"), path + ".cost.d_min");
  bus.cost.d_max =
      as_number(require(cost, "d_max", path + ".cost"), path + ".cost.d_max");
  return bus;
}

Line parse_line(const json& j, const std::string& path) {
  check_keys(as_object(j, path),
             {"from", "to", "B", "V_from", "V_to", "x", "theta0_from",
              "theta0_to"},
             path);
  Line line;
  line.from = as_int(require(j, "from", path), path + ".from");
  line.to = as_int(require(j, "to", path), path + ".to");
  if (j.contains("B")) line.stiffness = as_number(j["B"], path + ".B");
  const char* raw_keys[] = {"V_from", "V_to", "x", "theta0_from", "theta0_to"};
  int present = 0;
  for (const char* key : raw_keys) present += j.contains(key) ? 1 : 0;
  if (present == 5) {
    LineRaw raw;
    raw.v_from = as_number(j["V_from"], path + ".V_from");
    raw.v_to = as_number(j["V_to"], path + ".V_to");
    raw.reactance = as_number(j["x"], path + ".x");
    raw.theta0_from = as_number(j["theta0_from"], path + ".theta0_from");
    raw.theta0_to = as_number(j["theta0_to"], path + ".theta0_to");
    line.raw = raw;
  } else if (present != 0) {
    schema_error(path,
                 "raw line parameters require all of V_from, V_to, x, "
                 "theta0_from, theta0_to");
  }
  return line;
}

}  // namespace

void apply_controller_spec(const std::string& spec, IntegratorConfig& config) {
  if (spec == "continuous") {
    config.controller = ControllerMode::Continuous;
    return;
  }
  const std::string prefix = "sampled:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string ms = spec.substr(prefix.size());
    long value = 0;
    try {
      size_t pos = 0;
      value = std::stol(ms, &pos);
      if (pos != ms.size()) throw std::invalid_argument(ms);
    } catch (const std::exception&) {
      throw ScenarioError("controller: malformed interval \"" + ms + "\"");
    }
    if (value <= 0) {
      throw ScenarioError("controller: sampled interval must be > 0 ms");
    }
    config.controller = ControllerMode::Sampled;
    config.control_interval = static_cast<double>(value) / 1000.0;
    return;
  }
  throw ScenarioError("controller: expected \"continuous\" or \"sampled:<ms>\"");
}

std::string controller_spec(const IntegratorConfig& config) {
  if (config.controller == ControllerMode::Continuous) return "continuous";
  std::ostringstream os;
  os << "sampled:" << std::llround(config.control_interval * 1000.0);
  return os.str();
}

Scenario scenario_from_json(const json& root) {
  const std::string top = "scenario";
  check_keys(as_object(root, top),
             {"version", "name", "description", "buses", "lines", "initial",
              "integrator", "analysis"},
             top);

  Scenario sc;
  sc.version = as_int(require(root, "version", top), top + ".version");
  if (sc.version != 1) {
    schema_error(top + ".version", "unsupported version (expected 1)");
  }
  if (root.contains("name")) sc.name = as_string(root["name"], top + ".name");
  if (root.contains("description")) {
    sc.description = as_string(root["description"], top + ".description");
  }

  const json& buses = as_array(require(root, "buses", top), top + ".buses");
  for (size_t i = 0; i < buses.size(); ++i) {
    sc.buses.push_back(
        parse_bus(buses[i], top + ".buses[" + std::to_string(i) + "]"));
  }
  const json& lines = as_array(require(root, "lines", top), top + ".lines");
  for (size_t i = 0; i < lines.size(); ++i) {
    sc.lines.push_back(
        parse_line(lines[i], top + ".lines[" + std::to_string(i) + "]"));
  }

  std::set<int> bus_ids;
  std::set<int> generator_ids;
  for (const BusSpec& bus : sc.buses) {
    bus_ids.insert(bus.id);
    if (bus.kind == BusKind::Generator) generator_ids.insert(bus.id);
  }

  if (root.contains("initial")) {
    const std::string path = top + ".initial";
    const json& initial = as_object(root["initial"], path);
    check_keys(initial, {"omega_g", "flows", "angles"}, path);
    if (initial.contains("omega_g")) {
      sc.initial.omega_gen = id_map(initial["omega_g"], path + ".omega_g");
      std::set<int> given;
      for (const auto& [id, _] : sc.initial.omega_gen) given.insert(id);
      if (given != generator_ids) {
        schema_error(path + ".omega_g",
                     "must list every generator bus id exactly once");
      }
    }
    if (initial.contains("flows") && initial.contains("angles")) {
      schema_error(path, "flows and angles are mutually exclusive");
    }
    if (initial.contains("flows")) {
      const json& flows = as_array(initial["flows"], path + ".flows");
      if (flows.size() != sc.lines.size()) {
        schema_error(path + ".flows",
                     "must list one value per line (" +
                         std::to_string(sc.lines.size()) + " expected)");
      }
      std::vector<double> values;
      for (size_t i = 0; i < flows.size(); ++i) {
        values.push_back(
            as_number(flows[i], path + ".flows[" + std::to_string(i) + "]"));
      }
      sc.initial.flows = std::move(values);
    }
    if (initial.contains("angles")) {
      auto angles = id_map(initial["angles"], path + ".angles");
      std::set<int> given;
      for (const auto& [id, _] : angles) given.insert(id);
      if (given != bus_ids) {
        schema_error(path + ".angles",
                     "must list every bus id exactly once");
      }
      sc.initial.angles = std::move(angles);
    }
  }

  if (root.contains("integrator")) {
    const std::string path = top + ".integrator";
    const json& integ = as_object(root["integrator"], path);
    check_keys(integ,
               {"h", "horizon", "decimation", "controller", "algebraic_tol"},
               path);
    if (integ.contains("h")) {
      sc.integrator.step = as_number(integ["h"], path + ".h");
    }
    if (integ.contains("horizon")) {
      sc.integrator.horizon = as_number(integ["horizon"], path + ".horizon");
    }
    if (integ.contains("decimation")) {
      sc.integrator.decimation =
          as_int(integ["decimation"], path + ".decimation");
    }
    if (integ.contains("algebraic_tol")) {
      sc.integrator.algebraic_tol =
          as_number(integ["algebraic_tol"], path + ".algebraic_tol");
    }
    if (integ.contains("controller")) {
      apply_controller_spec(
          as_string(integ["controller"], path + ".controller"), sc.integrator);
    }
  }

  if (root.contains("analysis")) {
    const std::string path = top + ".analysis";
    const json& analysis = as_object(root["analysis"], path);
    check_keys(analysis, {"lyapunov", "kkt"}, path);
    if (analysis.contains("lyapunov")) {
      sc.analysis.lyapunov = as_bool(analysis["lyapunov"], path + ".lyapunov");
    }
    if (analysis.contains("kkt")) {
      sc.analysis.kkt = as_bool(analysis["kkt"], path + ".kkt");
    }
  }

  return sc;
}

Network Scenario::build_network() const {
  std::vector<Bus> model_buses;
  for (const BusSpec& spec : buses) {
    Bus bus;
    bus.id = spec.id;
    bus.kind = spec.kind;
    bus.inertia = spec.inertia;
    bus.damping = spec.damping;
    bus.disturbance = spec.disturbance;
    try {
      bus.cost = std::make_shared<QuadraticCost>(spec.cost.alpha,
                                                 spec.cost.d_min,
                                                 spec.cost.d_max);
    } catch (const ValidationError& err) {
      throw ValidationError("bus " + std::to_string(spec.id) + ": " +
                            err.what());
    }
    model_buses.push_back(std::move(bus));
  }
  return Network::build(std::move(model_buses), lines);
}

InitialConditions Scenario::build_initial(const Network& net) const {
  InitialConditions ic;
  ic.omega_gen = Eigen::VectorXd::Zero(net.generator_count());
  for (const auto& [id, omega] : initial.omega_gen) {
    ic.omega_gen[net.internal_index(id)] = omega;
  }
  if (initial.angles) {
    Eigen::VectorXd theta(net.bus_count());
    for (const auto& [id, angle] : *initial.angles) {
      theta[net.internal_index(id)] = angle;
    }
    ic.flows = initial_flows_from_angles(net, theta);
  } else if (initial.flows) {
    ic.flows = Eigen::Map<const Eigen::VectorXd>(initial.flows->data(),
                                                 initial.flows->size());
  } else {
    ic.flows = Eigen::VectorXd::Zero(net.line_count());
  }
  return ic;
}

nlohmann::ordered_json scenario_to_json(const Scenario& scenario) {
  nlohmann::ordered_json root;
  root["version"] = scenario.version;
  if (!scenario.name.empty()) root["name"] = scenario.name;
  if (!scenario.description.empty()) {
    root["description"] = scenario.description;
  }
  root["buses"] = nlohmann::ordered_json::array();
  for (const BusSpec& bus : scenario.buses) {
    nlohmann::ordered_json b;
    b["id"] = bus.id;
    b["kind"] = bus.kind == BusKind::Generator ? "generator" : "load";
    if (bus.inertia) b["M"] = *bus.inertia;
    b["D"] = bus.damping;
    b["P_m"] = bus.disturbance;
    b["cost"] = {{"alpha", bus.cost.alpha},
                 {"d_min", bus.cost.d_min},
                 {"d_max", bus.cost.d_max}};
    root["buses"].push_back(std::move(b));
  }
  root["lines"] = nlohmann::ordered_json::array();
  for (const Line& line : scenario.lines) {
    nlohmann::ordered_json l;
    l["from"] = line.from;
    l["to"] = line.to;
    if (line.stiffness) l["B"] = *line.stiffness;
    if (line.raw) {
      l["V_from"] = line.raw->v_from;
      l["V_to"] = line.raw->v_to;
      l["x"] = line.raw->reactance;
      l["theta0_from"] = line.raw->theta0_from;
      l["theta0_to"] = line.raw->theta0_to;
    }
    root["lines"].push_back(std::move(l));
  }
  nlohmann::ordered_json initial;
  if (!scenario.initial.omega_gen.empty()) {
    nlohmann::ordered_json omega;
    for (const auto& [id, value] : scenario.initial.omega_gen) {
      omega[std::to_string(id)] = value;
    }
    initial["omega_g"] = std::move(omega);
  }
  if (scenario.initial.flows) initial["flows"] = *scenario.initial.flows;
  if (scenario.initial.angles) {
    nlohmann::ordered_json angles;
    for (const auto& [id, value] : *scenario.initial.angles) {
      angles[std::to_string(id)] = value;
    }
    initial["angles"] = std::move(angles);
  }
  if (!initial.empty()) root["initial"] = std::move(initial);
  root["integrator"] = {
      {"h", scenario.integrator.step},
      {"horizon", scenario.integrator.horizon},
      {"decimation", scenario.integrator.decimation},
      {"controller", controller_spec(scenario.integrator)},
      {"algebraic_tol", scenario.integrator.algebraic_tol}};
  root["analysis"] = {{"lyapunov", scenario.analysis.lyapunov},
                      {"kkt", scenario.analysis.kkt}};
  return root;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open scenario file: " + path);
  }
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ParseError(path + ": " + err.what());
  }
  Scenario scenario = scenario_from_json(root);
  scenario.integrator.validate();
  const Network net = scenario.build_network();  // surfaces model errors now
  // Initial-condition references are schema-checked above; sizes match the
  // built network by construction.
  (void)net;
  return scenario;
}

}  // namespace olcsim
