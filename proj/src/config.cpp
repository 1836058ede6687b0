#include "fsep/config.hpp"

#include <fstream>
#include <sstream>

#include "fsep/errors.hpp"

namespace fsep {

using nlohmann::json;

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

const char* phase_name(ExcitationPhase p) {
  switch (p) {
    case ExcitationPhase::Constant: return "constant";
    case ExcitationPhase::Sinusoidal: return "sinusoidal";
    case ExcitationPhase::Off: break;
  }
  return "off";
}

// Typed accessors that turn JSON type errors into ConfigError with the key path.
struct Reader {
  const json& j;
  std::string path;

  const json& at(const char* key) const {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + path + key + "'");
    return j.at(key);
  }
  Reader sub(const char* key) const { return {at(key), path + key + "."}; }

  double num(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError("'" + path + key + "' must be a number");
    return v.get<double>();
  }
  long integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError("'" + path + key + "' must be an integer");
    return v.get<long>();
  }
  bool boolean(const char* key) const {
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError("'" + path + key + "' must be true or false");
    return v.get<bool>();
  }
  std::string str(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError("'" + path + key + "' must be a string");
    return v.get<std::string>();
  }
  Eigen::MatrixXd matrix(const json& v, const std::string& name, int rows, int cols) const {
    if (!v.is_array() || static_cast<int>(v.size()) != rows) {
      throw ConfigError("'" + name + "' must be a " + std::to_string(rows) + "x" + std::to_string(cols) + " array");
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const json& row = v[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != cols) {
        throw ConfigError("'" + name + "' row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
      }
      for (int c = 0; c < cols; ++c) {
        if (!row[static_cast<std::size_t>(c)].is_number()) throw ConfigError("'" + name + "' entries must be numbers");
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    return m;
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vector(const char* key) const {
    const json& v = at(key);
    if (!v.is_array() || v.size() != N) {
      throw ConfigError("'" + path + key + "' must be an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError("'" + path + key + "' entries must be numbers");
      out(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }
};

}  // namespace

json to_json(const ScenarioFile& f) {
  const Scenario& s = f.scenario;
  json j;
  j["name"] = s.name;
  j["duration"] = s.duration;
  j["dt"] = s.dt;
  j["seed"] = s.seed;
  j["mode"] = s.mode == ControllerMode::Proposed ? "proposed" : "nofdd";
  j["metrics_start"] = s.metrics_start;

  const VehicleParams& p = s.params;
  j["vehicle"] = {{"mass", p.mass},         {"gravity", p.gravity},   {"d_phi", p.d_phi},
                  {"d_theta", p.d_theta},   {"inertia", vec(p.inertia)}, {"c_tau_f", p.c_tau_f},
                  {"f_max", p.f_max},       {"body_box", vec(p.body_box)}};

  const FaultConfig& fc = s.fault;
  json aged = json::array();
  for (int i = 0; i < 4; ++i) {
    if (fc.aging_mask[static_cast<std::size_t>(i)]) aged.push_back(i + 1);
  }
  j["fault"] = {{"lambda1", fc.lambda(0)}, {"lambda2", fc.lambda(1)}, {"lambda3", fc.lambda(2)},
                {"lambda4", fc.lambda(3)}, {"t_lambda", fc.t_lambda}, {"T_a", fc.lag_nominal},
                {"T_c", fc.lag_aging},     {"t_Tc", fc.t_aging},      {"aged_rotors", aged},
                {"l_m", vec(fc.cog_offset)}};

  const TrajectoryConfig& t = s.trajectory;
  j["trajectory"] = {{"radius", t.radius},           {"omega", t.omega},       {"climb_rate", t.climb_rate},
                     {"altitude", t.altitude},       {"start_time", t.start_time}};

  json sched = json::array();
  for (const auto& w : s.schedule) {
    sched.push_back({{"phase", phase_name(w.phase)}, {"t_start", w.t_start}, {"t_end", w.t_end}});
  }
  j["excitation"] = {{"alpha", s.excitation.alpha},
                     {"beta", s.excitation.beta},
                     {"target_rotor", s.excitation.target_rotor + 1},
                     {"recovery", s.recovery == LagRecoveryMode::ExactInversion ? "exact" : "paper"},
                     {"schedule", sched}};

  const ObserverConfig& o = s.observer;
  j["observer"] = {{"bandwidth_loe", o.bandwidth_loe},
                   {"bandwidth_load", o.bandwidth_load},
                   {"periodic_pole", o.periodic_pole},
                   {"k1", o.k1 ? mat(*o.k1) : json(nullptr)},
                   {"k2", o.k2 ? mat(*o.k2) : json(nullptr)}};

  const ControllerConfig& c = s.controller;
  j["controller"] = {
      {"smc",
       {{"gamma", vec(c.smc.gamma)},
        {"eps1", c.smc.eps1},
        {"eps2", c.smc.eps2},
        {"eps3", c.smc.eps3},
        {"k", c.smc.k},
        {"boundary_layer", c.smc.boundary_layer}}},
      {"position", {{"kp", vec(c.position.kp)}, {"kd", vec(c.position.kd)}, {"tilt_limit", c.position.tilt_limit}}},
      {"ftdo", {{"lambda0", c.ftdo.lambda0}, {"lambda1", c.ftdo.lambda1}, {"L", c.ftdo.L},
                {"scheme", c.ftdo.scheme == FtdoScheme::Implicit ? "implicit" : "explicit"},
                {"substeps", c.ftdo.substeps}}},
      {"yaw_damping", c.yaw_damping},
      {"command_bandwidth", c.command_bandwidth}};

  const NoiseConfig& n = s.noise;
  j["noise"] = {{"position", n.position}, {"velocity", n.velocity}, {"angles", n.angles}, {"rates", n.rates}};

  const MonteCarloConfig& m = f.montecarlo;
  j["montecarlo"] = {{"runs", m.runs},
                     {"lambda1_min", m.lambda1_min},
                     {"lambda1_max", m.lambda1_max},
                     {"l_m_range", vec(m.l_m_range)},
                     {"threshold", m.threshold},
                     {"compare_nofdd", m.compare_nofdd}};
  return j;
}

json default_config() {
  ScenarioFile f;
  f.scenario = paper_scenario();
  return to_json(f);
}

ScenarioFile from_json(const json& root) {
  json full = default_config();
  merge_config(full, root);
  const Reader r{full, ""};
  ScenarioFile f;
  Scenario& s = f.scenario;
  s.name = r.str("name");
  s.duration = r.num("duration");
  s.dt = r.num("dt");
  const json& seed = r.at("seed");
  if (seed.is_number_unsigned()) {
    s.seed = seed.get<std::uint64_t>();
  } else {
    const long signed_seed = r.integer("seed");
    if (signed_seed < 0) throw ConfigError("'seed' must be non-negative");
    s.seed = static_cast<std::uint64_t>(signed_seed);
  }
  const std::string mode = r.str("mode");
  if (mode == "proposed") {
    s.mode = ControllerMode::Proposed;
  } else if (mode == "nofdd") {
    s.mode = ControllerMode::NoFDD;
  } else {
    throw ConfigError("'mode' must be \"proposed\" or \"nofdd\"");
  }
  s.metrics_start = r.num("metrics_start");

  const Reader v = r.sub("vehicle");
  s.params.mass = v.num("mass");
  s.params.gravity = v.num("gravity");
  s.params.d_phi = v.num("d_phi");
  s.params.d_theta = v.num("d_theta");
  s.params.inertia = v.vector<3>("inertia");
  s.params.c_tau_f = v.num("c_tau_f");
  s.params.f_max = v.num("f_max");
  s.params.body_box = v.vector<3>("body_box");

  const Reader fr = r.sub("fault");
  s.fault.lambda = Vec4(fr.num("lambda1"), fr.num("lambda2"), fr.num("lambda3"), fr.num("lambda4"));
  s.fault.t_lambda = fr.num("t_lambda");
  s.fault.lag_nominal = fr.num("T_a");
  s.fault.lag_aging = fr.num("T_c");
  s.fault.t_aging = fr.num("t_Tc");
  s.fault.cog_offset = fr.vector<3>("l_m");
  s.fault.aging_mask = {false, false, false, false};
  const json& aged = fr.at("aged_rotors");
  if (!aged.is_array()) throw ConfigError("'fault.aged_rotors' must be an array of rotor numbers 1..4");
  for (const auto& a : aged) {
    if (!a.is_number_integer() || a.get<int>() < 1 || a.get<int>() > 4) {
      throw ConfigError("'fault.aged_rotors' entries must be rotor numbers 1..4");
    }
    s.fault.aging_mask[static_cast<std::size_t>(a.get<int>() - 1)] = true;
  }

  const Reader t = r.sub("trajectory");
  s.trajectory.radius = t.num("radius");
  s.trajectory.omega = t.num("omega");
  s.trajectory.climb_rate = t.num("climb_rate");
  s.trajectory.altitude = t.num("altitude");
  s.trajectory.start_time = t.num("start_time");

  const Reader e = r.sub("excitation");
  s.excitation.alpha = e.num("alpha");
  s.excitation.beta = e.num("beta");
  s.excitation.target_rotor = static_cast<int>(e.integer("target_rotor")) - 1;
  const std::string rec = e.str("recovery");
  if (rec == "exact") {
    s.recovery = LagRecoveryMode::ExactInversion;
  } else if (rec == "paper") {
    s.recovery = LagRecoveryMode::PaperFormula;
  } else {
    throw ConfigError("'excitation.recovery' must be \"exact\" or \"paper\"");
  }
  const json& sched = e.at("schedule");
  if (!sched.is_array()) throw ConfigError("'excitation.schedule' must be an array");
  s.schedule.clear();
  for (std::size_t i = 0; i < sched.size(); ++i) {
    const Reader w{sched[i], "excitation.schedule[" + std::to_string(i) + "]."};
    for (const auto& [key, _] : sched[i].items()) {
      if (key != "phase" && key != "t_start" && key != "t_end") {
        throw ConfigError("unknown key '" + w.path + key + "'");
      }
    }
    ExcitationWindow win;
    const std::string ph = w.str("phase");
    if (ph == "constant") {
      win.phase = ExcitationPhase::Constant;
    } else if (ph == "sinusoidal") {
      win.phase = ExcitationPhase::Sinusoidal;
    } else {
      throw ConfigError("'" + w.path + "phase' must be \"constant\" or \"sinusoidal\"");
    }
    win.t_start = w.num("t_start");
    win.t_end = w.num("t_end");
    s.schedule.push_back(win);
  }

  const Reader o = r.sub("observer");
  s.observer.bandwidth_loe = o.num("bandwidth_loe");
  s.observer.bandwidth_load = o.num("bandwidth_load");
  s.observer.periodic_pole = o.num("periodic_pole");
  if (!o.at("k1").is_null()) s.observer.k1 = Mat4(o.matrix(o.at("k1"), "observer.k1", 4, 4));
  if (!o.at("k2").is_null()) s.observer.k2 = Mat3(o.matrix(o.at("k2"), "observer.k2", 3, 3));

  const Reader c = r.sub("controller");
  const Reader smc = c.sub("smc");
  s.controller.smc.gamma = smc.vector<2>("gamma");
  s.controller.smc.eps1 = static_cast<int>(smc.integer("eps1"));
  s.controller.smc.eps2 = static_cast<int>(smc.integer("eps2"));
  s.controller.smc.eps3 = smc.num("eps3");
  s.controller.smc.k = smc.num("k");
  s.controller.smc.boundary_layer = smc.num("boundary_layer");
  const Reader pos = c.sub("position");
  s.controller.position.kp = pos.vector<3>("kp");
  s.controller.position.kd = pos.vector<3>("kd");
  s.controller.position.tilt_limit = pos.num("tilt_limit");
  const Reader ft = c.sub("ftdo");
  s.controller.ftdo.lambda0 = ft.num("lambda0");
  s.controller.ftdo.lambda1 = ft.num("lambda1");
  s.controller.ftdo.L = ft.num("L");
  const std::string scheme = ft.str("scheme");
  if (scheme == "implicit") {
    s.controller.ftdo.scheme = FtdoScheme::Implicit;
  } else if (scheme == "explicit") {
    s.controller.ftdo.scheme = FtdoScheme::Explicit;
  } else {
    throw ConfigError("'controller.ftdo.scheme' must be \"implicit\" or \"explicit\"");
  }
  s.controller.ftdo.substeps = static_cast<int>(ft.integer("substeps"));
  s.controller.yaw_damping = c.num("yaw_damping");
  s.controller.command_bandwidth = c.num("command_bandwidth");

  const Reader n = r.sub("noise");
  s.noise.position = n.num("position");
  s.noise.velocity = n.num("velocity");
  s.noise.angles = n.num("angles");
  s.noise.rates = n.num("rates");

  const Reader m = r.sub("montecarlo");
  f.montecarlo.runs = m.integer("runs");
  f.montecarlo.lambda1_min = m.num("lambda1_min");
  f.montecarlo.lambda1_max = m.num("lambda1_max");
  f.montecarlo.l_m_range = m.vector<3>("l_m_range");
  f.montecarlo.threshold = m.num("threshold");
  f.montecarlo.compare_nofdd = m.boolean("compare_nofdd");

  s.validate();
  return f;
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                      e.what() + ")");
  }
}

void merge_config(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown key '" + here + "'");
    json& slot = base[key];
    if (slot.is_object() && value.is_object()) {
      merge_config(slot, value, here);
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &config;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("override: unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  *node = value;
}

ScenarioFile load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json config = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    merge_config(config, parse_json_text(buf.str(), path.string()));
  }
  for (const auto& o : overrides) apply_override(config, o);
  return from_json(config);
}

}  // namespace fsep
