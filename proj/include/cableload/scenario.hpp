#pragma once

// Scenario configuration: JSON schema, loading with path-qualified
// diagnostics, serialization and the two reference presets.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cableload/errors.hpp"
#include "cableload/manifold.hpp"
#include "cableload/model.hpp"
#include "cableload/presets.hpp"
#include "cableload/random.hpp"

namespace cableload {

struct LinkInit {
  Vec3 q = e3();  // normalized when the state is built
  Vec3 omega = Vec3::Zero();
};

struct QuadInit {
  Vec3 attitude = Vec3::Zero();  // axis-angle
  Vec3 Omega = Vec3::Zero();
  std::vector<LinkInit> links;
};

/// Seeded perturbation added on top of the listed initial state.
struct Perturbation {
  double position = 0.0;       // m, std dev per axis
  double attitude = 0.0;       // rad, payload and quadrotors
  double link_angle = 0.0;     // rad
};

struct InitialConfig {
  Vec3 x0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  Vec3 attitude = Vec3::Zero();  // payload, axis-angle
  Vec3 Omega0 = Vec3::Zero();
  std::vector<QuadInit> quadrotors;
  Perturbation perturbation;
};

struct LqrWeights {
  double position = 1.0;  // payload position states
  double state = 1.0;     // every other state
  double input = 1.0;
};

struct ControllerSpec {
  std::optional<LqrWeights> lqr;  // one of lqr / explicit gains
  std::optional<MatX> Kx, Kv;
  double k_R = 8.0;
  double k_Omega = 2.0;
  Vec3 b1 = e1();
  std::optional<double> period;  // defaults to the integrator step
};

struct SimulationSpec {
  double dt = 1e-3;
  double duration = 10.0;
  std::string integrator = "rk4";
  std::uint64_t seed = 0;
};

struct OutputSpec {
  std::string directory = "out";
  std::size_t stride = 10;
};

struct ScenarioConfig {
  std::string name = "scenario";
  SystemParams system;
  InitialConfig initial;
  Vec3 target = Vec3::Zero();
  ControllerSpec controller;
  SimulationSpec simulation;
  OutputSpec output;
  std::vector<std::string> notes;  // derived defaults recorded by presets

  double controller_period() const { return controller.period.value_or(simulation.dt); }
};

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void invalid(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::ValidationError, path + ": " + why);
}

inline std::string at(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }
inline std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) invalid(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) invalid(at(path, it.key()), "unknown key");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) invalid(path, "expected a number");
  return j.get<double>();
}

inline double number_or(const json& j, const char* key, const std::string& base, double def) {
  return j.contains(key) ? number(j.at(key), at(base, key)) : def;
}

inline const json& required(const json& j, const char* key, const std::string& base) {
  if (!j.contains(key)) invalid(at(base, key), "missing");
  return j.at(key);
}

inline Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) invalid(path, "expected an array of 3 numbers");
  return Vec3(number(j[0], idx(path, 0)), number(j[1], idx(path, 1)), number(j[2], idx(path, 2)));
}

inline Vec3 vec3_or(const json& j, const char* key, const std::string& base, const Vec3& def) {
  return j.contains(key) ? vec3(j.at(key), at(base, key)) : def;
}

inline MatX matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) invalid(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) invalid(idx(path, 0), "expected an array");
  const std::size_t cols = j[0].size();
  MatX m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rp = idx(path, r);
    if (!j[r].is_array() || j[r].size() != cols) invalid(rp, "expected " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], idx(rp, c));
    }
  }
  return m;
}

inline Mat3 mat3(const json& j, const std::string& path) {
  const MatX m = matrix(j, path);
  if (m.rows() != 3 || m.cols() != 3) invalid(path, "expected a 3x3 matrix");
  return m;
}

inline void positive(double v, const std::string& path) {
  if (!(v > 0.0)) invalid(path, "must be positive");
}

inline void spd(const Mat3& J, const std::string& path) {
  if (!detail::is_spd(J)) invalid(path, "must be symmetric positive definite");
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const MatX& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline SystemParams parse_system(const json& j, const std::string& base) {
  allow_keys(j, base, {"gravity", "payload", "quadrotors"});
  SystemParams p;
  p.gravity = number_or(j, "gravity", base, 9.81);
  positive(p.gravity, at(base, "gravity"));
  const std::string pb = at(base, "payload");
  const json& pl = required(j, "payload", base);
  allow_keys(pl, pb, {"mass", "inertia"});
  p.payload_mass = number(required(pl, "mass", pb), at(pb, "mass"));
  positive(p.payload_mass, at(pb, "mass"));
  p.payload_inertia = mat3(required(pl, "inertia", pb), at(pb, "inertia"));
  spd(p.payload_inertia, at(pb, "inertia"));
  const std::string qb = at(base, "quadrotors");
  const json& qs = required(j, "quadrotors", base);
  if (!qs.is_array() || qs.empty()) invalid(qb, "expected a non-empty array");
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const std::string b = idx(qb, i);
    const json& q = qs[i];
    allow_keys(q, b, {"mass", "inertia", "attachment", "links"});
    QuadrotorParams qp;
    qp.mass = number(required(q, "mass", b), at(b, "mass"));
    positive(qp.mass, at(b, "mass"));
    qp.inertia = mat3(required(q, "inertia", b), at(b, "inertia"));
    spd(qp.inertia, at(b, "inertia"));
    qp.attachment = vec3(required(q, "attachment", b), at(b, "attachment"));
    const std::string lb = at(b, "links");
    const json& ls = required(q, "links", b);
    if (!ls.is_array() || ls.empty()) invalid(lb, "expected a non-empty array");
    for (std::size_t k = 0; k < ls.size(); ++k) {
      const std::string kb = idx(lb, k);
      allow_keys(ls[k], kb, {"mass", "length"});
      LinkParams lp;
      lp.mass = number(required(ls[k], "mass", kb), at(kb, "mass"));
      positive(lp.mass, at(kb, "mass"));
      lp.length = number(required(ls[k], "length", kb), at(kb, "length"));
      positive(lp.length, at(kb, "length"));
      qp.links.push_back(lp);
    }
    p.quadrotors.push_back(std::move(qp));
  }
  return p;
}

inline InitialConfig parse_initial(const json& j, const std::string& base, const SystemParams& p) {
  allow_keys(j, base, {"x0", "v0", "attitude", "Omega0", "quadrotors", "perturbation"});
  InitialConfig c;
  c.x0 = vec3_or(j, "x0", base, Vec3::Zero());
  c.v0 = vec3_or(j, "v0", base, Vec3::Zero());
  c.attitude = vec3_or(j, "attitude", base, Vec3::Zero());
  c.Omega0 = vec3_or(j, "Omega0", base, Vec3::Zero());
  if (j.contains("perturbation")) {
    const std::string b = at(base, "perturbation");
    const json& pj = j.at("perturbation");
    allow_keys(pj, b, {"position", "attitude", "link_angle"});
    c.perturbation.position = number_or(pj, "position", b, 0.0);
    c.perturbation.attitude = number_or(pj, "attitude", b, 0.0);
    c.perturbation.link_angle = number_or(pj, "link_angle", b, 0.0);
    if (c.perturbation.position < 0.0) invalid(at(b, "position"), "must be non-negative");
    if (c.perturbation.attitude < 0.0) invalid(at(b, "attitude"), "must be non-negative");
    if (c.perturbation.link_angle < 0.0) invalid(at(b, "link_angle"), "must be non-negative");
  }
  const std::string qb = at(base, "quadrotors");
  const json* qs = j.contains("quadrotors") ? &j.at("quadrotors") : nullptr;
  if (qs && (!qs->is_array() || qs->size() != p.num_quadrotors())) {
    invalid(qb, "expected " + std::to_string(p.num_quadrotors()) + " entries");
  }
  for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
    QuadInit qi;
    qi.links.assign(p.quadrotors[i].links.size(), LinkInit{});
    if (qs) {
      const std::string b = idx(qb, i);
      const json& q = (*qs)[i];
      allow_keys(q, b, {"attitude", "Omega", "links"});
      qi.attitude = vec3_or(q, "attitude", b, Vec3::Zero());
      qi.Omega = vec3_or(q, "Omega", b, Vec3::Zero());
      if (q.contains("links")) {
        const std::string lb = at(b, "links");
        const json& ls = q.at("links");
        if (!ls.is_array() || ls.size() != qi.links.size()) {
          invalid(lb, "expected " + std::to_string(qi.links.size()) + " entries");
        }
        for (std::size_t k = 0; k < ls.size(); ++k) {
          const std::string kb = idx(lb, k);
          allow_keys(ls[k], kb, {"q", "omega"});
          qi.links[k].q = vec3_or(ls[k], "q", kb, e3());
          qi.links[k].omega = vec3_or(ls[k], "omega", kb, Vec3::Zero());
          if (!(qi.links[k].q.norm() > 1e-9)) invalid(at(kb, "q"), "must be nonzero");
        }
      }
    }
    c.quadrotors.push_back(std::move(qi));
  }
  return c;
}

inline ControllerSpec parse_controller(const json& j, const std::string& base, const SystemParams& p) {
  allow_keys(j, base, {"lqr", "gains", "k_R", "k_Omega", "b1", "period"});
  ControllerSpec c;
  c.k_R = number_or(j, "k_R", base, 8.0);
  positive(c.k_R, at(base, "k_R"));
  c.k_Omega = number_or(j, "k_Omega", base, 2.0);
  positive(c.k_Omega, at(base, "k_Omega"));
  c.b1 = vec3_or(j, "b1", base, e1());
  if (!(c.b1.norm() > 1e-9)) invalid(at(base, "b1"), "must be nonzero");
  if (j.contains("period")) {
    c.period = number(j.at("period"), at(base, "period"));
    positive(*c.period, at(base, "period"));
  }
  if (j.contains("lqr") && j.contains("gains")) invalid(at(base, "gains"), "give either lqr or gains, not both");
  if (j.contains("gains")) {
    const std::string b = at(base, "gains");
    const json& g = j.at("gains");
    allow_keys(g, b, {"Kx", "Kv"});
    c.Kx = matrix(required(g, "Kx", b), at(b, "Kx"));
    c.Kv = matrix(required(g, "Kv", b), at(b, "Kv"));
    const auto rows = static_cast<Eigen::Index>(3 * p.num_quadrotors());
    const auto cols = static_cast<Eigen::Index>(p.reduced_dim());
    const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
    if (c.Kx->rows() != rows || c.Kx->cols() != cols) invalid(at(b, "Kx"), "expected " + shape);
    if (c.Kv->rows() != rows || c.Kv->cols() != cols) invalid(at(b, "Kv"), "expected " + shape);
  } else {
    LqrWeights w;
    if (j.contains("lqr")) {
      const std::string b = at(base, "lqr");
      const json& l = j.at("lqr");
      allow_keys(l, b, {"position", "state", "input"});
      w.position = number_or(l, "position", b, 1.0);
      w.state = number_or(l, "state", b, 1.0);
      w.input = number_or(l, "input", b, 1.0);
      positive(w.position, at(b, "position"));
      positive(w.state, at(b, "state"));
      positive(w.input, at(b, "input"));
    }
    c.lqr = w;
  }
  return c;
}

}  // namespace config_detail

inline nlohmann::json to_json(const ScenarioConfig& c) {
  using config_detail::to_json;
  using nlohmann::json;
  json sys;
  sys["gravity"] = c.system.gravity;
  sys["payload"] = {{"mass", c.system.payload_mass}, {"inertia", to_json(MatX(c.system.payload_inertia))}};
  json qs = json::array();
  for (const auto& q : c.system.quadrotors) {
    json links = json::array();
    for (const auto& l : q.links) links.push_back({{"mass", l.mass}, {"length", l.length}});
    qs.push_back({{"mass", q.mass},
                  {"inertia", to_json(MatX(q.inertia))},
                  {"attachment", to_json(q.attachment)},
                  {"links", std::move(links)}});
  }
  sys["quadrotors"] = std::move(qs);

  json init;
  init["x0"] = to_json(c.initial.x0);
  init["v0"] = to_json(c.initial.v0);
  init["attitude"] = to_json(c.initial.attitude);
  init["Omega0"] = to_json(c.initial.Omega0);
  json iq = json::array();
  for (const auto& q : c.initial.quadrotors) {
    json links = json::array();
    for (const auto& l : q.links) links.push_back({{"q", to_json(l.q)}, {"omega", to_json(l.omega)}});
    iq.push_back({{"attitude", to_json(q.attitude)}, {"Omega", to_json(q.Omega)}, {"links", std::move(links)}});
  }
  init["quadrotors"] = std::move(iq);
  init["perturbation"] = {{"position", c.initial.perturbation.position},
                          {"attitude", c.initial.perturbation.attitude},
                          {"link_angle", c.initial.perturbation.link_angle}};

  json ctrl;
  if (c.controller.lqr) {
    ctrl["lqr"] = {{"position", c.controller.lqr->position},
                   {"state", c.controller.lqr->state},
                   {"input", c.controller.lqr->input}};
  } else {
    ctrl["gains"] = {{"Kx", to_json(*c.controller.Kx)}, {"Kv", to_json(*c.controller.Kv)}};
  }
  ctrl["k_R"] = c.controller.k_R;
  ctrl["k_Omega"] = c.controller.k_Omega;
  ctrl["b1"] = to_json(c.controller.b1);
  if (c.controller.period) ctrl["period"] = *c.controller.period;

  json out;
  out["name"] = c.name;
  if (!c.notes.empty()) out["notes"] = c.notes;
  out["system"] = std::move(sys);
  out["initial_state"] = std::move(init);
  out["target"] = to_json(c.target);
  out["controller"] = std::move(ctrl);
  out["simulation"] = {{"dt", c.simulation.dt},
                       {"duration", c.simulation.duration},
                       {"integrator", c.simulation.integrator},
                       {"seed", c.simulation.seed}};
  out["output"] = {{"directory", c.output.directory}, {"stride", c.output.stride}};
  return out;
}

inline std::string serialize(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  allow_keys(j, "", {"name", "notes", "system", "initial_state", "target", "controller", "simulation", "output"});
  ScenarioConfig c;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) invalid("name", "expected a string");
    c.name = j.at("name").get<std::string>();
  }
  if (j.contains("notes")) {
    const json& n = j.at("notes");
    if (!n.is_array()) invalid("notes", "expected an array of strings");
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!n[i].is_string()) invalid(idx("notes", i), "expected a string");
      c.notes.push_back(n[i].get<std::string>());
    }
  }
  c.system = parse_system(required(j, "system", ""), "system");
  c.initial = parse_initial(j.contains("initial_state") ? j.at("initial_state") : json::object(), "initial_state",
                            c.system);
  c.target = vec3(required(j, "target", ""), "target");
  c.controller = parse_controller(j.contains("controller") ? j.at("controller") : json::object(), "controller",
                                  c.system);
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    allow_keys(s, "simulation", {"dt", "duration", "integrator", "seed"});
    c.simulation.dt = number_or(s, "dt", "simulation", 1e-3);
    positive(c.simulation.dt, "simulation.dt");
    c.simulation.duration = number_or(s, "duration", "simulation", 10.0);
    if (!(c.simulation.duration >= 0.0)) invalid("simulation.duration", "must be non-negative");
    if (s.contains("integrator")) {
      if (!s.at("integrator").is_string()) invalid("simulation.integrator", "expected a string");
      c.simulation.integrator = s.at("integrator").get<std::string>();
    }
    if (c.simulation.integrator != "rk4") invalid("simulation.integrator", "only \"rk4\" is available");
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) invalid("simulation.seed", "expected a non-negative integer");
      c.simulation.seed = s.at("seed").get<std::uint64_t>();
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    allow_keys(o, "output", {"directory", "stride"});
    if (o.contains("directory")) {
      if (!o.at("directory").is_string()) invalid("output.directory", "expected a string");
      c.output.directory = o.at("directory").get<std::string>();
    }
    if (o.contains("stride")) {
      if (!o.at("stride").is_number_unsigned() || o.at("stride").get<std::size_t>() == 0) {
        invalid("output.stride", "expected a positive integer");
      }
      c.output.stride = o.at("stride").get<std::size_t>();
    }
  }
  return c;
}

/// Line number (1-based) of a byte offset.
inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) line += text[k] == '\n';
  return line;
}

inline ScenarioConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is one past the offending character
    const std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_of(text, pos)) + ": " + e.what());
  }
  return config_from_json(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Initial state with the seeded perturbation applied.
inline SystemState initial_state(const ScenarioConfig& c) {
  const SystemParams& p = c.system;
  const InitialConfig& ic = c.initial;
  SystemState s;
  s.x0 = ic.x0;
  s.v0 = ic.v0;
  s.R0 = exp_so3(ic.attitude);
  s.Omega0 = ic.Omega0;
  for (std::size_t i = 0; i < p.num_quadrotors(); ++i) {
    QuadrotorState qs;
    qs.R = exp_so3(ic.quadrotors[i].attitude);
    qs.Omega = ic.quadrotors[i].Omega;
    for (const auto& l : ic.quadrotors[i].links) {
      const UnitVector q = UnitVector::normalized(l.q);
      // drop any normal component of the rate
      const Vec3 w = l.omega - l.omega.dot(q.vector()) * q.vector();
      qs.links.push_back(LinkState{q, w});
    }
    s.quadrotors.push_back(std::move(qs));
  }
  const Perturbation& d = ic.perturbation;
  if (d.position > 0.0 || d.attitude > 0.0 || d.link_angle > 0.0) {
    RandomSource rng(c.simulation.seed);
    s.x0 += rng.normal3(d.position);
    s.R0 = s.R0 * rng.rotation(d.attitude);
    for (auto& qs : s.quadrotors) {
      qs.R = qs.R * rng.rotation(d.attitude);
      for (auto& l : qs.links) {
        const Vec3 w = rng.tangent(l.q.vector(), d.link_angle);
        const UnitVector q = UnitVector::normalized(exp_so3(l.q.vector().cross(w)) * l.q.vector());
        l.omega -= l.omega.dot(q.vector()) * q.vector();
        l.q = q;
      }
    }
  }
  validate(p, s);
  return s;
}

/// State weight diag(position x3, state ...), input weight input * I.
inline std::pair<MatX, MatX> lqr_weight_matrices(const SystemParams& p, const LqrWeights& w) {
  const auto D = static_cast<Eigen::Index>(p.reduced_dim());
  MatX Q = w.state * MatX::Identity(2 * D, 2 * D);
  Q.topLeftCorner(3, 3) = w.position * Mat3::Identity();
  const auto m = static_cast<Eigen::Index>(3 * p.num_quadrotors());
  return {Q, w.input * MatX::Identity(m, m)};
}

namespace detail {
inline ScenarioConfig preset_from(const std::string& name, const SystemParams& p, const SystemState& s) {
  ScenarioConfig c;
  c.name = name;
  c.system = p;
  c.initial.x0 = s.x0;
  c.initial.v0 = s.v0;
  c.initial.attitude = log_so3(s.R0);
  c.initial.Omega0 = s.Omega0;
  for (const auto& qs : s.quadrotors) {
    QuadInit qi;
    qi.attitude = log_so3(qs.R);
    qi.Omega = qs.Omega;
    for (const auto& l : qs.links) qi.links.push_back(LinkInit{l.q.vector(), l.omega});
    c.initial.quadrotors.push_back(std::move(qi));
  }
  c.target = reference_target();
  c.controller.lqr = LqrWeights{10.0, 1.0, 1.0};
  c.notes.push_back("derived default: payload inertia from a uniform-density box");
  c.notes.push_back("derived default: LQR weights 10 on payload position, 1 elsewhere");
  return c;
}
}  // namespace detail

inline ScenarioConfig preset_case1() {
  ScenarioConfig c = detail::preset_from("case1", case1_params(), case1_initial_state());
  c.notes[0] += " 0.6 x 0.8 x 0.2 m";
  c.output.directory = "out/case1";
  return c;
}

inline ScenarioConfig preset_case2() {
  ScenarioConfig c = detail::preset_from("case2", case2_params(), case2_initial_state());
  c.notes[0] += " 1.0 x 1.2 x 0.2 m";
  c.notes.push_back(
      "derived default: cables 1 and 3 arc in the e1-e3 plane from 60 deg at the quadrotor to vertical at the "
      "payload, bent away from the payload centre");
  c.output.directory = "out/case2";
  return c;
}

}  // namespace cableload
