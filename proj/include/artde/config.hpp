#pragma once

#include <fstream>
#include <functional>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "artde/sim.hpp"

namespace artde {

using Json = nlohmann::ordered_json;

/// Schema errors gathered during one parse; each entry names the offending key.
class ConfigErrors : public Error {
 public:
  explicit ConfigErrors(std::vector<std::string> errors)
      : Error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::ostringstream oss;
    oss << errs.size() << " configuration error" << (errs.size() == 1 ? "" : "s") << ':';
    for (const auto& e : errs) oss << "\n  - " << e;
    return oss.str();
  }
  std::vector<std::string> errors_;
};

namespace detail {

// Reads typed fields out of a JSON object, recording problems instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& msg) { errors_.push_back(path + ": " + msg); }

  bool object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
      if (!keys.count(k)) error(join(path, k), "unknown key");
    return true;
  }

  template <class T>
  void number(const Json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (!v.is_number()) {
      error(join(path, key), "expected a number");
      return;
    }
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<double>() < 0.0)) {
        error(join(path, key), "expected a non-negative integer");
        return;
      }
    }
    out = v.get<T>();
  }

  void boolean(const Json& j, const std::string& path, const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) {
      error(join(path, key), "expected true or false");
      return;
    }
    out = j.at(key).get<bool>();
  }

  template <class Parse, class T>
  void enumeration(const Json& j, const std::string& path, const char* key, Parse parse, T& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) {
      error(join(path, key), "expected a string");
      return;
    }
    try {
      out = parse(j.at(key).get<std::string>());
    } catch (const Error& e) {
      error(join(path, key), e.what());
    }
  }

  void vector(const Json& j, const std::string& path, const char* key, Vector& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (!v.is_array()) {
      error(join(path, key), "expected an array of numbers");
      return;
    }
    Vector tmp(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        error(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
        return;
      }
      tmp(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    out = tmp;
  }

  void vector3(const Json& j, const std::string& path, const char* key, Vector3& out) {
    Vector v = out;
    vector(j, path, key, v);
    if (v.size() != 3)
      error(join(path, key), "expected 3 entries");
    else
      out = v;
  }

  // A matrix may be written as a scalar (times identity), a vector (diagonal)
  // or rows of numbers.
  void matrix(const Json& j, const std::string& path, const char* key, Eigen::Index n, Matrix& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    const std::string where = join(path, key);
    if (v.is_number()) {
      out = v.get<double>() * Matrix::Identity(n, n);
      return;
    }
    if (!v.is_array() || v.empty()) {
      error(where, "expected a number, a diagonal or a list of rows");
      return;
    }
    if (v[0].is_number()) {
      Vector d;
      vector(j, path, key, d);
      if (d.size() != n) {
        error(where, "diagonal must have " + std::to_string(n) + " entries");
        return;
      }
      out = d.asDiagonal();
      return;
    }
    if (static_cast<Eigen::Index>(v.size()) != n) {
      error(where, "expected " + std::to_string(n) + " rows");
      return;
    }
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Json& row = v[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        error(where + "[" + std::to_string(r) + "]", "expected a row of " + std::to_string(n) + " numbers");
        return;
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        if (!row[static_cast<std::size_t>(c)].is_number()) {
          error(where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]", "expected a number");
          return;
        }
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    out = m;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<std::string>& errors_;
};

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Scalar for c*I, diagonal list for diagonal matrices, rows otherwise.
inline Json to_json(const Matrix& m) {
  const bool diagonal = m.isDiagonal(0.0);
  if (diagonal && m.rows() > 0) {
    const Vector d = m.diagonal();
    if ((d.array() == d(0)).all()) return d(0);
    return to_json(d);
  }
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

inline ControllerConfig default_controller(Eigen::Index n, double m_bar, double kp, double kd) {
  ControllerConfig c;
  c.m_bar = m_bar * Matrix::Identity(n, n);
  c.kp = kp * Matrix::Identity(n, n);
  c.kd = kd * Matrix::Identity(n, n);
  c.q_lyap = Matrix::Identity(2 * n, 2 * n);
  return c;
}

inline void read_loop(Reader& rd, const Json& j, const std::string& path, Eigen::Index n, LoopSettings& loop) {
  if (!rd.object(j, path, {"m_bar", "kp", "kd", "q", "alpha", "epsilon", "gains"})) return;
  rd.matrix(j, path, "m_bar", n, loop.config.m_bar);
  rd.matrix(j, path, "kp", n, loop.config.kp);
  rd.matrix(j, path, "kd", n, loop.config.kd);
  rd.matrix(j, path, "q", 2 * n, loop.config.q_lyap);
  rd.number(j, path, "alpha", loop.config.alpha);
  rd.number(j, path, "epsilon", loop.config.epsilon);
  if (j.contains("gains")) {
    const Json& g = j.at("gains");
    const std::string gp = Reader::join(path, "gains");
    if (rd.object(g, gp, {"beta0", "beta1", "floor0", "floor1", "gamma0", "gamma1"})) {
      rd.number(g, gp, "beta0", loop.gains.beta0);
      rd.number(g, gp, "beta1", loop.gains.beta1);
      rd.number(g, gp, "floor0", loop.gains.floor0);
      rd.number(g, gp, "floor1", loop.gains.floor1);
      rd.number(g, gp, "gamma0", loop.gains.gamma0);
      rd.number(g, gp, "gamma1", loop.gains.gamma1);
    }
  }
}

inline Json loop_json(const LoopSettings& loop) {
  Json j;
  j["m_bar"] = to_json(loop.config.m_bar);
  j["kp"] = to_json(loop.config.kp);
  j["kd"] = to_json(loop.config.kd);
  j["q"] = to_json(loop.config.q_lyap);
  j["alpha"] = loop.config.alpha;
  j["epsilon"] = loop.config.epsilon;
  j["gains"] = {{"beta0", loop.gains.beta0}, {"beta1", loop.gains.beta1},   {"floor0", loop.gains.floor0},
                {"floor1", loop.gains.floor1}, {"gamma0", loop.gains.gamma0}, {"gamma1", loop.gains.gamma1}};
  return j;
}

inline PulseShape parse_pulse_shape(std::string_view s) {
  if (s == "half_sine") return PulseShape::HalfSine;
  if (s == "rectangular") return PulseShape::Rectangular;
  fail("unknown pulse shape '", s, "' (expected half_sine or rectangular)");
}

inline std::string to_string(PulseShape s) { return s == PulseShape::HalfSine ? "half_sine" : "rectangular"; }

}  // namespace detail

/// Parses a scenario. Missing keys take their defaults; all problems are
/// collected and thrown together as ConfigErrors. Cross-field rules are
/// checked by validate().
inline ScenarioConfig parse_scenario(const Json& j) {
  std::vector<std::string> errs;
  detail::Reader rd(errs);
  ScenarioConfig c;
  if (!rd.object(j, "", {"name", "plant", "variant", "duration", "dt", "control_period", "seed",
                         "divergence_bound", "attitude_filter_bandwidth", "chain", "disturbance", "controller", "quadrotor", "wind",
                         "position", "attitude", "trajectory", "events"}))
    throw ConfigErrors(errs);

  if (j.contains("name")) {
    if (j.at("name").is_string())
      c.name = j.at("name").get<std::string>();
    else
      rd.error("name", "expected a string");
  }
  rd.enumeration(j, "", "plant", parse_plant_kind, c.plant);
  rd.enumeration(j, "", "variant", parse_variant, c.variant);
  rd.number(j, "", "duration", c.duration);
  rd.number(j, "", "dt", c.dt);
  rd.number(j, "", "control_period", c.control_period);
  rd.number(j, "", "seed", c.seed);
  rd.number(j, "", "divergence_bound", c.divergence_bound);
  rd.number(j, "", "attitude_filter_bandwidth", c.attitude_filter_bandwidth);

  const bool chain = c.plant == PlantKind::Chain;
  for (const char* key : {"chain", "disturbance", "controller"})
    if (!chain && j.contains(key)) rd.error(key, "only valid for a chain plant");
  for (const char* key : {"quadrotor", "wind", "position", "attitude"})
    if (chain && j.contains(key)) rd.error(key, "only valid for a quadrotor plant");

  Eigen::Index n = 3;
  if (chain) {
    c.chain.friction = Vector();
    if (!j.contains("chain")) {
      rd.error("chain", "missing chain description");
    } else {
      const Json& cj = j.at("chain");
      if (rd.object(cj, "chain", {"links", "friction", "armature", "gravity"})) {
        rd.number(cj, "chain", "gravity", c.chain.gravity);
        if (!cj.contains("links") || !cj.at("links").is_array()) {
          rd.error("chain.links", "expected an array of links");
        } else {
          const Json& links = cj.at("links");
          for (std::size_t i = 0; i < links.size(); ++i) {
            const std::string lp = "chain.links[" + std::to_string(i) + "]";
            Link l;
            if (rd.object(links[i], lp, {"mass", "length", "com", "inertia"})) {
              rd.number(links[i], lp, "mass", l.mass);
              rd.number(links[i], lp, "length", l.length);
              rd.number(links[i], lp, "com", l.com);
              rd.number(links[i], lp, "inertia", l.inertia);
            }
            c.chain.links.push_back(l);
          }
        }
        n = std::max<Eigen::Index>(c.chain.dof(), 1);
        c.chain.friction = Vector::Zero(n);
        rd.vector(cj, "chain", "friction", c.chain.friction);
        rd.vector(cj, "chain", "armature", c.chain.armature);
      }
    }
    c.chain_disturbance = DisturbanceProfile::none(n);
    if (j.contains("disturbance")) {
      const Json& dj = j.at("disturbance");
      if (rd.object(dj, "disturbance", {"bias", "d0", "d1", "impulses"})) {
        rd.vector(dj, "disturbance", "bias", c.chain_disturbance.bias);
        rd.matrix(dj, "disturbance", "d0", n, c.chain_disturbance.d0);
        rd.matrix(dj, "disturbance", "d1", n, c.chain_disturbance.d1);
        if (dj.contains("impulses")) {
          if (!dj.at("impulses").is_array()) {
            rd.error("disturbance.impulses", "expected an array");
          } else {
            const Json& ij = dj.at("impulses");
            for (std::size_t i = 0; i < ij.size(); ++i) {
              const std::string ip = "disturbance.impulses[" + std::to_string(i) + "]";
              Impulse p;
              p.mask = Vector::Ones(n);
              if (rd.object(ij[i], ip, {"start", "duration", "peak", "mask", "shape", "repeat_period",
                                        "repeat_until"})) {
                rd.number(ij[i], ip, "start", p.start);
                rd.number(ij[i], ip, "duration", p.duration);
                rd.number(ij[i], ip, "peak", p.peak);
                rd.vector(ij[i], ip, "mask", p.mask);
                rd.enumeration(ij[i], ip, "shape", detail::parse_pulse_shape, p.shape);
                rd.number(ij[i], ip, "repeat_period", p.repeat_period);
                rd.number(ij[i], ip, "repeat_until", p.repeat_until);
              }
              c.chain_disturbance.impulses.push_back(p);
            }
          }
        }
      }
    }
    c.joint.config = detail::default_controller(n, 0.042, 25.0, 10.0);
    if (j.contains("controller")) detail::read_loop(rd, j.at("controller"), "controller", n, c.joint);
  } else {
    if (j.contains("quadrotor")) {
      const Json& qj = j.at("quadrotor");
      if (rd.object(qj, "quadrotor",
                    {"mass", "inertia", "gravity", "payload_mass", "payload_attached", "euler_coupling"})) {
        rd.number(qj, "quadrotor", "mass", c.quad.mass);
        Matrix inertia = c.quad.inertia;
        rd.matrix(qj, "quadrotor", "inertia", 3, inertia);
        c.quad.inertia = inertia;
        rd.number(qj, "quadrotor", "gravity", c.quad.gravity);
        rd.number(qj, "quadrotor", "payload_mass", c.quad.payload_mass);
        rd.boolean(qj, "quadrotor", "payload_attached", c.quad.payload_attached);
        rd.boolean(qj, "quadrotor", "euler_coupling", c.quad.euler_coupling);
      }
    }
    if (j.contains("wind")) {
      const Json& wj = j.at("wind");
      auto& d = c.quad_disturbance;
      if (rd.object(wj, "wind", {"bias", "noise_std", "bandwidth", "drag", "ground_effect_gain",
                                 "ground_effect_offset", "torque_bias", "torque_noise_std", "rotational_drag"})) {
        rd.vector3(wj, "wind", "bias", d.wind_bias);
        rd.vector3(wj, "wind", "noise_std", d.wind_noise_std);
        rd.number(wj, "wind", "bandwidth", d.wind_bandwidth);
        rd.number(wj, "wind", "drag", d.drag);
        rd.number(wj, "wind", "ground_effect_gain", d.ground_effect_gain);
        rd.number(wj, "wind", "ground_effect_offset", d.ground_effect_offset);
        rd.vector3(wj, "wind", "torque_bias", d.torque_bias);
        rd.vector3(wj, "wind", "torque_noise_std", d.torque_noise_std);
        rd.number(wj, "wind", "rotational_drag", d.rotational_drag);
      }
    }
    c.position.config = detail::default_controller(3, 1.0, 10.0, 5.0);
    c.attitude.config = detail::default_controller(3, 0.015, 10.0, 5.0);
    if (j.contains("position")) detail::read_loop(rd, j.at("position"), "position", 3, c.position);
    if (j.contains("attitude")) detail::read_loop(rd, j.at("attitude"), "attitude", 3, c.attitude);
  }

  const Eigen::Index traj_dim = chain ? n : 3;
  c.trajectory.offsets = Vector::Zero(traj_dim);
  if (j.contains("trajectory")) {
    const Json& tj = j.at("trajectory");
    if (rd.object(tj, "trajectory",
                  {"kind", "amplitudes", "offsets", "phases", "period", "ramp", "yaw", "yaw_rate"})) {
      rd.enumeration(tj, "trajectory", "kind", parse_trajectory_kind, c.trajectory.kind);
      rd.vector(tj, "trajectory", "amplitudes", c.trajectory.amplitudes);
      rd.vector(tj, "trajectory", "offsets", c.trajectory.offsets);
      rd.vector(tj, "trajectory", "phases", c.trajectory.phases);
      rd.number(tj, "trajectory", "period", c.trajectory.period);
      rd.number(tj, "trajectory", "ramp", c.trajectory.ramp);
      rd.number(tj, "trajectory", "yaw", c.trajectory.yaw);
      rd.number(tj, "trajectory", "yaw_rate", c.trajectory.yaw_rate);
    }
  }
  if (c.trajectory.kind == TrajectoryKind::JointSinusoid && c.trajectory.phases.size() == 0)
    c.trajectory.phases = Vector::Zero(c.trajectory.offsets.size());

  if (j.contains("events")) {
    if (!j.at("events").is_array()) {
      rd.error("events", "expected an array");
    } else {
      const Json& ej = j.at("events");
      for (std::size_t i = 0; i < ej.size(); ++i) {
        const std::string ep = "events[" + std::to_string(i) + "]";
        Event ev;
        if (rd.object(ej[i], ep, {"time", "kind", "value", "link"})) {
          rd.number(ej[i], ep, "time", ev.time);
          rd.enumeration(ej[i], ep, "kind", parse_event_kind, ev.kind);
          rd.number(ej[i], ep, "value", ev.value);
          rd.number(ej[i], ep, "link", ev.link);
        }
        c.events.push_back(ev);
      }
    }
  }

  if (!errs.empty()) throw ConfigErrors(errs);
  return c;
}

inline Json to_json(const ScenarioConfig& c) {
  Json j;
  j["name"] = c.name;
  j["plant"] = to_string(c.plant);
  j["variant"] = to_string(c.variant);
  j["duration"] = c.duration;
  j["dt"] = c.dt;
  j["control_period"] = c.control_period;
  j["seed"] = c.seed;
  j["divergence_bound"] = c.divergence_bound;
  if (c.plant == PlantKind::Quadrotor) j["attitude_filter_bandwidth"] = c.attitude_filter_bandwidth;
  if (c.plant == PlantKind::Chain) {
    Json links = Json::array();
    for (const Link& l : c.chain.links)
      links.push_back({{"mass", l.mass}, {"length", l.length}, {"com", l.com}, {"inertia", l.inertia}});
    j["chain"] = {{"links", links}, {"friction", detail::to_json(c.chain.friction)},
                 {"armature", detail::to_json(c.chain.armature)}, {"gravity", c.chain.gravity}};
    Json impulses = Json::array();
    for (const Impulse& p : c.chain_disturbance.impulses)
      impulses.push_back({{"start", p.start},
                          {"duration", p.duration},
                          {"peak", p.peak},
                          {"mask", detail::to_json(p.mask)},
                          {"shape", detail::to_string(p.shape)},
                          {"repeat_period", p.repeat_period},
                          {"repeat_until", p.repeat_until}});
    j["disturbance"] = {{"bias", detail::to_json(c.chain_disturbance.bias)},
                        {"d0", detail::to_json(c.chain_disturbance.d0)},
                        {"d1", detail::to_json(c.chain_disturbance.d1)},
                        {"impulses", impulses}};
    j["controller"] = detail::loop_json(c.joint);
  } else {
    j["quadrotor"] = {{"mass", c.quad.mass},
                      {"inertia", detail::to_json(Matrix(c.quad.inertia))},
                      {"gravity", c.quad.gravity},
                      {"payload_mass", c.quad.payload_mass},
                      {"payload_attached", c.quad.payload_attached},
                      {"euler_coupling", c.quad.euler_coupling}};
    const auto& d = c.quad_disturbance;
    j["wind"] = {{"bias", detail::to_json(Vector(d.wind_bias))},
                 {"noise_std", detail::to_json(Vector(d.wind_noise_std))},
                 {"bandwidth", d.wind_bandwidth},
                 {"drag", d.drag},
                 {"ground_effect_gain", d.ground_effect_gain},
                 {"ground_effect_offset", d.ground_effect_offset},
                 {"torque_bias", detail::to_json(Vector(d.torque_bias))},
                 {"torque_noise_std", detail::to_json(Vector(d.torque_noise_std))},
                 {"rotational_drag", d.rotational_drag}};
    j["position"] = detail::loop_json(c.position);
    j["attitude"] = detail::loop_json(c.attitude);
  }
  const TrajectorySpec& t = c.trajectory;
  j["trajectory"] = {{"kind", to_string(t.kind)},          {"amplitudes", detail::to_json(t.amplitudes)},
                     {"offsets", detail::to_json(t.offsets)}, {"phases", detail::to_json(t.phases)},
                     {"period", t.period},                    {"ramp", t.ramp},
                     {"yaw", t.yaw},                          {"yaw_rate", t.yaw_rate}};
  Json events = Json::array();
  for (const Event& ev : c.events)
    events.push_back({{"time", ev.time}, {"kind", to_string(ev.kind)}, {"value", ev.value}, {"link", ev.link}});
  j["events"] = events;
  return j;
}

/// Applies a dotted-path override such as "controller.alpha=2" or
/// "chain.links.1.mass=0.9". The value is read as JSON when possible and as a
/// plain string otherwise.
inline void apply_override(Json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    detail::fail("override '", assignment, "' must have the form key=value");
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) detail::fail("override '", path, "': empty path segment");
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        detail::fail("override '", path, "': '", key, "' is not an array index");
      }
      if (idx >= node->size()) detail::fail("override '", path, "': index ", idx, " out of range");
      node = &(*node)[idx];
    } else if (node->is_object() || node->is_null()) {
      node = &(*node)[key];
    } else {
      detail::fail("override '", path, "': cannot descend into a scalar at '", key, "'");
    }
    if (last) break;
    start = dot + 1;
  }
  *node = value;
}

/// Parse, apply overrides, then validate cross-field rules.
inline ScenarioConfig load_scenario(Json j, const std::vector<std::string>& overrides = {}) {
  for (const auto& o : overrides) apply_override(j, o);
  ScenarioConfig c = parse_scenario(j);
  const auto errs = validation_errors(c);
  if (!errs.empty()) throw ConfigErrors(errs);
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail("cannot read config file '", path, "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) detail::fail("config file '", path, "' is not valid JSON");
  return j;
}

}  // namespace artde
