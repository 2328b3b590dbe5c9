#pragma once

// Scenario configuration files (JSON). Every object is read through a Node
// that records which keys were consumed; anything left over is an error
// naming the full key path. Environment variables QUADLOCO_A__B=value set
// key a.b before validation (value parsed as JSON, else taken as a string).

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "quadloco/jump_sim.hpp"
#include "quadloco/scenarios.hpp"
#include "quadloco/trajopt.hpp"

namespace quadloco::config {

using Json = nlohmann::json;

inline constexpr const char* kEnvPrefix = "QUADLOCO_";

class Node {
 public:
  Node(const Json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw Error(ErrorCode::Config, "'" + where() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  Node child(const std::string& key) {
    used_.insert(key);
    return Node(has(key) ? &j_->at(key) : nullptr, join(key));
  }

  // Marks a key as handled by the caller.
  void consume(const std::string& key) { used_.insert(key); }

  template <class T>
  void opt(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    read(j_->at(key), join(key), out);
  }

  // Rejects keys that no opt/child call asked for.
  void done() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) throw Error(ErrorCode::Config, "unknown config key '" + join(it.key()) + "'");
    }
  }

  const Json* json() const { return j_; }
  const std::string& path() const { return path_; }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static Error type_error(const std::string& path, const char* want) {
    return Error(ErrorCode::Config, "config key '" + path + "' must be " + want);
  }
  static void read(const Json& v, const std::string& p, double& out) {
    if (!v.is_number()) throw type_error(p, "a number");
    out = v.get<double>();
  }
  static void read(const Json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) throw type_error(p, "an integer");
    out = v.get<int>();
  }
  static void read(const Json& v, const std::string& p, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw type_error(p, "a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  static void read(const Json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) throw type_error(p, "true or false");
    out = v.get<bool>();
  }
  static void read(const Json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) throw type_error(p, "a string");
    out = v.get<std::string>();
  }
  template <int N>
  static void read(const Json& v, const std::string& p, Eigen::Matrix<double, N, 1>& out) {
    const int n = N == Eigen::Dynamic ? static_cast<int>(v.size()) : N;
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
      throw type_error(p, ("an array of " + std::to_string(n) + " numbers").c_str());
    }
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_number()) throw type_error(p, "an array of numbers");
      out(i) = v[i].get<double>();
    }
  }
  static void read(const Json& v, const std::string& p, PerLeg<bool>& out) {
    if (!v.is_array() || v.size() != kNumLegs) throw type_error(p, "an array of 4 booleans (FR, FL, BR, BL)");
    for (int i = 0; i < kNumLegs; ++i) {
      if (!v[i].is_boolean()) throw type_error(p, "an array of 4 booleans (FR, FL, BR, BL)");
      out[i] = v[i].get<bool>();
    }
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot read config file '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Applies QUADLOCO_* variables from `env` (NAME=value strings).
inline void apply_env_overrides(Json& doc, const std::vector<std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const std::string& kv : env) {
    if (kv.rfind(prefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string name = kv.substr(prefix.size(), eq - prefix.size());
    const std::string value = kv.substr(eq + 1);
    for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto sep = name.find("__", start);
      const std::string key = name.substr(start, sep == std::string::npos ? std::string::npos : sep - start);
      if (key.empty()) throw Error(ErrorCode::Config, "malformed override variable '" + kv.substr(0, eq) + "'");
      if (!node->is_object()) *node = Json::object();
      node = &(*node)[key];
      if (sep == std::string::npos) break;
      start = sep + 2;
    }
    Json parsed = Json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? Json(value) : parsed;
  }
}

inline std::vector<std::string> process_environment() {
  std::vector<std::string> out;
  for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
  return out;
}

// ---------------------------------------------------------------------------
// Shared sections

inline void read_model(Node n, BodyModel& m, LegModel* legs = nullptr) {
  n.opt("mass", m.mass);
  Vec3 inertia = m.inertia.diagonal();
  n.opt("inertia", inertia);
  m.inertia = inertia.asDiagonal();
  if (legs) {
    double length = 2.0 * legs->hips[FR].x(), width = -2.0 * legs->hips[FR].y();
    double leg_mass = legs->m1 + legs->m2;
    n.opt("body_length", length);
    n.opt("body_width", width);
    n.opt("l1", legs->l1);
    n.opt("l2", legs->l2);
    n.opt("leg_mass", leg_mass);
    legs->hips = default_hip_offsets(length, width);
    legs->m1 = legs->m2 = 0.5 * leg_mass;
  }
  n.done();
  if (!(m.mass > 0.0) || (m.inertia.diagonal().array() <= 0.0).any()) {
    throw Error(ErrorCode::Config, "'" + n.join("mass") + "' and inertia must be positive");
  }
}

inline void read_friction(Node n, FrictionSpec& f) {
  n.opt("mu", f.mu);
  n.opt("f_min", f.f_min);
  n.opt("f_max", f.f_max);
  n.done();
  if (!(f.mu > 0.0) || !(f.f_min >= 0.0) || !(f.f_max > f.f_min)) {
    throw Error(ErrorCode::Config, "'" + n.join("mu") + "', f_min and f_max are inconsistent");
  }
}

inline Mat3 diag3(const Vec3& v) { return v.asDiagonal(); }

inline void read_gains(Node n, BalanceGains& g) {
  Vec3 kp_p = g.K_pp.diagonal(), kd_p = g.K_dp.diagonal(), kp_w = g.K_pw.diagonal(), kd_w = g.K_dw.diagonal();
  n.opt("kp_p", kp_p);
  n.opt("kd_p", kd_p);
  n.opt("kp_w", kp_w);
  n.opt("kd_w", kd_w);
  n.opt("s", g.S);
  n.opt("alpha", g.alpha);
  n.opt("beta", g.beta);
  n.done();
  g.K_pp = diag3(kp_p);
  g.K_dp = diag3(kd_p);
  g.K_pw = diag3(kp_w);
  g.K_dw = diag3(kd_w);
}

inline void read_noise(Node n, SensorNoise& s) {
  n.opt("gyro", s.gyro);
  n.opt("accel", s.accel);
  n.opt("gyro_bias", s.gyro_bias);
  n.opt("accel_bias", s.accel_bias);
  n.opt("encoder", s.encoder);
  n.opt("foot_slip", s.foot_slip);
  n.done();
}

struct OutputConfig {
  std::string dir = "out";
  std::string prefix;  // file name prefix; empty means the subcommand name
};

inline void read_output(Node n, OutputConfig& o) {
  n.opt("dir", o.dir);
  n.opt("prefix", o.prefix);
  n.done();
}

// ---------------------------------------------------------------------------
// Locomotion scenarios (stand, trot, slope, mpc-trot, estimate)

struct LocomotionConfig {
  LocomotionOptions options;
  OutputConfig output;
};

inline LocomotionOptions locomotion_preset(const std::string& command) {
  if (command == "stand") return stand_defaults();
  if (command == "trot") return trot_defaults(ControllerKind::Balance);
  if (command == "mpc-trot") return trot_defaults(ControllerKind::Mpc);
  if (command == "slope") return slope_defaults();
  if (command == "estimate") return stand_defaults();
  throw Error(ErrorCode::Config, "no locomotion preset for '" + command + "'");
}

/// Parses a locomotion config over the preset for `command`.
inline LocomotionConfig parse_locomotion(const Json& doc, const std::string& command) {
  LocomotionConfig c;
  c.options = locomotion_preset(command);
  LocomotionOptions& o = c.options;
  Node root(&doc, "");
  root.opt("seed", o.seed);
  root.opt("duration", o.duration);
  root.opt("dt", o.dt);
  root.opt("z0", o.z0);
  root.opt("initial_offset", o.initial_offset);
  {
    Node n = root.child("gait");
    n.opt("preset", o.gait);
    n.opt("period", o.gait_period);
    n.opt("swing_apex", o.swing_apex);
    n.done();
  }
  {
    Node n = root.child("command");
    n.opt("velocity", o.v_cmd);
    n.opt("yaw_rate", o.yaw_rate);
    n.opt("ramp_time", o.ramp_time);
    n.done();
  }
  {
    Node n = root.child("controller");
    std::string kind = o.controller == ControllerKind::Mpc ? "mpc" : "balance";
    n.opt("kind", kind);
    if (kind == "balance") {
      o.controller = ControllerKind::Balance;
    } else if (kind == "mpc") {
      o.controller = ControllerKind::Mpc;
    } else {
      throw Error(ErrorCode::Config, "config key '" + n.join("kind") + "' must be \"balance\" or \"mpc\"");
    }
    read_gains(n.child("gains"), o.gains);
    Node m = n.child("mpc");
    m.opt("horizon", o.mpc_horizon);
    m.opt("dt", o.mpc_dt);
    m.opt("replan_every", o.mpc_replan_every);
    m.opt("q", o.mpc_weights.Q);
    m.opt("r", o.mpc_weights.R);
    m.done();
    n.done();
  }
  read_friction(root.child("friction"), o.friction);
  read_model(root.child("robot"), o.model, &o.legs);
  {
    Node n = root.child("estimator");
    n.opt("enabled", o.use_estimator);
    n.opt("kinematics", o.estimator_kinematics);
    n.opt("feedback", o.estimator_feedback);
    n.opt("kappa_ref", o.kappa_ref);
    n.opt("q_v", o.kf_noise.q_v);
    n.opt("q_p_stance", o.kf_noise.q_p_stance);
    n.opt("swing_inflation", o.kf_noise.swing_inflation);
    n.opt("r_p", o.kf_noise.r_p);
    n.opt("r_v", o.kf_noise.r_v);
    n.opt("r_h", o.kf_noise.r_h);
    n.done();
  }
  read_noise(root.child("noise"), o.noise);
  {
    Node n = root.child("terrain");
    n.opt("a0", o.ground.a0);
    n.opt("a1", o.ground.a1);
    n.opt("a2", o.ground.a2);
    n.opt("adjust_posture", o.adjust_posture);
    n.done();
  }
  read_output(root.child("output"), c.output);
  root.done();

  if (!(o.dt > 0.0) || !(o.duration > 0.0)) throw Error(ErrorCode::Config, "'dt' and 'duration' must be positive");
  if (o.mpc_horizon < 1 || !(o.mpc_dt > 0.0) || o.mpc_replan_every < 1) {
    throw Error(ErrorCode::Config, "'controller.mpc' horizon, dt and replan_every must be positive");
  }
  validate(gait_preset(o.gait, o.gait_period));
  return c;
}

// ---------------------------------------------------------------------------
// Jumps (jump-opt, jump-sim)

struct JumpConfig {
  JumpSimOptions sim;  // sim.spec and sim.solve hold the optimizer inputs
  OutputConfig output;
  double export_dt = 0.01;  // s, reference CSV sampling
};

inline trajopt::JumpSpec jump_preset(const std::string& name, double apex, int knots) {
  if (name == "vertical_hop") return trajopt::vertical_hop_spec(apex, knots);
  if (name == "spin_90") return trajopt::spin_jump_spec(knots);
  throw Error(ErrorCode::Config, "unknown jump preset '" + name + "' (vertical_hop, spin_90)");
}

inline void read_jump_spec(Node n, trajopt::JumpSpec& s) {
  std::string preset = "vertical_hop";
  double apex = 0.1;
  int knots = 30;
  n.opt("preset", preset);
  n.opt("apex_height", apex);
  n.opt("knots", knots);
  s = jump_preset(preset, apex, knots);
  n.opt("name", s.name);
  if (n.has("phases")) {
    const Json& arr = n.json()->at("phases");
    if (!arr.is_array()) throw Error(ErrorCode::Config, "config key '" + n.join("phases") + "' must be an array");
    n.consume("phases");
    s.phases.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Node p(&arr[i], n.join("phases") + "[" + std::to_string(i) + "]");
      trajopt::PhaseSpec ph;
      ph.knots = knots;
      p.opt("stance", ph.stance);
      p.opt("knots", ph.knots);
      p.opt("t_min", ph.t_min);
      p.opt("t_max", ph.t_max);
      p.done();
      s.phases.push_back(ph);
    }
  }
  Vec3 rpy0 = so3::to_rpy(s.R0), rpyg = so3::to_rpy(s.Rg);
  double stance_height = s.p0.z() - s.feet0[FR].z();
  n.opt("p0", s.p0);
  n.opt("rpy0", rpy0);
  n.opt("pg", s.pg);
  n.opt("rpyg", rpyg);
  n.opt("stance_height", stance_height);
  n.opt("t_min", s.T_min);
  n.opt("t_max", s.T_max);
  n.opt("sphere_radius", s.sphere_radius);
  n.opt("box_min", s.box_min);
  n.opt("box_max", s.box_max);
  read_friction(n.child("friction"), s.friction);
  {
    Node w = n.child("weights");
    w.opt("eps_omega", s.weights.eps_omega);
    w.opt("eps_f", s.weights.eps_f);
    w.opt("eps_r", s.weights.eps_R);
    w.done();
  }
  read_model(n.child("robot"), s.model);
  n.done();
  s.R0 = so3::from_rpy(rpy0);
  s.Rg = so3::from_rpy(rpyg);
  trajopt::set_nominal_stance(s, stance_height);
  try {
    trajopt::validate(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("'") + n.path() + "': " + e.what());
  }
}

inline JumpConfig parse_jump(const Json& doc) {
  JumpConfig c;
  Node root(&doc, "");
  root.opt("seed", c.sim.seed);
  read_jump_spec(root.child("jump"), c.sim.spec);
  {
    Node n = root.child("solver");
    n.opt("tol", c.sim.solve.tol);
    n.opt("max_outer", c.sim.solve.max_outer);
    n.opt("max_inner", c.sim.solve.max_inner);
    n.opt("rho0", c.sim.solve.rho0);
    n.opt("rho_max", c.sim.solve.rho_max);
    n.opt("verbose", c.sim.solve.verbose);
    n.done();
  }
  {
    Node n = root.child("sim");
    n.opt("dt", c.sim.dt);
    n.opt("settle_time", c.sim.settle_time);
    n.opt("posing_lead", c.sim.posing_lead);
    n.opt("contact_threshold", c.sim.contact_threshold);
    n.opt("export_dt", c.export_dt);
    read_gains(n.child("landing_gains"), c.sim.landing_gains);
    read_noise(n.child("noise"), c.sim.noise);
    Node t = n.child("track");
    Vec3 kpc = c.sim.track.kp_cart.diagonal(), kdc = c.sim.track.kd_cart.diagonal();
    Vec3 kpj = c.sim.track.kp_joint.diagonal(), kdj = c.sim.track.kd_joint.diagonal();
    t.opt("kp_cart", kpc);
    t.opt("kd_cart", kdc);
    t.opt("kp_joint", kpj);
    t.opt("kd_joint", kdj);
    t.done();
    c.sim.track.kp_cart = diag3(kpc);
    c.sim.track.kd_cart = diag3(kdc);
    c.sim.track.kp_joint = diag3(kpj);
    c.sim.track.kd_joint = diag3(kdj);
    n.done();
  }
  read_output(root.child("output"), c.output);
  root.done();
  if (!(c.sim.dt > 0.0) || !(c.export_dt > 0.0)) throw Error(ErrorCode::Config, "'sim.dt' and 'sim.export_dt' must be positive");
  return c;
}

}  // namespace quadloco::config
