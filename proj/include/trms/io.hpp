#pragma once

// JSON plumbing: scenario configs, parameter overrides, model banks and
// gain documents. Matrices are nested arrays, row-major.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "trms/errors.hpp"
#include "trms/harness.hpp"
#include "trms/multimodel.hpp"
#include "trms/plant.hpp"
#include "trms/synthesis.hpp"

namespace trms::io {

using nlohmann::json;

inline constexpr const char* kBankKind = "trms.model_bank";
inline constexpr const char* kGainsKind = "trms.gains";

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e, where));
  return out;
}

inline std::vector<int> indices(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(where + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace detail

inline json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// `cols` disambiguates empty matrices, which carry no column count in JSON.
inline MatrixXd matrix_from_json(const json& j, const std::string& where, Eigen::Index cols = -1) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
  if (j.empty()) return MatrixXd(0, cols < 0 ? 0 : cols);
  const auto ncols = static_cast<Eigen::Index>(j.front().is_array() ? j.front().size() : 0);
  MatrixXd m(static_cast<Eigen::Index>(j.size()), ncols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != ncols) {
      throw ConfigError(where + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < ncols; ++c) {
      m(static_cast<Eigen::Index>(r), c) = detail::number(j[r][static_cast<std::size_t>(c)], where);
    }
  }
  return m;
}

inline VectorXd vector_from_json(const json& j, const std::string& where) {
  const auto v = detail::numbers(j, where);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

namespace detail {
template <typename Fn>
void for_each_param(TrmsParams& p, Fn&& fn) {
  fn("a_const", p.a_const);
  fn("b_const", p.b_const);
  fn("c_const", p.c_const);
  fn("d_const", p.d_const);
  fn("e_const", p.e_const);
  fn("f_const", p.f_const);
  fn("h_const", p.h_const);
  fn("s_f", p.s_f);
  fn("j_v", p.j_v);
  fn("j_mr", p.j_mr);
  fn("j_tr", p.j_tr);
  fn("l_m", p.l_m);
  fn("l_t", p.l_t);
  fn("t_mr", p.t_mr);
  fn("t_tr", p.t_tr);
  fn("k_mr", p.k_mr);
  fn("k_tr", p.k_tr);
  fn("k_v", p.k_v);
  fn("k_h", p.k_h);
  fn("g", p.g);
}

template <typename Fn>
void for_each_poly(TrmsParams& p, Fn&& fn) {
  fn("speed_main", p.speed_main);
  fn("speed_tail", p.speed_tail);
  fn("thrust_main", p.thrust_main);
  fn("thrust_tail", p.thrust_tail);
}
}  // namespace detail

// Flat override document; absent keys keep the defaults.
inline TrmsParams params_from_json(const json& j, TrmsParams base = {}) {
  if (!j.is_object()) throw ConfigError("params: expected an object");
  std::set<std::string> seen;
  detail::for_each_param(base, [&](const char* key, double& field) {
    seen.insert(key);
    if (j.contains(key)) field = detail::number(j[key], std::string("params.") + key);
  });
  detail::for_each_poly(base, [&](const char* key, OriginPolynomial& poly) {
    seen.insert(key);
    if (j.contains(key)) poly.coeffs = detail::numbers(j[key], std::string("params.") + key);
  });
  detail::reject_unknown(j, seen, "params");
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

inline json params_to_json(TrmsParams p) {
  json j = json::object();
  detail::for_each_param(p, [&](const char* key, double& field) { j[key] = field; });
  detail::for_each_poly(p, [&](const char* key, OriginPolynomial& poly) { j[key] = poly.coeffs; });
  return j;
}

// ---------------------------------------------------------------------------
// Model banks and gains
// ---------------------------------------------------------------------------

inline json bank_to_json(const ModelBank& bank) {
  json models = json::array();
  for (const LocalModel& m : bank.models) {
    models.push_back({{"A", to_json(m.a)},
                      {"B", to_json(m.b)},
                      {"C", to_json(m.c)},
                      {"L", to_json(m.l)},
                      {"delta_x", to_json(VectorXd(m.delta_x))},
                      {"op_state", to_json(VectorXd(m.op_state))},
                      {"op_input", to_json(VectorXd(m.op_input))}});
  }
  return {{"kind", kBankKind},
          {"nodes", bank.nodes},
          {"sigma", bank.sigma},
          {"actuator_faults", bank.actuator_faults},
          {"models", std::move(models)}};
}

inline ModelBank bank_from_json(const json& j) {
  detail::reject_unknown(j, {"kind", "nodes", "sigma", "actuator_faults", "models"}, "bank document");
  if (j.value("kind", std::string()) != kBankKind) throw ConfigError("bank document: kind must be " + std::string(kBankKind));
  ModelBank bank;
  bank.nodes = detail::numbers(j.at("nodes"), "bank.nodes");
  bank.sigma = detail::number(j.at("sigma"), "bank.sigma");
  bank.actuator_faults = j.value("actuator_faults", true);
  if (!j.at("models").is_array()) throw ConfigError("bank.models: expected an array");
  for (std::size_t i = 0; i < j["models"].size(); ++i) {
    const json& m = j["models"][i];
    const std::string where = "bank.models[" + std::to_string(i) + "]";
    detail::reject_unknown(m, {"A", "B", "C", "L", "delta_x", "op_state", "op_input"}, where);
    MatrixXd a = matrix_from_json(m.at("A"), where + ".A");
    MatrixXd l = matrix_from_json(m.at("L"), where + ".L", 0);
    if (l.rows() == 0) l.resize(a.rows(), 0);
    PlantState op_state = PlantState::Zero();
    ControlInput op_input = ControlInput::Zero();
    if (m.contains("op_state")) {
      const VectorXd v = vector_from_json(m["op_state"], where + ".op_state");
      if (v.size() == kStateDim) op_state = v;
    }
    if (m.contains("op_input")) {
      const VectorXd v = vector_from_json(m["op_input"], where + ".op_input");
      if (v.size() == kInputDim) op_input = v;
    }
    try {
      bank.models.push_back(make_local_model(std::move(a), matrix_from_json(m.at("B"), where + ".B"),
                                             matrix_from_json(m.at("C"), where + ".C"), std::move(l),
                                             vector_from_json(m.at("delta_x"), where + ".delta_x"), op_state,
                                             op_input));
    } catch (const ModelError& e) {
      throw ModelError(where + ": " + e.what());
    }
  }
  bank.validate();
  return bank;
}

inline json design_to_json(const Design& d) {
  json models = json::array();
  for (std::size_t i = 0; i < d.ftc.k1.size(); ++i) {
    models.push_back({{"K1", to_json(d.ftc.k1[i])},
                      {"S", to_json(d.ftc.s_comp[i])},
                      {"S_residual", d.ftc.comp_residual[i]},
                      {"H", to_json(d.uio.h_proj[i])},
                      {"A_bar", to_json(d.uio.a_bar[i])},
                      {"K2", to_json(d.uio.k2[i])},
                      {"K_nominal", to_json(d.k_nominal[i])}});
  }
  return {{"kind", kGainsKind}, {"zeta", d.ftc.zeta}, {"rho", d.ftc.rho}, {"models", std::move(models)}};
}

// `p` is the output count, needed to shape an empty projector (s = 0).
inline Design design_from_json(const json& j, Eigen::Index p) {
  detail::reject_unknown(j, {"kind", "zeta", "rho", "models", "bank"}, "gains document");
  if (j.value("kind", std::string()) != kGainsKind) throw ConfigError("gains document: kind must be " + std::string(kGainsKind));
  Design d;
  d.ftc.zeta = detail::number(j.at("zeta"), "gains.zeta");
  d.ftc.rho = detail::number(j.at("rho"), "gains.rho");
  for (std::size_t i = 0; i < j.at("models").size(); ++i) {
    const json& m = j["models"][i];
    const std::string where = "gains.models[" + std::to_string(i) + "]";
    detail::reject_unknown(m, {"K1", "S", "S_residual", "H", "A_bar", "K2", "K_nominal"}, where);
    d.ftc.k1.push_back(matrix_from_json(m.at("K1"), where + ".K1"));
    d.ftc.s_comp.push_back(matrix_from_json(m.at("S"), where + ".S", 0));
    d.ftc.comp_residual.push_back(detail::number(m.at("S_residual"), where + ".S_residual"));
    d.uio.h_proj.push_back(matrix_from_json(m.at("H"), where + ".H", p));
    d.uio.a_bar.push_back(matrix_from_json(m.at("A_bar"), where + ".A_bar"));
    d.uio.k2.push_back(matrix_from_json(m.at("K2"), where + ".K2"));
    d.k_nominal.push_back(matrix_from_json(m.at("K_nominal"), where + ".K_nominal"));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Scenario config
// ---------------------------------------------------------------------------

namespace detail {

inline Breakpoints breakpoints_from_json(const json& j, const std::string& where) {
  Breakpoints b;
  if (j.is_number()) {
    b.points.emplace_back(0.0, j.get<double>());
    return b;
  }
  if (!j.is_array()) throw ConfigError(where + ": expected [[t, value], ...] or a number");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw ConfigError(where + ": each breakpoint is [t, value]");
    b.points.emplace_back(number(e[0], where), number(e[1], where));
  }
  try {
    b.validate(where.c_str());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return b;
}

inline PlantState state_from_json(const json& j, const std::string& where) {
  const VectorXd v = vector_from_json(j, where);
  if (v.size() != kStateDim) throw ConfigError(where + ": expected " + std::to_string(kStateDim) + " entries");
  return v;
}

}  // namespace detail

namespace detail {

inline ScenarioConfig parse_scenario(const json& j, const std::string& base_dir) {
  detail::reject_unknown(j, {"params", "bank", "controller", "fault", "sim"}, "config");
  auto resolve = [&](const std::string& path) {
    return (!path.empty() && path.front() == '/') || base_dir.empty() ? path : base_dir + "/" + path;
  };
  ScenarioConfig cfg;

  if (j.contains("params")) {
    const json& p = j["params"];
    cfg.params = params_from_json(p.is_string() ? load_json_file(resolve(p.get<std::string>())) : p);
  }

  if (j.contains("bank")) {
    const json& b = j["bank"];
    detail::reject_unknown(b, {"nodes", "sigma", "outputs", "fault_matrix", "fd_rel_step", "file"}, "bank");
    if (b.contains("nodes")) cfg.bank.nodes = detail::numbers(b["nodes"], "bank.nodes");
    if (b.contains("sigma")) cfg.bank.sigma = detail::number(b["sigma"], "bank.sigma");
    if (b.contains("outputs")) cfg.bank.spec.measured = detail::indices(b["outputs"], "bank.outputs");
    if (b.contains("fd_rel_step")) cfg.bank.spec.fd_rel_step = detail::number(b["fd_rel_step"], "bank.fd_rel_step");
    if (b.contains("fault_matrix")) {
      const json& l = b["fault_matrix"];
      if (l.is_string()) {
        if (l.get<std::string>() != "actuator") throw ConfigError("bank.fault_matrix: use \"actuator\" or a matrix");
      } else {
        cfg.bank.spec.fault_matrix = matrix_from_json(l, "bank.fault_matrix", 0);
        if (cfg.bank.spec.fault_matrix->rows() == 0) cfg.bank.spec.fault_matrix->resize(kStateDim, 0);
      }
    }
    if (b.contains("file")) cfg.bank.preloaded = bank_from_json(load_json_file(resolve(b["file"].get<std::string>())));
  }

  if (j.contains("controller")) {
    const json& c = j["controller"];
    detail::reject_unknown(c, {"type", "zeta", "rho", "ftc", "compensation", "u_limit"}, "controller");
    if (c.contains("type")) {
      try {
        cfg.controller.type = parse_controller_type(c["type"].get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("controller.type: ") + e.what());
      }
    }
    if (c.contains("zeta")) cfg.controller.zeta = detail::number(c["zeta"], "controller.zeta");
    if (c.contains("rho")) cfg.controller.rho = detail::number(c["rho"], "controller.rho");
    if (c.contains("ftc")) cfg.controller.ftc = c["ftc"].get<bool>();
    if (c.contains("compensation")) cfg.controller.compensation = detail::number(c["compensation"], "controller.compensation");
    if (c.contains("u_limit")) cfg.controller.u_limit = detail::number(c["u_limit"], "controller.u_limit");
    if (!(cfg.controller.u_limit > 0.0)) throw ConfigError("controller.u_limit must be positive");
  }

  if (j.contains("fault")) {
    const json& f = j["fault"];
    detail::reject_unknown(f, {"kind", "channels", "amplitude", "t_start", "t_stop", "period", "duty"}, "fault");
    if (f.contains("kind")) cfg.fault.kind = parse_fault_kind(f["kind"].get<std::string>());
    if (f.contains("channels")) cfg.fault.channels = detail::indices(f["channels"], "fault.channels");
    if (f.contains("amplitude")) cfg.fault.amplitude = detail::number(f["amplitude"], "fault.amplitude");
    if (f.contains("t_start")) cfg.fault.t_start = detail::number(f["t_start"], "fault.t_start");
    if (f.contains("t_stop")) cfg.fault.t_stop = detail::number(f["t_stop"], "fault.t_stop");
    if (f.contains("period")) cfg.fault.period = detail::number(f["period"], "fault.period");
    if (f.contains("duty")) cfg.fault.duty = detail::number(f["duty"], "fault.duty");
  }

  if (j.contains("sim")) {
    const json& s = j["sim"];
    detail::reject_unknown(s, {"dt", "t_end", "initial_state", "initial_estimate", "ref_alpha_v", "ref_alpha_h",
                               "frozen_model", "noise_sigma", "seed", "tau_f"},
                           "sim");
    if (s.contains("dt")) cfg.sim.dt = detail::number(s["dt"], "sim.dt");
    if (s.contains("t_end")) cfg.sim.t_end = detail::number(s["t_end"], "sim.t_end");
    if (s.contains("initial_state")) cfg.sim.initial_state = detail::state_from_json(s["initial_state"], "sim.initial_state");
    if (s.contains("initial_estimate")) {
      cfg.sim.initial_estimate = detail::state_from_json(s["initial_estimate"], "sim.initial_estimate");
    }
    if (s.contains("ref_alpha_v")) cfg.sim.reference.alpha_v = detail::breakpoints_from_json(s["ref_alpha_v"], "sim.ref_alpha_v");
    if (s.contains("ref_alpha_h")) cfg.sim.reference.alpha_h = detail::breakpoints_from_json(s["ref_alpha_h"], "sim.ref_alpha_h");
    if (s.contains("frozen_model") && !s["frozen_model"].is_null()) {
      if (!s["frozen_model"].is_number_integer()) throw ConfigError("sim.frozen_model: expected an integer");
      cfg.sim.frozen_model = s["frozen_model"].get<int>();
    }
    if (s.contains("noise_sigma")) cfg.sim.noise_sigma = detail::number(s["noise_sigma"], "sim.noise_sigma");
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) throw ConfigError("sim.seed: expected a non-negative integer");
      cfg.sim.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("tau_f")) cfg.sim.tau_f = detail::number(s["tau_f"], "sim.tau_f");
    if (!(cfg.sim.dt > 0.0)) throw ConfigError("sim.dt must be positive");
    if (!(cfg.sim.t_end >= 0.0)) throw ConfigError("sim.t_end must be non-negative");
    if (!(cfg.sim.tau_f > 0.0)) throw ConfigError("sim.tau_f must be positive");
    if (!(cfg.sim.noise_sigma >= 0.0)) throw ConfigError("sim.noise_sigma must be non-negative");
  }
  return cfg;
}

}  // namespace detail

// Relative file references resolve against `base_dir`. Type mismatches
// surface as ConfigError like every other config problem.
inline ScenarioConfig scenario_from_json(const json& j, const std::string& base_dir = ".") {
  try {
    return detail::parse_scenario(j, base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : path.substr(0, slash);
  try {
    return scenario_from_json(load_json_file(path), dir);
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace trms::io
