#pragma once

// Scenario definition and orchestration.
//
// A scenario is the unit of reproducibility: it pins the topology, the device
// at each generation node, per-device parameters, limiter configuration,
// events, and solver settings. Scenarios load from JSON (schema_version 1),
// serialize back losslessly, and carry a preset catalog covering the standard
// case studies on the 9-bus system. Identical scenarios produce bit-identical
// traces.

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics.hpp"
#include "reduced.hpp"
#include "system.hpp"

namespace lowinertia {

inline constexpr int scenario_schema_version = 1;

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[nodiscard]] inline bool try_parse_kind(const std::string& s, DeviceKind& out) {
  if (s == "sm") out = DeviceKind::sm;
  else if (s == "droop") out = DeviceKind::droop;
  else if (s == "vsm") out = DeviceKind::vsm;
  else if (s == "matching") out = DeviceKind::matching;
  else if (s == "dvoc") out = DeviceKind::dvoc;
  else return false;
  return true;
}

// Limiters are configured per scenario and applied to every converter; the
// three toggles correspond to the dc source saturation, the ac current-space
// limiter, and the power set-point limiter.
struct LimiterToggles {
  bool dc_saturation = true;
  bool ac_limiter = false;
  bool setpoint_limiter = false;
};

struct ScenarioEvent {
  enum class Type { load_step, trip, setpoint };
  Type type = Type::load_step;
  double time = 0.0;
  std::string bus;      // load_step target
  double delta_p = 0.0; // load_step size, pu at nominal voltage
  int node = 1;         // trip / setpoint target (generation node, 1-based)
  double p_star = 0.0;  // setpoint value, pu
};

struct Scenario {
  std::string name = "custom";
  double p_l = 2.0;                  // total constant-impedance base load, pu
  std::vector<DeviceSpec> devices;   // one per generation node, index = node-1
  LimiterToggles limits;
  double tau_g = 5.0;                // governor turbine time constant, s
  std::vector<ScenarioEvent> events;
  SolverConfig solver{5e-5, 16.0, 100};
  std::vector<std::string> outputs;  // trace channels to export; empty = all

  // Semantic validation; reports every violation, not just the first.
  void validate() const {
    std::vector<std::string> errors;
    if (!(p_l > 0.0)) errors.push_back("topology.p_l: must be positive");
    if (!(tau_g > 0.0)) errors.push_back("tau_g: must be positive");
    if (devices.size() != 3) {
      errors.push_back("devices: expected one device per generation node (3), got " +
                       std::to_string(devices.size()));
    } else {
      for (int i = 0; i < 3; ++i)
        if (devices[i].kind == DeviceKind::none)
          errors.push_back("devices: no device kind given at node " + std::to_string(i + 1));
    }
    try {
      solver.validate();
    } catch (const std::invalid_argument& e) {
      errors.push_back(std::string("solver: ") + e.what());
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& ev = events[i];
      const std::string ctx = "events[" + std::to_string(i) + "]";
      if (!(ev.time >= 0.0) || ev.time >= solver.t_end)
        errors.push_back(ctx + ": time " + std::to_string(ev.time) +
                         " outside the horizon [0, " + std::to_string(solver.t_end) + ")");
      if (ev.type == ScenarioEvent::Type::load_step) {
        bool known = false;
        for (int b = 1; b <= 9 && !known; ++b) known = ev.bus == ("bus" + std::to_string(b));
        if (!known) errors.push_back(ctx + ": unknown bus '" + ev.bus + "'");
      } else {
        if (ev.node < 1 || ev.node > 3)
          errors.push_back(ctx + ": node " + std::to_string(ev.node) + " out of range 1..3");
      }
    }
    if (!errors.empty()) {
      std::string msg = "invalid scenario";
      for (const auto& e : errors) msg += "\n  - " + e;
      throw ScenarioError(msg);
    }
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Field tables keep reading and writing symmetric.

namespace detail {

template <class T>
struct NumField {
  const char* key;
  double T::*member;
};
template <class T>
struct BoolField {
  const char* key;
  bool T::*member;
};

template <class T>
[[nodiscard]] const std::vector<NumField<T>>& num_fields();
template <class T>
[[nodiscard]] const std::vector<BoolField<T>>& bool_fields();

template <>
[[nodiscard]] inline const std::vector<NumField<MachineParams>>& num_fields() {
  static const std::vector<NumField<MachineParams>> f = {
      {"r_s", &MachineParams::r_s},           {"l_s", &MachineParams::l_s},
      {"l_md", &MachineParams::l_md},         {"l_mq", &MachineParams::l_mq},
      {"r_fd", &MachineParams::r_fd},         {"l_fd", &MachineParams::l_fd},
      {"r_1d", &MachineParams::r_1d},         {"l_1d", &MachineParams::l_1d},
      {"r_1q", &MachineParams::r_1q},         {"l_1q", &MachineParams::l_1q},
      {"r_2q", &MachineParams::r_2q},         {"l_2q", &MachineParams::l_2q},
      {"h", &MachineParams::h},               {"d_f", &MachineParams::d_f},
      {"d_p", &MachineParams::d_p},           {"tau_g", &MachineParams::tau_g},
      {"k_a", &MachineParams::k_a},           {"tau_r", &MachineParams::tau_r},
      {"e_fd_max", &MachineParams::e_fd_max}, {"k_pss", &MachineParams::k_pss},
      {"t_w", &MachineParams::t_w},           {"t_lead", &MachineParams::t_lead},
      {"t_lag", &MachineParams::t_lag},       {"v_pss_max", &MachineParams::v_pss_max},
  };
  return f;
}
template <>
[[nodiscard]] inline const std::vector<BoolField<MachineParams>>& bool_fields() {
  static const std::vector<BoolField<MachineParams>> f = {
      {"dampers_enabled", &MachineParams::dampers_enabled},
      {"exciter_enabled", &MachineParams::exciter_enabled},
      {"pss_enabled", &MachineParams::pss_enabled},
  };
  return f;
}

template <>
[[nodiscard]] inline const std::vector<NumField<ConverterParams>>& num_fields() {
  static const std::vector<NumField<ConverterParams>> f = {
      {"c_dc", &ConverterParams::c_dc},         {"g_dc", &ConverterParams::g_dc},
      {"tau_dc", &ConverterParams::tau_dc},     {"i_dc_max", &ConverterParams::i_dc_max},
      {"v_dc_star", &ConverterParams::v_dc_star}, {"r_f", &ConverterParams::r_f},
      {"l_f", &ConverterParams::l_f},           {"c_f", &ConverterParams::c_f},
      {"k_sw", &ConverterParams::k_sw},
  };
  return f;
}
template <>
[[nodiscard]] inline const std::vector<BoolField<ConverterParams>>& bool_fields() {
  // dc_saturation is driven by the scenario's limiter toggles, not per device
  static const std::vector<BoolField<ConverterParams>> f = {};
  return f;
}

template <>
[[nodiscard]] inline const std::vector<NumField<ControlGains>>& num_fields() {
  static const std::vector<NumField<ControlGains>> f = {
      {"k_vp", &ControlGains::k_vp},       {"k_vi", &ControlGains::k_vi},
      {"k_ip", &ControlGains::k_ip},       {"k_ii", &ControlGains::k_ii},
      {"k_dc", &ControlGains::k_dc},       {"k_mag_p", &ControlGains::k_mag_p},
      {"k_mag_i", &ControlGains::k_mag_i}, {"v_star", &ControlGains::v_star},
      {"i_ac_max", &ControlGains::i_ac_max}, {"i_ac_th", &ControlGains::i_ac_th},
      {"gamma_p", &ControlGains::gamma_p}, {"tau_p_meas", &ControlGains::tau_p_meas},
  };
  return f;
}
template <>
[[nodiscard]] inline const std::vector<BoolField<ControlGains>>& bool_fields() {
  // ac_limiter / setpoint_limiter are driven by the scenario's limiter toggles
  static const std::vector<BoolField<ControlGains>> f = {
      {"strict_printed_p_term", &ControlGains::strict_printed_p_term},
      {"anti_windup", &ControlGains::anti_windup},
  };
  return f;
}

template <>
[[nodiscard]] inline const std::vector<NumField<ReferenceGains>>& num_fields() {
  static const std::vector<NumField<ReferenceGains>> f = {
      {"d_omega", &ReferenceGains::d_omega}, {"j_r", &ReferenceGains::j_r},
      {"d_p", &ReferenceGains::d_p},         {"k_theta", &ReferenceGains::k_theta},
      {"eta", &ReferenceGains::eta},         {"alpha", &ReferenceGains::alpha},
      {"kappa", &ReferenceGains::kappa},
  };
  return f;
}
template <>
[[nodiscard]] inline const std::vector<BoolField<ReferenceGains>>& bool_fields() {
  static const std::vector<BoolField<ReferenceGains>> f = {};
  return f;
}

template <class T>
[[nodiscard]] nlohmann::json dump_params(const T& v) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : num_fields<T>()) j[f.key] = v.*(f.member);
  for (const auto& f : bool_fields<T>()) j[f.key] = v.*(f.member);
  return j;
}

template <class T>
void read_params(const nlohmann::json& obj, T& v, const std::string& ctx,
                 std::vector<std::string>& errors) {
  if (!obj.is_object()) {
    errors.push_back(ctx + ": expected an object");
    return;
  }
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const auto& f : num_fields<T>())
      if (item.key() == f.key) {
        if (item.value().is_number()) v.*(f.member) = item.value().template get<double>();
        else errors.push_back(ctx + "." + item.key() + ": expected a number");
        known = true;
        break;
      }
    if (known) continue;
    for (const auto& f : bool_fields<T>())
      if (item.key() == f.key) {
        if (item.value().is_boolean()) v.*(f.member) = item.value().template get<bool>();
        else errors.push_back(ctx + "." + item.key() + ": expected a boolean");
        known = true;
        break;
      }
    if (!known) errors.push_back(ctx + ": unknown field '" + item.key() + "'");
  }
}

inline void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                        const std::string& ctx, std::vector<std::string>& errors) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) errors.push_back(ctx + ": unknown field '" + item.key() + "'");
  }
}

inline bool read_double(const nlohmann::json& obj, const char* key, double& out,
                        const std::string& ctx, std::vector<std::string>& errors) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number()) {
    errors.push_back(ctx + "." + key + ": expected a number");
    return false;
  }
  out = it->get<double>();
  return true;
}

inline bool read_bool(const nlohmann::json& obj, const char* key, bool& out,
                      const std::string& ctx, std::vector<std::string>& errors) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_boolean()) {
    errors.push_back(ctx + "." + key + ": expected a boolean");
    return false;
  }
  out = it->get<bool>();
  return true;
}

inline bool read_string(const nlohmann::json& obj, const char* key, std::string& out,
                        const std::string& ctx, std::vector<std::string>& errors) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_string()) {
    errors.push_back(ctx + "." + key + ": expected a string");
    return false;
  }
  out = it->get<std::string>();
  return true;
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json j;
  j["schema_version"] = scenario_schema_version;
  j["name"] = sc.name;
  j["topology"] = {{"preset", "ieee9"}, {"p_l", sc.p_l}};
  j["tau_g"] = sc.tau_g;
  j["limits"] = {{"dc_saturation", sc.limits.dc_saturation},
                 {"ac_limiter", sc.limits.ac_limiter},
                 {"setpoint_limiter", sc.limits.setpoint_limiter}};
  j["devices"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sc.devices.size(); ++i) {
    const DeviceSpec& d = sc.devices[i];
    nlohmann::json dj;
    dj["node"] = static_cast<int>(i) + 1;
    dj["kind"] = to_string(d.kind);
    dj["p_star"] = d.p_star;
    dj["q_star"] = d.q_star;
    if (d.kind == DeviceKind::sm) {
      dj["machine"] = detail::dump_params(d.machine);
    } else if (is_converter(d.kind)) {
      dj["converter"] = detail::dump_params(d.converter);
      dj["control"] = detail::dump_params(d.control);
      dj["reference"] = detail::dump_params(d.reference);
    }
    j["devices"].push_back(dj);
  }
  j["events"] = nlohmann::json::array();
  for (const auto& ev : sc.events) {
    nlohmann::json ej;
    ej["time"] = ev.time;
    switch (ev.type) {
      case ScenarioEvent::Type::load_step:
        ej["type"] = "load_step";
        ej["bus"] = ev.bus;
        ej["delta_p"] = ev.delta_p;
        break;
      case ScenarioEvent::Type::trip:
        ej["type"] = "trip";
        ej["node"] = ev.node;
        break;
      case ScenarioEvent::Type::setpoint:
        ej["type"] = "setpoint";
        ej["node"] = ev.node;
        ej["p_star"] = ev.p_star;
        break;
    }
    j["events"].push_back(ej);
  }
  j["solver"] = {{"dt", sc.solver.dt},
                 {"t_end", sc.solver.t_end},
                 {"sample_stride", sc.solver.sample_stride}};
  j["outputs"] = sc.outputs;
  return j;
}

[[nodiscard]] inline Scenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  Scenario sc;
  if (!j.is_object()) throw ScenarioError("scenario: top level must be an object");
  detail::expect_keys(j,
                      {"schema_version", "name", "topology", "tau_g", "limits", "devices",
                       "events", "solver", "outputs"},
                      "scenario", errors);

  if (auto it = j.find("schema_version"); it == j.end()) {
    errors.push_back("schema_version: required");
  } else if (!it->is_number_integer() || it->get<int>() != scenario_schema_version) {
    errors.push_back("schema_version: this build reads version " +
                     std::to_string(scenario_schema_version) + ", file says " + it->dump());
  }

  detail::read_string(j, "name", sc.name, "scenario", errors);

  if (auto it = j.find("topology"); it != j.end() && it->is_object()) {
    detail::expect_keys(*it, {"preset", "p_l"}, "topology", errors);
    std::string preset = "ieee9";
    detail::read_string(*it, "preset", preset, "topology", errors);
    if (preset != "ieee9")
      errors.push_back("topology.preset: unknown preset '" + preset + "' (available: ieee9)");
    detail::read_double(*it, "p_l", sc.p_l, "topology", errors);
  } else if (it != j.end()) {
    errors.push_back("topology: expected an object");
  }

  detail::read_double(j, "tau_g", sc.tau_g, "scenario", errors);

  if (auto it = j.find("limits"); it != j.end() && it->is_object()) {
    detail::expect_keys(*it, {"dc_saturation", "ac_limiter", "setpoint_limiter"}, "limits",
                        errors);
    detail::read_bool(*it, "dc_saturation", sc.limits.dc_saturation, "limits", errors);
    detail::read_bool(*it, "ac_limiter", sc.limits.ac_limiter, "limits", errors);
    detail::read_bool(*it, "setpoint_limiter", sc.limits.setpoint_limiter, "limits", errors);
  } else if (it != j.end()) {
    errors.push_back("limits: expected an object");
  }

  sc.devices.assign(3, DeviceSpec{});
  for (auto& d : sc.devices) d.kind = DeviceKind::none;
  std::array<bool, 3> node_seen{false, false, false};
  if (auto it = j.find("devices"); it == j.end() || !it->is_array()) {
    errors.push_back("devices: required array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const nlohmann::json& dj = (*it)[i];
      std::string ctx = "devices[" + std::to_string(i) + "]";
      if (!dj.is_object()) {
        errors.push_back(ctx + ": expected an object");
        continue;
      }
      detail::expect_keys(
          dj, {"node", "kind", "p_star", "q_star", "machine", "converter", "control", "reference"},
          ctx, errors);
      int node = 0;
      if (auto nit = dj.find("node"); nit == dj.end() || !nit->is_number_integer()) {
        errors.push_back(ctx + ": missing integer field 'node'");
        continue;
      } else {
        node = nit->get<int>();
      }
      ctx += " (node " + std::to_string(node) + ")";
      if (node < 1 || node > 3) {
        errors.push_back(ctx + ": node out of range 1..3");
        continue;
      }
      if (node_seen[node - 1]) {
        errors.push_back(ctx + ": node assigned twice");
        continue;
      }
      node_seen[node - 1] = true;
      DeviceSpec& spec = sc.devices[node - 1];
      std::string kind_str;
      if (!detail::read_string(dj, "kind", kind_str, ctx, errors) ||
          !try_parse_kind(kind_str, spec.kind)) {
        if (!kind_str.empty()) errors.push_back(ctx + ": unknown device kind '" + kind_str + "'");
        // a missing kind is reported by Scenario::validate, naming the node
      }
      detail::read_double(dj, "p_star", spec.p_star, ctx, errors);
      detail::read_double(dj, "q_star", spec.q_star, ctx, errors);
      if (auto pit = dj.find("machine"); pit != dj.end())
        detail::read_params(*pit, spec.machine, ctx + ".machine", errors);
      if (auto pit = dj.find("converter"); pit != dj.end())
        detail::read_params(*pit, spec.converter, ctx + ".converter", errors);
      if (auto pit = dj.find("control"); pit != dj.end())
        detail::read_params(*pit, spec.control, ctx + ".control", errors);
      if (auto pit = dj.find("reference"); pit != dj.end())
        detail::read_params(*pit, spec.reference, ctx + ".reference", errors);
    }
  }

  if (auto it = j.find("events"); it != j.end()) {
    if (!it->is_array()) {
      errors.push_back("events: expected an array");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const nlohmann::json& ej = (*it)[i];
        const std::string ctx = "events[" + std::to_string(i) + "]";
        if (!ej.is_object()) {
          errors.push_back(ctx + ": expected an object");
          continue;
        }
        detail::expect_keys(ej, {"type", "time", "bus", "delta_p", "node", "p_star"}, ctx, errors);
        ScenarioEvent ev;
        std::string type_str;
        if (!detail::read_string(ej, "type", type_str, ctx, errors)) {
          errors.push_back(ctx + ": missing field 'type'");
          continue;
        }
        if (type_str == "load_step") ev.type = ScenarioEvent::Type::load_step;
        else if (type_str == "trip") ev.type = ScenarioEvent::Type::trip;
        else if (type_str == "setpoint") ev.type = ScenarioEvent::Type::setpoint;
        else {
          errors.push_back(ctx + ": unknown event type '" + type_str + "'");
          continue;
        }
        detail::read_double(ej, "time", ev.time, ctx, errors);
        if (ev.type == ScenarioEvent::Type::load_step) {
          if (!detail::read_string(ej, "bus", ev.bus, ctx, errors))
            errors.push_back(ctx + ": load_step requires 'bus'");
          detail::read_double(ej, "delta_p", ev.delta_p, ctx, errors);
        } else {
          if (auto nit = ej.find("node"); nit != ej.end() && nit->is_number_integer())
            ev.node = nit->get<int>();
          else
            errors.push_back(ctx + ": requires integer 'node'");
          if (ev.type == ScenarioEvent::Type::setpoint)
            detail::read_double(ej, "p_star", ev.p_star, ctx, errors);
        }
        sc.events.push_back(ev);
      }
    }
  }

  if (auto it = j.find("solver"); it != j.end() && it->is_object()) {
    detail::expect_keys(*it, {"dt", "t_end", "sample_stride"}, "solver", errors);
    detail::read_double(*it, "dt", sc.solver.dt, "solver", errors);
    detail::read_double(*it, "t_end", sc.solver.t_end, "solver", errors);
    if (auto sit = it->find("sample_stride"); sit != it->end()) {
      if (sit->is_number_integer()) sc.solver.sample_stride = sit->get<int>();
      else errors.push_back("solver.sample_stride: expected an integer");
    }
  } else if (it != j.end()) {
    errors.push_back("solver: expected an object");
  }

  if (auto it = j.find("outputs"); it != j.end()) {
    if (!it->is_array()) {
      errors.push_back("outputs: expected an array of channel names");
    } else {
      for (const auto& o : *it) {
        if (o.is_string()) sc.outputs.push_back(o.get<std::string>());
        else errors.push_back("outputs: expected an array of channel names");
      }
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid scenario";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ScenarioError(msg);
  }
  sc.validate();
  return sc;
}

[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot open '" + path + "' for writing");
  out << to_json(sc).dump(2) << '\n';
  if (!out.flush()) throw ScenarioError("write to '" + path + "' failed");
}

// Two scenarios are equivalent when they serialize identically.
[[nodiscard]] inline bool equivalent(const Scenario& a, const Scenario& b) {
  return to_json(a) == to_json(b);
}

// ---------------------------------------------------------------------------
// Preset catalog

namespace detail {

inline Scenario base_ieee9(const std::array<DeviceKind, 3>& kinds, double p_l) {
  Scenario sc;
  sc.p_l = p_l;
  sc.devices.assign(3, DeviceSpec{});
  for (int i = 0; i < 3; ++i) {
    sc.devices[i].kind = kinds[i];
    sc.devices[i].p_star = 0.66;
  }
  return sc;
}

inline ScenarioEvent load_step(double t, const std::string& bus, double dp) {
  ScenarioEvent ev;
  ev.type = ScenarioEvent::Type::load_step;
  ev.time = t;
  ev.bus = bus;
  ev.delta_p = dp;
  return ev;
}

inline ScenarioEvent trip(double t, int node) {
  ScenarioEvent ev;
  ev.type = ScenarioEvent::Type::trip;
  ev.time = t;
  ev.node = node;
  return ev;
}

}  // namespace detail

[[nodiscard]] inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "ieee9-allsm",
      "ieee9-droop",
      "ieee9-vsm",
      "ieee9-matching",
      "ieee9-dvoc",
      "ieee9-droop-bigstep",
      "ieee9-vsm-bigstep",
      "ieee9-matching-bigstep",
      "ieee9-dvoc-bigstep",
      "ieee9-droop-bigstep-aclim",
      "ieee9-vsm-bigstep-aclim",
      "ieee9-dvoc-bigstep-aclim",
      "ieee9-droop-bigstep-splim",
      "ieee9-vsm-bigstep-splim",
      "ieee9-dvoc-bigstep-splim",
      "ieee9-droop-bigstep-aclim-fastgov",
      "ieee9-droop-losssm",
      "ieee9-vsm-losssm",
      "ieee9-matching-losssm",
      "ieee9-dvoc-losssm",
      "ieee9-droop-allgfc-bigstep",
      "ieee9-droop-sharing",
      "ieee9-vsm-sharing",
      "ieee9-matching-sharing",
      "ieee9-dvoc-sharing",
  };
  return names;
}

// Named case studies on the 9-bus system. The plain strategy presets carry the
// small disturbance used for frequency-metric sweeps (limits disabled: the
// sweep operating range is chosen so they would not engage, and disabling them
// keeps the comparison between strategies purely about the synchronization
// law). The -bigstep family reproduces the large-disturbance studies at
// elevated loading, the -losssm family the loss of the machine at node 1, and
// the -sharing family applies the gain choices that make all units share a
// load change equally in steady state.
[[nodiscard]] inline Scenario preset_scenario(const std::string& name) {
  using detail::base_ieee9;
  const DeviceKind S = DeviceKind::sm;
  auto strategy_of = [](const std::string& n) {
    if (n.find("droop") != std::string::npos) return DeviceKind::droop;
    if (n.find("vsm") != std::string::npos) return DeviceKind::vsm;
    if (n.find("matching") != std::string::npos) return DeviceKind::matching;
    return DeviceKind::dvoc;
  };

  Scenario sc;
  if (name == "ieee9-allsm") {
    sc = base_ieee9({S, S, S}, 2.0);
    sc.events.push_back(detail::load_step(0.5, "bus7", 0.2));
  } else if (name == "ieee9-droop" || name == "ieee9-vsm" || name == "ieee9-matching" ||
             name == "ieee9-dvoc") {
    const DeviceKind G = strategy_of(name);
    sc = base_ieee9({S, G, G}, 2.0);
    sc.limits.dc_saturation = false;
    sc.events.push_back(detail::load_step(0.5, "bus7", 0.2));
  } else if (name.find("-bigstep") != std::string::npos && name.find("allgfc") == std::string::npos) {
    const DeviceKind G = strategy_of(name);
    sc = base_ieee9({S, G, G}, 2.25);
    sc.events.push_back(detail::load_step(0.5, "bus7", 0.9));
    if (name.find("-aclim") != std::string::npos) sc.limits.ac_limiter = true;
    if (name.find("-splim") != std::string::npos) {
      sc.limits.ac_limiter = true;
      sc.limits.setpoint_limiter = true;
    }
    if (name.find("-fastgov") != std::string::npos) sc.tau_g = 1.0;
  } else if (name == "ieee9-droop-allgfc-bigstep") {
    const DeviceKind G = DeviceKind::droop;
    sc = base_ieee9({G, G, G}, 2.25);
    sc.events.push_back(detail::load_step(0.5, "bus7", 0.9));
  } else if (name.find("-losssm") != std::string::npos) {
    const DeviceKind G = strategy_of(name);
    sc = base_ieee9({S, G, G}, 2.1);
    sc.devices[0].p_star = 0.6;
    sc.devices[1].p_star = 0.75;
    sc.devices[2].p_star = 0.75;
    sc.events.push_back(detail::trip(0.5, 1));
  } else if (name.find("-sharing") != std::string::npos) {
    const DeviceKind G = strategy_of(name);
    sc = base_ieee9({S, G, G}, 2.0);
    const EquivalentGains eq = compute_equivalent_gains(sc.devices[0].machine.d_p);
    for (int i = 1; i <= 2; ++i) {
      sc.devices[i].reference.d_omega = eq.d_omega;
      sc.devices[i].reference.d_p = eq.d_p_vsm;
      sc.devices[i].control.k_dc = eq.k_dc;
      sc.devices[i].reference.eta = eq.eta;
    }
    sc.events.push_back(detail::load_step(0.5, "bus7", 0.3));
    sc.solver.t_end = 40.0;
    sc.solver.sample_stride = 200;
  } else {
    std::string msg = "unknown preset '" + name + "'; available:";
    for (const auto& n : preset_names()) msg += "\n  " + n;
    throw ScenarioError(msg);
  }
  sc.name = name;
  sc.validate();
  return sc;
}

// ---------------------------------------------------------------------------
// Orchestration

struct BuiltScenario {
  Topology topology;
  std::vector<DeviceSpec> specs;
  std::vector<Event> events;
};

[[nodiscard]] inline BuiltScenario build_scenario(const Scenario& sc) {
  sc.validate();
  BuiltScenario b{build_ieee9({sc.devices[0].kind, sc.devices[1].kind, sc.devices[2].kind}, sc.p_l),
                  sc.devices,
                  {}};
  for (auto& spec : b.specs) {
    if (spec.kind == DeviceKind::sm) {
      spec.machine.tau_g = sc.tau_g;
    } else {
      spec.converter.dc_saturation = sc.limits.dc_saturation;
      spec.control.ac_limiter = sc.limits.ac_limiter;
      spec.control.setpoint_limiter = sc.limits.setpoint_limiter;
    }
  }
  for (const auto& ev : sc.events) {
    Event e;
    e.time = ev.time;
    switch (ev.type) {
      case ScenarioEvent::Type::load_step: {
        int bus = -1;
        for (int i = 0; i < static_cast<int>(b.topology.buses.size()); ++i)
          if (b.topology.buses[i].name == ev.bus) bus = i;
        e.action = LoadStepEvent{bus, ev.delta_p};
        break;
      }
      case ScenarioEvent::Type::trip:
        e.action = DeviceTripEvent{ev.node - 1};
        break;
      case ScenarioEvent::Type::setpoint:
        e.action = SetpointChangeEvent{ev.node - 1, ev.p_star};
        break;
    }
    b.events.push_back(e);
  }
  std::stable_sort(b.events.begin(), b.events.end(),
                   [](const Event& x, const Event& y) { return x.time < y.time; });
  return b;
}

struct ScenarioResult {
  SystemRunResult run;
  MetricsResult metrics;  // referenced to the first event, if any
  double w_pre = 1.0;     // frequency just before the first event, pu
  int exit_code = 0;      // 0 stable, 2 dc collapse, 3 divergent
};

[[nodiscard]] inline ScenarioResult run_scenario(const Scenario& sc) {
  BuiltScenario built = build_scenario(sc);
  PowerSystem sys(built.topology, built.specs);
  sys.initialize();
  ScenarioResult r;
  r.run = sys.run(sc.solver, built.events);
  switch (r.run.classification) {
    case SystemClass::stable: r.exit_code = 0; break;
    case SystemClass::dc_collapse: r.exit_code = 2; break;
    case SystemClass::divergent: r.exit_code = 3; break;
  }
  r.metrics.stable = r.run.classification;
  const int fc = sys.frequency_channel();
  if (!built.events.empty() && fc >= 0 && r.run.trace.samples() > 1) {
    const double t0 = built.events.front().time;
    const auto& w = r.run.trace.values[fc];
    r.w_pre = sample_at(r.run.trace.time, w, t0 - sc.solver.dt);
    double dp = 0.0;
    for (const auto& ev : sc.events)
      if (ev.type == ScenarioEvent::Type::load_step) {
        dp = ev.delta_p;
        break;
      }
    const double window = 0.25;
    if (r.run.t_final >= t0 + window) {
      SweepSample sample{r.run.trace.time, w, r.run.classification};
      r.metrics = evaluate_metrics(sample, dp, r.w_pre, t0, window);
    }
  }
  return r;
}

}  // namespace lowinertia
