#pragma once

// Full-system assembly: a network plus machines and converters, flattened
// into one state vector with a single right-hand side, steady-state
// initialization through the droop-slack power flow, event handling, run
// classification, and channel recording.

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gfc_controls.hpp"
#include "machine.hpp"
#include "network.hpp"
#include "power_flow.hpp"
#include "solver.hpp"

namespace lowinertia {

// Per-site device description used to assemble a system. The kind must match
// the topology's attachment kind.
struct DeviceSpec {
  DeviceKind kind = DeviceKind::sm;
  double p_star = 0.0;
  double q_star = 0.0;
  MachineParams machine = MachineParams::round_rotor_100mva();
  ConverterParams converter{};
  ControlGains control{};
  ReferenceGains reference{};
};

enum class SystemClass { stable, dc_collapse, divergent };

[[nodiscard]] inline std::string to_string(SystemClass c) {
  switch (c) {
    case SystemClass::stable: return "stable";
    case SystemClass::dc_collapse: return "dc_collapse";
    case SystemClass::divergent: return "divergent";
  }
  return "?";
}

struct SystemRunResult {
  SystemClass classification = SystemClass::stable;
  RunStatus status = RunStatus::completed;
  double t_final = 0.0;
  int bad_state = -1;
  Trace trace;
};

// dc-link voltage below which a converter is considered collapsed and the
// run is classified accordingly
inline constexpr double dc_collapse_level = dc_collapse_threshold;

[[nodiscard]] inline int find_bus(const Topology& t, const std::string& name) {
  for (std::size_t b = 0; b < t.buses.size(); ++b)
    if (t.buses[b].name == name) return static_cast<int>(b);
  throw std::invalid_argument("no bus named " + name);
}

class PowerSystem {
 public:
  PowerSystem(const Topology& topo, const std::vector<DeviceSpec>& specs)
      : net_(topo) {
    const auto& atts = topo.devices;
    if (specs.size() != atts.size())
      throw std::invalid_argument("device spec count does not match the topology");

    net_.register_states(reg_);

    for (std::size_t d = 0; d < specs.size(); ++d) {
      const auto& att = atts[d];
      const auto& sp = specs[d];
      if (sp.kind != att.kind)
        throw std::invalid_argument("device kind mismatch at site " + std::to_string(att.node));
      Dev dev;
      dev.kind = sp.kind;
      dev.name = "g" + std::to_string(att.node);
      dev.bus = att.bus;
      dev.grid_branch = att.grid_branch;
      if (dev.grid_branch >= 0) {
        const auto& br = net_.series_branches()[static_cast<std::size_t>(dev.grid_branch)];
        dev.grid_sign = br.from == dev.bus ? 1.0 : -1.0;
      }
      dev.state_begin = static_cast<int>(reg_.size());
      if (sp.kind == DeviceKind::sm) {
        dev.model_index = static_cast<int>(machines_.size());
        machines_.emplace_back(sp.machine);
        machines_.back().set_p_star(sp.p_star);
        machines_.back().register_states(reg_, dev.name);
      } else {
        dev.model_index = static_cast<int>(converters_.size());
        converters_.emplace_back(to_strategy(sp.kind), sp.converter, sp.control, sp.reference);
        converters_.back().set_p_star(sp.p_star);
        converters_.back().set_q_star(sp.q_star);
        converters_.back().register_states(reg_, dev.name);
      }
      dev.state_end = static_cast<int>(reg_.size());
      devs_.push_back(dev);
    }

    x_.assign(reg_.size(), 0.0);
    inj_.resize(static_cast<std::size_t>(net_.n_buses()));
    scratch_.assign(reg_.size(), 0.0);
    build_channel_names();
  }

  // Droop-slack power flow, device back-solves, and an exactness check. The
  // run refuses to start from a point that is not a true equilibrium.
  void initialize(const PowerFlowOptions& opt = {}) {
    std::vector<PowerFlowDevice> pfd;
    bool any_splim = false;
    for (const auto& d : devs_) {
      if (d.kind == DeviceKind::sm) {
        pfd.push_back(pf_device(machines_[d.model_index], d.bus));
      } else {
        pfd.push_back(pf_device(converters_[d.model_index], d.bus, d.grid_branch));
        any_splim |= converters_[d.model_index].gains().setpoint_limiter;
      }
    }

    // With the set-point limiter enabled, an operating point whose filter
    // current sits above the threshold backs its own dispatch off, which in
    // turn moves the operating point; iterate the dispatch to the fixed point.
    // Damped because the raw loop gain exceeds one for stiff droop slopes.
    std::vector<double> dps(devs_.size(), 0.0);
    PowerFlowResult pf;
    for (int iter = 0;; ++iter) {
      for (std::size_t d = 0; d < devs_.size(); ++d)
        if (devs_[d].kind != DeviceKind::sm)
          pfd[d].p_star = converters_[devs_[d].model_index].p_star() - dps[d];
      pf = solve_power_flow(net_, pfd, opt);
      if (!pf.converged)
        throw std::runtime_error("power flow did not converge (residual " +
                                 std::to_string(pf.residual) + ")");
      if (!any_splim) break;
      double delta = 0.0;
      for (std::size_t d = 0; d < devs_.size(); ++d) {
        if (devs_[d].kind == DeviceKind::sm) continue;
        const auto& c = converters_[devs_[d].model_index];
        if (!c.gains().setpoint_limiter) continue;
        const AlphaBeta i_s = {pf.i_dev[d].real(), pf.i_dev[d].imag()};
        const double target =
            power_setpoint_limiter(i_s.norm(), c.gains().i_ac_th, c.gains().gamma_p);
        const double next = dps[d] + 0.4 * (target - dps[d]);
        delta = std::max(delta, std::abs(next - dps[d]));
        dps[d] = next;
      }
      if (delta < 1e-13) break;
      if (iter > 300)
        throw std::runtime_error("set-point-limited dispatch did not reach a fixed point");
    }
    w0_ = pf.w;

    std::fill(x_.begin(), x_.end(), 0.0);
    load_network_state(net_, pf, x_.data());
    for (std::size_t d = 0; d < devs_.size(); ++d) {
      const auto& dev = devs_[d];
      const AlphaBeta v = {pf.v[dev.bus].real(), pf.v[dev.bus].imag()};
      const AlphaBeta i = {pf.i_dev[d].real(), pf.i_dev[d].imag()};
      if (dev.kind == DeviceKind::sm) {
        machines_[dev.model_index].initialize(x_.data(), v, i, w0_);
      } else {
        const std::complex<double> io_c =
            pf.i_series[static_cast<std::size_t>(dev.grid_branch)] * dev.grid_sign;
        const AlphaBeta i_o = {io_c.real(), io_c.imag()};
        converters_[dev.model_index].initialize(x_.data(), v, i, i_o, w0_);
      }
    }

    init_residual_ = steady_state_residual(
        [this](double t, const double* x, double* dx) { rhs(t, x, dx); }, x_, reg_, w0_,
        omega_base);
    if (init_residual_ > 1e-4)
      throw std::runtime_error("initialization residual " + std::to_string(init_residual_) +
                               " exceeds 1e-4; refusing to run");
    initialized_ = true;
  }

  void rhs(double /*t*/, const double* x, double* dx) const {
    for (auto& i : inj_) i = {0.0, 0.0};
    for (const auto& d : devs_) {
      if (d.tripped) {
        for (int s = d.state_begin; s < d.state_end; ++s) dx[s] = 0.0;
        continue;
      }
      const AlphaBeta v = net_.bus_voltage(x, d.bus);
      AlphaBeta out;
      if (d.kind == DeviceKind::sm) {
        out = machines_[d.model_index].rhs(x, dx, v);
      } else {
        AlphaBeta i_o = net_.series_current(x, d.grid_branch);
        i_o.x1 *= d.grid_sign;
        i_o.x2 *= d.grid_sign;
        out = converters_[d.model_index].rhs(x, dx, v, i_o);
      }
      inj_[d.bus].x1 += out.x1;
      inj_[d.bus].x2 += out.x2;
    }
    net_.rhs(x, dx, inj_.data());
  }

  SystemRunResult run(const SolverConfig& cfg, const std::vector<Event>& events) {
    if (!initialized_) throw std::logic_error("run() before initialize()");
    SystemRunResult out;
    out.trace.channel_names = channel_names_;
    out.trace.values.assign(channel_names_.size(), {});

    auto rhs_fn = [this](double t, const double* x, double* dx) { rhs(t, x, dx); };
    auto on_event = [this](const Event& e) { apply_event(e); };
    auto sample = [this, &out](double t, const std::vector<double>& x) {
      record_sample(out.trace, t, x);
    };
    auto stop = [this](double, const std::vector<double>& x) { return dc_collapsed(x); };

    const IntegrationOutcome o = integrate(rhs_fn, x_, events, cfg, on_event, sample, stop);
    out.status = o.status;
    out.t_final = o.t_final;
    out.bad_state = o.bad_state;
    switch (o.status) {
      case RunStatus::completed: out.classification = SystemClass::stable; break;
      case RunStatus::stopped: out.classification = SystemClass::dc_collapse; break;
      case RunStatus::diverged: out.classification = SystemClass::divergent; break;
    }
    return out;
  }

  void apply_event(const Event& e) {
    std::visit(
        [this](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, LoadStepEvent>) {
            net_.apply_load_step(a.bus, a.delta_p);
          } else if constexpr (std::is_same_v<T, DeviceTripEvent>) {
            devs_.at(static_cast<std::size_t>(a.device)).tripped = true;
          } else {
            auto& d = devs_.at(static_cast<std::size_t>(a.device));
            if (d.kind == DeviceKind::sm)
              machines_[d.model_index].set_p_star(a.p_star);
            else
              converters_[d.model_index].set_p_star(a.p_star);
          }
        },
        e.action);
  }

  // Channel index carrying the system frequency for metric evaluation: the
  // first machine's mechanical speed, else the first converter's internal
  // frequency.
  [[nodiscard]] int frequency_channel() const {
    for (std::size_t d = 0; d < devs_.size(); ++d)
      if (devs_[d].kind == DeviceKind::sm) return dev_channel0_[d];
    return dev_channel0_.at(0);
  }

  [[nodiscard]] int channel_index(const std::string& name) const {
    for (std::size_t c = 0; c < channel_names_.size(); ++c)
      if (channel_names_[c] == name) return static_cast<int>(c);
    throw std::invalid_argument("no channel named " + name);
  }

  [[nodiscard]] const std::vector<std::string>& channel_names() const { return channel_names_; }
  [[nodiscard]] const StateRegistry& registry() const { return reg_; }
  [[nodiscard]] const std::vector<double>& state() const { return x_; }
  [[nodiscard]] std::vector<double>& state() { return x_; }
  [[nodiscard]] double initial_speed() const { return w0_; }
  [[nodiscard]] double init_residual() const { return init_residual_; }
  [[nodiscard]] const NetworkModel& network() const { return net_; }
  [[nodiscard]] NetworkModel& network() { return net_; }
  [[nodiscard]] std::size_t n_devices() const { return devs_.size(); }
  [[nodiscard]] DeviceKind device_kind(std::size_t d) const { return devs_.at(d).kind; }
  [[nodiscard]] const std::string& device_name(std::size_t d) const { return devs_.at(d).name; }
  [[nodiscard]] MachineModel& machine_at(std::size_t d) {
    return machines_.at(static_cast<std::size_t>(devs_.at(d).model_index));
  }
  [[nodiscard]] ConverterModel& converter_at(std::size_t d) {
    return converters_.at(static_cast<std::size_t>(devs_.at(d).model_index));
  }

 private:
  struct Dev {
    DeviceKind kind = DeviceKind::sm;
    std::string name;
    int bus = 0;
    int grid_branch = -1;
    double grid_sign = 1.0;
    int model_index = -1;
    int state_begin = 0, state_end = 0;
    bool tripped = false;
  };

  static GfcStrategy to_strategy(DeviceKind k) {
    switch (k) {
      case DeviceKind::droop: return GfcStrategy::droop;
      case DeviceKind::vsm: return GfcStrategy::vsm;
      case DeviceKind::matching: return GfcStrategy::matching;
      case DeviceKind::dvoc: return GfcStrategy::dvoc;
      default: throw std::invalid_argument("not a converter kind");
    }
  }

  [[nodiscard]] bool dc_collapsed(const std::vector<double>& x) const {
    for (const auto& d : devs_) {
      if (d.kind == DeviceKind::sm || d.tripped) continue;
      if (converters_[d.model_index].v_dc(x.data()) < dc_collapse_level) return true;
    }
    return false;
  }

  void build_channel_names() {
    dev_channel0_.clear();
    for (const auto& d : devs_) {
      dev_channel0_.push_back(static_cast<int>(channel_names_.size()));
      channel_names_.push_back(d.name + ".omega");
      channel_names_.push_back(d.name + ".p");
      channel_names_.push_back(d.name + ".q");
      channel_names_.push_back(d.name + ".v");
      if (d.kind != DeviceKind::sm) {
        channel_names_.push_back(d.name + ".v_dc");
        channel_names_.push_back(d.name + ".i_tau");
        channel_names_.push_back(d.name + ".i_dc");
        channel_names_.push_back(d.name + ".i_s");
        channel_names_.push_back(d.name + ".m");
        channel_names_.push_back(d.name + ".aclim");
      }
    }
    for (int b = 0; b < net_.n_buses(); ++b)
      channel_names_.push_back(net_.topology().buses[b].name + ".v");
  }

  void record_sample(Trace& tr, double t, const std::vector<double>& x) const {
    tr.time.push_back(t);
    std::size_t c = 0;
    auto push = [&](double v) { tr.values[c++].push_back(v); };
    for (const auto& d : devs_) {
      const AlphaBeta vb = net_.bus_voltage(x.data(), d.bus);
      if (d.kind == DeviceKind::sm) {
        const auto& m = machines_[d.model_index];
        push(m.omega_pu(x.data()));
        if (d.tripped) {
          push(0.0);
          push(0.0);
        } else {
          const AlphaBeta i = machines_[d.model_index].rhs(x.data(), scratch_.data(), vb);
          const PowerPq s = instantaneous_power(vb, i);
          push(s.p);
          push(s.q);
        }
        push(vb.norm());
      } else {
        const auto& cm = converters_[d.model_index];
        if (d.tripped) {
          push(0.0);  // omega undefined once tripped
          push(0.0);
          push(0.0);
          push(vb.norm());
          push(cm.v_dc(x.data()));
          push(cm.i_tau(x.data()));
          push(0.0);
          push(cm.i_s(x.data()).norm());
          push(0.0);
          push(0.0);
        } else {
          AlphaBeta i_o = net_.series_current(x.data(), d.grid_branch);
          i_o.x1 *= d.grid_sign;
          i_o.x2 *= d.grid_sign;
          GfcDiagnostics diag;
          cm.rhs(x.data(), scratch_.data(), vb, i_o, &diag);
          push(diag.omega_pu);
          push(diag.p);
          push(diag.q);
          push(vb.norm());
          push(diag.v_dc);
          push(diag.i_tau);
          push(diag.i_dc);
          push(diag.i_s_norm);
          push(diag.m_norm);
          push(diag.ac_limited ? 1.0 : 0.0);
        }
      }
    }
    for (int b = 0; b < net_.n_buses(); ++b) push(net_.bus_voltage(x.data(), b).norm());
  }

  NetworkModel net_;
  StateRegistry reg_;
  std::vector<MachineModel> machines_;
  std::vector<ConverterModel> converters_;
  std::vector<Dev> devs_;
  std::vector<double> x_;
  mutable std::vector<AlphaBeta> inj_;
  mutable std::vector<double> scratch_;
  std::vector<std::string> channel_names_;
  std::vector<int> dev_channel0_;
  double w0_ = 1.0;
  double init_residual_ = 0.0;
  bool initialized_ = false;
};

}  // namespace lowinertia
