#pragma once

// Dynamic transmission network in stationary alpha-beta coordinates.
//
// Lines are nominal pi sections kept as differential states (series RL state
// per branch, shunt capacitance lumped into the terminal buses). Transformers
// are series RL branches with a magnetizing R||L shunt on the device side.
// Every bus carries capacitance, so bus voltages are differential states and
// the assembled network ODE is index-0: no algebraic loops anywhere.
//
// Loads are constant admittances at nominal frequency; a load step changes
// the conductance (delta_p at nominal voltage).

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "frames.hpp"
#include "solver.hpp"

namespace lowinertia {

enum class DeviceKind { sm, droop, vsm, matching, dvoc, none };

[[nodiscard]] inline bool is_converter(DeviceKind k) {
  return k == DeviceKind::droop || k == DeviceKind::vsm || k == DeviceKind::matching ||
         k == DeviceKind::dvoc;
}

[[nodiscard]] inline std::string to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::sm: return "sm";
    case DeviceKind::droop: return "droop";
    case DeviceKind::vsm: return "vsm";
    case DeviceKind::matching: return "matching";
    case DeviceKind::dvoc: return "dvoc";
    case DeviceKind::none: return "none";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Topology description (immutable after build)
// ---------------------------------------------------------------------------

struct PiLine {
  int from = 0, to = 0;
  double r = 0.0, l = 0.0;   // series, pu
  double b_total = 0.0;      // total line charging, split half per end
};

struct Transformer {
  int device_bus = 0, grid_bus = 0;
  double r1 = 0.0, l1 = 0.0;  // device-side winding
  double r2 = 0.0, l2 = 0.0;  // grid-side winding
  double r_m = 0.0, l_m = 0.0;  // magnetizing branch (R parallel L), device side
  double ratio = 1.0;           // nominal taps only

  [[nodiscard]] double r_series() const { return r1 + r2; }
  [[nodiscard]] double l_series() const { return l1 + l2; }
};

struct ConstantImpedanceLoad {
  int bus = 0;
  double g = 0.0;  // pu admittance at nominal voltage
  double b = 0.0;
};

struct BusNode {
  std::string name;
  double c = 0.0;  // shunt capacitance aggregate, pu
};

struct DeviceAttachment {
  int node = 0;  // 1-based site number (generation sites 1..3 on the 9-bus)
  DeviceKind kind = DeviceKind::none;
  int bus = 0;          // bus the device injects current into
  int grid_branch = -1; // series branch carrying the device output (converters)
};

struct Topology {
  std::vector<BusNode> buses;
  std::vector<PiLine> lines;
  std::vector<Transformer> transformers;
  std::vector<ConstantImpedanceLoad> loads;
  std::vector<DeviceAttachment> devices;

  [[nodiscard]] int n_buses() const { return static_cast<int>(buses.size()); }

  void validate() const {
    auto check_bus = [&](int b, const char* what) {
      if (b < 0 || b >= n_buses()) throw std::invalid_argument(std::string(what) + ": bad bus id");
    };
    for (const auto& ln : lines) {
      check_bus(ln.from, "line");
      check_bus(ln.to, "line");
      if (!(ln.r > 0.0) || !(ln.l > 0.0)) throw std::invalid_argument("line r, l must be positive");
      if (ln.b_total < 0.0) throw std::invalid_argument("line charging must be non-negative");
    }
    for (const auto& tr : transformers) {
      check_bus(tr.device_bus, "transformer");
      check_bus(tr.grid_bus, "transformer");
      if (!(tr.r_series() > 0.0) || !(tr.l_series() > 0.0))
        throw std::invalid_argument("transformer series impedance must be positive");
    }
    for (const auto& ld : loads) {
      check_bus(ld.bus, "load");
      if (ld.g < 0.0) throw std::invalid_argument("load conductance must be non-negative");
    }
    for (const auto& dv : devices) check_bus(dv.bus, "device");

    // every bus must end up with capacitance (differential state)
    std::vector<double> c(buses.size());
    for (std::size_t b = 0; b < buses.size(); ++b) c[b] = buses[b].c;
    for (const auto& ln : lines) {
      c[ln.from] += 0.5 * ln.b_total;
      c[ln.to] += 0.5 * ln.b_total;
    }
    for (const auto& ld : loads) c[ld.bus] += ld.b;
    for (std::size_t b = 0; b < buses.size(); ++b)
      if (!(c[b] > 0.0))
        throw std::invalid_argument("bus " + buses[b].name + " has no shunt capacitance");

    // connectivity
    std::vector<int> comp(buses.size(), -1);
    std::vector<int> stack{0};
    comp[0] = 0;
    auto visit = [&](int a, int b) {
      if (comp[b] == -1 && comp[a] == 0) { comp[b] = 0; stack.push_back(b); }
      if (comp[a] == -1 && comp[b] == 0) { comp[a] = 0; stack.push_back(a); }
    };
    while (!stack.empty()) {
      stack.pop_back();
      for (const auto& ln : lines) visit(ln.from, ln.to);
      for (const auto& tr : transformers) visit(tr.device_bus, tr.grid_bus);
    }
    for (std::size_t b = 0; b < buses.size(); ++b)
      if (comp[b] != 0) throw std::invalid_argument("bus " + buses[b].name + " is disconnected");
  }
};

// ---------------------------------------------------------------------------
// IEEE 9-bus builder
// ---------------------------------------------------------------------------

// WSCC 3-machine 9-bus parameters, pu on 100 MVA / 230 kV. Buses 1-3 are the
// generation sites (medium-voltage device buses behind step-up transformers
// to buses 4, 8, 6), loads sit at buses 5, 7, 9.
namespace ieee9 {

struct LineData { int from, to; double r, x, b; };
inline constexpr LineData lines[6] = {
    {4, 5, 0.0170, 0.0920, 0.1580},
    {5, 6, 0.0390, 0.1700, 0.3580},
    {6, 7, 0.0119, 0.1008, 0.2090},
    {7, 8, 0.0085, 0.0720, 0.1490},
    {8, 9, 0.0320, 0.1610, 0.3060},
    {9, 4, 0.0100, 0.0850, 0.1760},
};
// generation site -> high-voltage bus for the step-up transformer
inline constexpr int site_hv_bus[3] = {4, 8, 6};
inline constexpr int load_buses[3] = {5, 7, 9};

// Step-up (MV/HV) transformer: 210 MVA unit, r = 0.54%, x = 16% on its own
// base; magnetizing branch 500 pu on its own base. Values below are on the
// 100 MVA system base.
inline constexpr double mvhv_r = 0.0054 * 100.0 / 210.0;
inline constexpr double mvhv_l = 0.16 * 100.0 / 210.0;
inline constexpr double mvhv_rm = 500.0 * 100.0 / 210.0;
inline constexpr double mvhv_lm = 500.0 * 100.0 / 210.0;

// Converter (LV/MV) transformer: aggregate of 100 parallel 1.6 MVA modules
// (160 MVA), r = 1.46%, x = 3.6%, magnetizing 347 / 156 pu on the aggregate
// base. On the 100 MVA system base:
inline constexpr double lvmv_r = 0.0146 * 100.0 / 160.0;
inline constexpr double lvmv_l = 0.036 * 100.0 / 160.0;
inline constexpr double lvmv_rm = 347.0 * 100.0 / 160.0;
inline constexpr double lvmv_lm = 156.0 * 100.0 / 160.0;

// Aggregate converter output filter on the system base (100 modules).
inline constexpr double filter_c = 0.18850;

// Device-side buses need explicit capacitance so every node is dynamic; the
// converter LV bus carries its output filter capacitor, other internal buses
// get a small stray value.
inline constexpr double internal_bus_c = 0.01;

}  // namespace ieee9

// Builds the 9-bus topology with the given device kind at each generation
// site and total base load p_l distributed uniformly over buses 5, 7, 9.
// Sites with kind none are left without transformer or device bus.
inline Topology build_ieee9(const std::array<DeviceKind, 3>& kinds, double p_l) {
  Topology t;
  t.buses.resize(9);
  for (int b = 0; b < 9; ++b) t.buses[b].name = "bus" + std::to_string(b + 1);
  // buses 1-3 unused when the site is empty, but keep ids stable
  for (int b = 0; b < 9; ++b) t.buses[b].c = 0.0;
  for (int s = 0; s < 3; ++s) t.buses[s].c = ieee9::internal_bus_c;

  for (const auto& ld : ieee9::lines)
    t.lines.push_back({ld.from - 1, ld.to - 1, ld.r, ld.x, ld.b});

  for (int s = 0; s < 3; ++s) {
    const DeviceKind kind = kinds[s];
    if (kind == DeviceKind::none) continue;
    const int mv_bus = s;  // buses 1..3 are the device MV buses
    const int hv_bus = ieee9::site_hv_bus[s] - 1;
    t.transformers.push_back({mv_bus, hv_bus, 0.5 * ieee9::mvhv_r, 0.5 * ieee9::mvhv_l,
                              0.5 * ieee9::mvhv_r, 0.5 * ieee9::mvhv_l, ieee9::mvhv_rm,
                              ieee9::mvhv_lm, 1.0});
    if (kind == DeviceKind::sm) {
      t.devices.push_back({s + 1, kind, mv_bus, -1});
    } else {
      // converter chain: LV filter bus, LV/MV transformer, then the MV bus
      const int lv_bus = t.n_buses();
      t.buses.push_back({"bus" + std::to_string(s + 1) + "lv", ieee9::filter_c});
      t.transformers.push_back({lv_bus, mv_bus, 0.5 * ieee9::lvmv_r, 0.5 * ieee9::lvmv_l,
                                0.5 * ieee9::lvmv_r, 0.5 * ieee9::lvmv_l, ieee9::lvmv_rm,
                                ieee9::lvmv_lm, 1.0});
      const int branch = static_cast<int>(t.lines.size() + t.transformers.size()) - 1;
      t.devices.push_back({s + 1, kind, lv_bus, branch});
    }
  }

  // strip the unused site buses when a site is empty: rebuild only if needed
  bool any_none = false;
  for (auto k : kinds) any_none |= (k == DeviceKind::none);
  if (any_none) {
    // mark used buses and compact ids
    std::vector<bool> used(t.buses.size(), false);
    for (int b = 3; b < t.n_buses(); ++b) used[b] = true;
    for (const auto& d : t.devices) used[d.bus] = true;
    for (const auto& tr : t.transformers) { used[tr.device_bus] = true; used[tr.grid_bus] = true; }
    std::vector<int> remap(t.buses.size(), -1);
    std::vector<BusNode> kept;
    for (std::size_t b = 0; b < t.buses.size(); ++b)
      if (used[b]) { remap[b] = static_cast<int>(kept.size()); kept.push_back(t.buses[b]); }
    t.buses = std::move(kept);
    for (auto& ln : t.lines) { ln.from = remap[ln.from]; ln.to = remap[ln.to]; }
    for (auto& tr : t.transformers) { tr.device_bus = remap[tr.device_bus]; tr.grid_bus = remap[tr.grid_bus]; }
    for (auto& d : t.devices) d.bus = remap[d.bus];
  }

  const double g_each = p_l / 3.0;
  for (int lb : ieee9::load_buses) {
    // load bus ids shift when site buses were stripped
    int bus = lb - 1;
    if (any_none) {
      for (std::size_t b = 0; b < t.buses.size(); ++b)
        if (t.buses[b].name == "bus" + std::to_string(lb)) bus = static_cast<int>(b);
    }
    t.loads.push_back({bus, g_each, 0.0});
  }

  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Runtime model
// ---------------------------------------------------------------------------

// Flattened, mutable-load runtime form of a Topology. State layout (assigned
// via register_states): bus voltage pairs, then series branch current pairs
// (lines first, transformers after, in declaration order), then magnetizing
// current pairs.
class NetworkModel {
 public:
  explicit NetworkModel(const Topology& topo) : topo_(topo) {
    topo.validate();
    nb_ = topo.n_buses();
    bus_c_.assign(nb_, 0.0);
    bus_g_.assign(nb_, 0.0);
    for (int b = 0; b < nb_; ++b) bus_c_[b] = topo.buses[b].c;
    for (const auto& ln : topo.lines) {
      bus_c_[ln.from] += 0.5 * ln.b_total;
      bus_c_[ln.to] += 0.5 * ln.b_total;
      series_.push_back({ln.from, ln.to, ln.r, ln.l});
    }
    for (const auto& tr : topo.transformers) {
      series_.push_back({tr.device_bus, tr.grid_bus, tr.r_series(), tr.l_series()});
      if (tr.l_m > 0.0) mag_.push_back({tr.device_bus, tr.l_m});
      if (tr.r_m > 0.0) bus_g_[tr.device_bus] += 1.0 / tr.r_m;
    }
    for (const auto& ld : topo.loads) {
      bus_g_[ld.bus] += ld.g;
      bus_c_[ld.bus] += ld.b;
    }
  }

  void register_states(StateRegistry& reg) {
    iv0_ = reg.add_pair(topo_.buses[0].name + ".v");
    for (int b = 1; b < nb_; ++b) reg.add_pair(topo_.buses[b].name + ".v");
    ib0_ = -1;
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const int i = reg.add_pair("branch" + std::to_string(k) + ".i");
      if (ib0_ < 0) ib0_ = i;
    }
    im0_ = -1;
    for (std::size_t k = 0; k < mag_.size(); ++k) {
      const int i = reg.add_pair("mag" + std::to_string(k) + ".i");
      if (im0_ < 0) im0_ = i;
    }
  }

  [[nodiscard]] int n_buses() const { return nb_; }
  [[nodiscard]] int n_series() const { return static_cast<int>(series_.size()); }
  [[nodiscard]] int bus_v_index(int bus) const { return iv0_ + 2 * bus; }
  [[nodiscard]] int series_i_index(int k) const { return ib0_ + 2 * k; }
  [[nodiscard]] int mag_i_index(int k) const { return im0_ + 2 * k; }
  [[nodiscard]] double bus_c(int bus) const { return bus_c_[bus]; }

  [[nodiscard]] AlphaBeta bus_voltage(const double* x, int bus) const {
    return {x[iv0_ + 2 * bus], x[iv0_ + 2 * bus + 1]};
  }
  [[nodiscard]] AlphaBeta series_current(const double* x, int k) const {
    return {x[ib0_ + 2 * k], x[ib0_ + 2 * k + 1]};
  }

  void apply_load_step(int bus, double delta_p) {
    if (bus < 0 || bus >= nb_) throw std::invalid_argument("load step: bad bus");
    bus_g_[bus] += delta_p;  // constant-impedance at nominal voltage
  }

  [[nodiscard]] double bus_conductance(int bus) const { return bus_g_[bus]; }

  // Network part of the system rhs. `inj` holds the device current injections
  // per bus (alpha-beta, accumulated by the caller); this routine adds load,
  // branch and magnetizing flows and writes the bus voltage and branch
  // current derivatives.
  void rhs(const double* x, double* dx, AlphaBeta* inj) const {
    const double* v = x + iv0_;
    for (int b = 0; b < nb_; ++b) {
      inj[b].x1 -= bus_g_[b] * v[2 * b];
      inj[b].x2 -= bus_g_[b] * v[2 * b + 1];
    }
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      const double ia = x[ib0_ + 2 * k], ib = x[ib0_ + 2 * k + 1];
      const double ea = v[2 * s.from] - v[2 * s.to] - s.r * ia;
      const double eb = v[2 * s.from + 1] - v[2 * s.to + 1] - s.r * ib;
      dx[ib0_ + 2 * k] = omega_base / s.l * ea;
      dx[ib0_ + 2 * k + 1] = omega_base / s.l * eb;
      inj[s.from].x1 -= ia;
      inj[s.from].x2 -= ib;
      inj[s.to].x1 += ia;
      inj[s.to].x2 += ib;
    }
    for (std::size_t k = 0; k < mag_.size(); ++k) {
      const auto& m = mag_[k];
      const double ia = x[im0_ + 2 * k], ib = x[im0_ + 2 * k + 1];
      dx[im0_ + 2 * k] = omega_base / m.l * v[2 * m.bus];
      dx[im0_ + 2 * k + 1] = omega_base / m.l * v[2 * m.bus + 1];
      inj[m.bus].x1 -= ia;
      inj[m.bus].x2 -= ib;
    }
    for (int b = 0; b < nb_; ++b) {
      dx[iv0_ + 2 * b] = omega_base / bus_c_[b] * inj[b].x1;
      dx[iv0_ + 2 * b + 1] = omega_base / bus_c_[b] * inj[b].x2;
    }
  }

  // Total stored energy in pu-seconds (energy / s_base): capacitors plus
  // series and magnetizing inductors.
  [[nodiscard]] double stored_energy(const double* x) const {
    double e = 0.0;
    for (int b = 0; b < nb_; ++b) {
      const double va = x[iv0_ + 2 * b], vb = x[iv0_ + 2 * b + 1];
      e += 0.5 * bus_c_[b] * (va * va + vb * vb);
    }
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const double ia = x[ib0_ + 2 * k], ib = x[ib0_ + 2 * k + 1];
      e += 0.5 * series_[k].l * (ia * ia + ib * ib);
    }
    for (std::size_t k = 0; k < mag_.size(); ++k) {
      const double ia = x[im0_ + 2 * k], ib = x[im0_ + 2 * k + 1];
      e += 0.5 * mag_[k].l * (ia * ia + ib * ib);
    }
    return e / omega_base;
  }

  // Resistive dissipation (branch series r) plus conductance loads, pu.
  [[nodiscard]] double dissipated_power(const double* x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const double ia = x[ib0_ + 2 * k], ib = x[ib0_ + 2 * k + 1];
      p += series_[k].r * (ia * ia + ib * ib);
    }
    for (int b = 0; b < nb_; ++b) {
      const double va = x[iv0_ + 2 * b], vb = x[iv0_ + 2 * b + 1];
      p += bus_g_[b] * (va * va + vb * vb);
    }
    return p;
  }

  struct SeriesBranch { int from, to; double r, l; };
  [[nodiscard]] const std::vector<SeriesBranch>& series_branches() const { return series_; }
  struct MagBranch { int bus; double l; };
  [[nodiscard]] const std::vector<MagBranch>& mag_branches() const { return mag_; }
  [[nodiscard]] const Topology& topology() const { return topo_; }

 private:
  Topology topo_;
  int nb_ = 0;
  std::vector<double> bus_c_, bus_g_;
  std::vector<SeriesBranch> series_;
  std::vector<MagBranch> mag_;
  int iv0_ = -1, ib0_ = -1, im0_ = -1;
};

}  // namespace lowinertia
