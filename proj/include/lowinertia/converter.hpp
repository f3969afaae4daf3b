#pragma once

// Two-level voltage source converter physics: dc link with a delayed and
// saturated dc source, lossless averaged switching stage, RL output filter
// into a shunt capacitor.
//
// Per unit on the system base, time in seconds. The dc link uses the energy
// form (capacitance in pu-seconds, no base-frequency factor); ac-side
// inductors and capacitors carry reactance-style per-unit values and pick up
// the base frequency in their derivatives.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "frames.hpp"

namespace lowinertia {

struct ConverterParams {
  // dc link, aggregate values. The capacitance is the stored-energy constant
  // (C v_dc_base^2 / S_base), the conductance a small standing loss.
  double c_dc = 0.047629;   // pu s
  double g_dc = 0.0049415;  // pu
  double tau_dc = 0.05;     // dc source response time, s
  double i_dc_max = 1.2;    // dc source limit, pu
  double v_dc_star = 1.0;   // nominal dc voltage, pu

  // output filter
  double r_f = 0.0005;   // pu
  double l_f = 0.031416; // pu
  double c_f = 0.18850;  // pu

  // switching-stage gain: half the dc-to-peak-ac base ratio, so that
  // v_s = k_sw * m * v_dc and i_x = k_sw * (m . i_s) are exact per-unit
  // counterparts of the averaged full-bridge relations
  double k_sw = 0.5 * 2440.0 / (1000.0 * std::numbers::sqrt2 / std::numbers::sqrt3);

  bool dc_saturation = true;  // physical source limit; off only for studies

  void validate() const {
    auto pos = [](double v, const char* what) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("converter: ") + what + " must be positive");
    };
    pos(c_dc, "c_dc");
    pos(g_dc, "g_dc");
    pos(tau_dc, "tau_dc");
    pos(i_dc_max, "i_dc_max");
    pos(v_dc_star, "v_dc_star");
    pos(r_f, "r_f");
    pos(l_f, "l_f");
    pos(c_f, "c_f");
    pos(k_sw, "k_sw");
  }
};

// Bidirectional hard limit of the dc source current.
[[nodiscard]] inline double saturate_dc(double i_tau, double i_dc_max) {
  if (i_tau > i_dc_max) return i_dc_max;
  if (i_tau < -i_dc_max) return -i_dc_max;
  return i_tau;
}

// Averaged switching stage: ac-side voltage from the modulation vector, and
// the dc-side current drawn to deliver the ac power. Lossless by
// construction: v_dc * i_x == v_s . i_s for any inputs.
[[nodiscard]] inline AlphaBeta switching_voltage(AlphaBeta m, double v_dc, double k_sw) {
  return {k_sw * v_dc * m.x1, k_sw * v_dc * m.x2};
}
[[nodiscard]] inline double switching_current(AlphaBeta m, AlphaBeta i_s, double k_sw) {
  return k_sw * (m.x1 * i_s.x1 + m.x2 * i_s.x2);
}

// Open-loop converter state for standalone use; in system runs the filter
// capacitor voltage lives on the network as the converter's low-voltage bus.
struct ConverterPhysicsState {
  double v_dc = 1.0;
  double i_tau = 0.0;
  AlphaBeta i_s;  // filter inductor current
  AlphaBeta v;    // filter capacitor voltage
};

struct ConverterPhysicsOutputs {
  AlphaBeta v_s;      // switched ac voltage
  double i_x = 0.0;   // dc-side switching current
  double i_dc = 0.0;  // saturated source current
};

// Core device equations shared by the standalone model and the in-system
// converter: dc link, source lag, filter inductor. The filter capacitor is
// integrated by whoever owns the bus.
struct ConverterCoreDerivs {
  double d_v_dc = 0.0;
  double d_i_tau = 0.0;
  AlphaBeta d_i_s;
};

inline ConverterCoreDerivs converter_core(const ConverterParams& p, double v_dc, double i_tau,
                                          AlphaBeta i_s, AlphaBeta m, double i_dc_star,
                                          AlphaBeta v_cap, ConverterPhysicsOutputs& out) {
  out.v_s = switching_voltage(m, v_dc, p.k_sw);
  out.i_x = switching_current(m, i_s, p.k_sw);
  out.i_dc = p.dc_saturation ? saturate_dc(i_tau, p.i_dc_max) : i_tau;
  ConverterCoreDerivs d;
  d.d_v_dc = (out.i_dc - p.g_dc * v_dc - out.i_x) / p.c_dc;
  d.d_i_tau = (i_dc_star - i_tau) / p.tau_dc;
  d.d_i_s.x1 = omega_base / p.l_f * (out.v_s.x1 - p.r_f * i_s.x1 - v_cap.x1);
  d.d_i_s.x2 = omega_base / p.l_f * (out.v_s.x2 - p.r_f * i_s.x2 - v_cap.x2);
  return d;
}

struct ConverterPhysicsDerivs {
  double d_v_dc = 0.0;
  double d_i_tau = 0.0;
  AlphaBeta d_i_s;
  AlphaBeta d_v;
};

// Full open-loop derivative: modulation, dc source reference and grid-side
// current as inputs.
inline ConverterPhysicsDerivs converter_derivatives(const ConverterPhysicsState& s,
                                                    const ConverterParams& p, AlphaBeta m,
                                                    double i_dc_star, AlphaBeta i_grid,
                                                    ConverterPhysicsOutputs& out) {
  const ConverterCoreDerivs core = converter_core(p, s.v_dc, s.i_tau, s.i_s, m, i_dc_star, s.v, out);
  ConverterPhysicsDerivs d;
  d.d_v_dc = core.d_v_dc;
  d.d_i_tau = core.d_i_tau;
  d.d_i_s = core.d_i_s;
  d.d_v.x1 = omega_base / p.c_f * (s.i_s.x1 - i_grid.x1);
  d.d_v.x2 = omega_base / p.c_f * (s.i_s.x2 - i_grid.x2);
  return d;
}

// dc-link stored energy, pu-seconds.
[[nodiscard]] inline double dc_link_energy(const ConverterParams& p, double v_dc) {
  return 0.5 * p.c_dc * v_dc * v_dc;
}

// dc voltage below this fraction of nominal marks a collapsed link.
inline constexpr double dc_collapse_threshold = 0.3;

}  // namespace lowinertia
