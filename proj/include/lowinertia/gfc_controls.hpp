#pragma once

// Grid-forming converter control: four reference models (power-frequency
// droop, virtual synchronous machine, dc-voltage matching, dispatchable
// virtual oscillator), a shared ac voltage magnitude PI, cascaded voltage and
// current PI loops with feed-forward, the ac current limiter, the dc source
// reference, and the power set-point limiter.
//
// All loop quantities live in the dq frame rotating with the reference angle.
// The baseline deliberately has no anti-windup: reproducing limiter-induced
// integrator windup is part of the intended behavior. Conditional integration
// can be enabled per scenario.

#include <cmath>
#include <stdexcept>
#include <string>

#include "converter.hpp"
#include "frames.hpp"
#include "solver.hpp"

namespace lowinertia {

enum class GfcStrategy { droop, vsm, matching, dvoc };

[[nodiscard]] inline std::string to_string(GfcStrategy s) {
  switch (s) {
    case GfcStrategy::droop: return "droop";
    case GfcStrategy::vsm: return "vsm";
    case GfcStrategy::matching: return "matching";
    case GfcStrategy::dvoc: return "dvoc";
  }
  return "?";
}

struct ControlGains {
  // Cascaded-loop gains. The datasheet quotes them at converter-module level
  // (A/V for the voltage loop, V/A for the current loop, 2 ohm module base)
  // with integral action per unit of normalized time (omega_base * t); stored
  // here as per-unit per-second values so the integrators run in wall-clock
  // seconds like every other state. Both conversions are load-bearing: with
  // the raw figures read as pu the voltage loop crosses over right at the dc
  // link resonance and every converter rings up at 135 Hz, and per-second
  // integral action puts the voltage PI zero above the crossover and rings
  // the cascade at 40 Hz against any reasonable grid.
  double k_vp = 0.52 * 2.0;                    // voltage loop proportional
  double k_vi = 232.2 * 2.0 / omega_base;      // voltage loop integral, 1/s
  double k_ip = 0.73 / 2.0;                    // current loop proportional
  double k_ii = 0.0059 / 2.0 / omega_base;     // current loop integral, 1/s
  double k_dc = 1600.0;                        // dc voltage proportional gain

  // shared ac voltage magnitude PI (droop / VSM / matching excitation)
  double k_mag_p = 0.001;
  double k_mag_i = 0.5;

  double v_star = 1.0;     // ac voltage magnitude set-point
  double i_ac_max = 1.2;   // ac current limiter level
  double i_ac_th = 0.9;    // set-point limiter threshold
  double gamma_p = 2.3;    // set-point limiter slope

  bool ac_limiter = false;
  bool setpoint_limiter = false;
  bool strict_printed_p_term = false;  // current-loop P on the unlimited reference
  bool anti_windup = false;            // conditional integration of the voltage loop
  double tau_p_meas = 0.0;             // power measurement filter; 0 disables

  void validate() const {
    if (k_vp < 0 || k_vi < 0 || k_ip < 0 || k_ii < 0 || k_dc < 0 || k_mag_p < 0 || k_mag_i < 0)
      throw std::invalid_argument("control gains must be non-negative");
    if (!(i_ac_max > 0.0)) throw std::invalid_argument("i_ac_max must be positive");
    if (!(i_ac_th < i_ac_max)) throw std::invalid_argument("i_ac_th must be below i_ac_max");
    if (!(gamma_p > 0.0)) throw std::invalid_argument("gamma_p must be positive");
    if (!(v_star > 0.0)) throw std::invalid_argument("v_star must be positive");
    if (tau_p_meas < 0.0) throw std::invalid_argument("tau_p_meas must be non-negative");
  }
};

struct ReferenceGains {
  // droop: pu frequency deviation per pu power imbalance
  double d_omega = 0.001;
  // virtual synchronous machine
  double j_r = 20.0;    // pu s^2
  double d_p = 1000.0;  // pu damping
  // matching: pu frequency per pu dc voltage
  double k_theta = 1.0;
  // virtual oscillator
  double eta = 0.001;        // synchronization gain (dimensionless, pu-time form)
  double alpha = 300.0;      // magnitude attraction gain
  double kappa = 0.5 * pi;   // rotation of the current coupling

  void validate() const {
    if (!(d_omega > 0.0)) throw std::invalid_argument("d_omega must be positive");
    if (!(j_r > 0.0) || !(d_p > 0.0)) throw std::invalid_argument("j_r, d_p must be positive");
    if (!(k_theta > 0.0)) throw std::invalid_argument("k_theta must be positive");
    if (!(eta > 0.0) || !(alpha > 0.0)) throw std::invalid_argument("eta, alpha must be positive");
    if (kappa < 0.0 || kappa > 0.5 * pi) throw std::invalid_argument("kappa must lie in [0, pi/2]");
  }
};

// ---------------------------------------------------------------------------
// Loop building blocks (pure, dq frame)
// ---------------------------------------------------------------------------

// Voltage loop: capacitor-current feed-forward plus PI on the voltage error.
// Returns the stator current reference; the error doubles as the integrator
// derivative.
struct VoltageLoopOut {
  Dq i_s_ref;
  Dq x_v_dot;
};
[[nodiscard]] inline VoltageLoopOut voltage_loop(Dq v_hat, Dq v, Dq i_o, Dq x_v, double c_f,
                                                 double omega_pu, const ControlGains& g) {
  const Dq e = {v_hat.x1 - v.x1, v_hat.x2 - v.x2};
  const Dq jv = j2(v);
  VoltageLoopOut out;
  out.i_s_ref = {i_o.x1 + c_f * omega_pu * jv.x1 + g.k_vp * e.x1 + g.k_vi * x_v.x1,
                 i_o.x2 + c_f * omega_pu * jv.x2 + g.k_vp * e.x2 + g.k_vi * x_v.x2};
  out.x_v_dot = e;
  return out;
}

// Direction-preserving current reference limiter.
[[nodiscard]] inline Dq limit_ac_current(Dq i_ref, double i_ac_max) {
  const double n = i_ref.norm();
  if (n <= i_ac_max) return i_ref;
  const double gamma = i_ac_max / n;
  return {gamma * i_ref.x1, gamma * i_ref.x2};
}

// Current loop: impedance feed-forward plus PI on the current error. The
// proportional term acts on p_term_ref (the limited reference by default, the
// raw one behind the strict flag); the integrator always sees the limited
// error.
struct CurrentLoopOut {
  Dq v_s_ref;
  Dq x_i_dot;
};
[[nodiscard]] inline CurrentLoopOut current_loop(Dq i_ref_limited, Dq p_term_ref, Dq i_s, Dq v,
                                                 Dq x_i, double r_f, double l_f, double omega_pu,
                                                 const ControlGains& g) {
  const Dq ji = j2(i_s);
  CurrentLoopOut out;
  out.v_s_ref = {v.x1 + r_f * i_s.x1 + l_f * omega_pu * ji.x1 + g.k_ip * (p_term_ref.x1 - i_s.x1) +
                     g.k_ii * x_i.x1,
                 v.x2 + r_f * i_s.x2 + l_f * omega_pu * ji.x2 + g.k_ip * (p_term_ref.x2 - i_s.x2) +
                     g.k_ii * x_i.x2};
  out.x_i_dot = {i_ref_limited.x1 - i_s.x1, i_ref_limited.x2 - i_s.x2};
  return out;
}

// Modulation vector from the ac voltage reference. Divides by the constant
// nominal dc voltage: when the actual dc voltage sags, the realized ac
// voltage sags with it while the demanded modulation keeps growing, so the
// mismatch stays observable instead of being hidden by compensation.
[[nodiscard]] inline AlphaBeta modulation(AlphaBeta v_s_ref, double v_dc_star, double k_sw) {
  const double s = 1.0 / (k_sw * v_dc_star);
  return {s * v_s_ref.x1, s * v_s_ref.x2};
}

// dc source current reference: proportional dc-voltage control, power
// feed-forward, loss compensation, and the switch/ac power mismatch term.
[[nodiscard]] inline double dc_current_reference(double v_dc, double p_star, double p, double i_x,
                                                 double k_dc, double g_dc, double v_dc_star) {
  return k_dc * (v_dc_star - v_dc) + p_star / v_dc_star + g_dc * v_dc +
         (v_dc * i_x - p) / v_dc_star;
}

// Shared ac voltage magnitude PI.
struct MagnitudePiOut {
  double command = 0.0;
  double x_dot = 0.0;
};
[[nodiscard]] inline MagnitudePiOut voltage_magnitude_pi(double v_star, double v_norm, double x,
                                                         const ControlGains& g) {
  const double e = v_star - v_norm;
  return {g.k_mag_p * e + g.k_mag_i * x, e};
}

// Power set-point limiter: backs the set-point off once the filter current
// exceeds the threshold.
[[nodiscard]] inline double power_setpoint_limiter(double i_s_norm, double i_ac_th, double gamma_p) {
  return i_s_norm <= i_ac_th ? 0.0 : gamma_p * (i_s_norm - i_ac_th);
}

// Virtual oscillator vector field (stationary frame, pu time).
[[nodiscard]] inline AlphaBeta dvoc_derivative(AlphaBeta v_hat, AlphaBeta i, double p_star,
                                               double q_star, double v_star,
                                               const ReferenceGains& rg) {
  const double n2 = v_hat.norm_sq();
  if (!(n2 > 1e-18))
    throw std::domain_error("virtual oscillator voltage collapsed to the origin");
  const double inv_vs2 = 1.0 / (v_star * v_star);
  // K v = (1/v*^2) R(kappa) [[p*, q*], [-q*, p*]] v
  const double kv1 = inv_vs2 * (p_star * v_hat.x1 + q_star * v_hat.x2);
  const double kv2 = inv_vs2 * (-q_star * v_hat.x1 + p_star * v_hat.x2);
  const Rotation2 rk = Rotation2::from_angle(rg.kappa);
  const AlphaBeta rkv = {rk.c * kv1 - rk.s * kv2, rk.s * kv1 + rk.c * kv2};
  const AlphaBeta ri = {rk.c * i.x1 - rk.s * i.x2, rk.s * i.x1 + rk.c * i.x2};
  const double phi = rg.alpha * inv_vs2 * (v_star * v_star - n2);
  return {omega_base * (-v_hat.x2 + rg.eta * (rkv.x1 - ri.x1 + phi * v_hat.x1)),
          omega_base * (v_hat.x1 + rg.eta * (rkv.x2 - ri.x2 + phi * v_hat.x2))};
}

// Instantaneous rotation speed of the oscillator vector, pu.
[[nodiscard]] inline double dvoc_frequency(AlphaBeta v_hat, AlphaBeta v_hat_dot) {
  const double n2 = v_hat.norm_sq();
  if (!(n2 > 1e-18))
    throw std::domain_error("virtual oscillator voltage collapsed to the origin");
  return (v_hat.x1 * v_hat_dot.x2 - v_hat.x2 * v_hat_dot.x1) / (n2 * omega_base);
}

// Gain translations that put every strategy on the same steady-state
// frequency/power droop slope as a machine governor gain d_p (pu power per
// pu frequency): droop d_omega = 1/d_p, virtual machine damping D = d_p,
// matching k_dc = d_p k_theta / v_dc_star, oscillator eta = v_star^2 / d_p.
inline void match_droop_slope(GfcStrategy s, double d_p_sm, ReferenceGains& rg, ControlGains& cg,
                              const ConverterParams& cp) {
  switch (s) {
    case GfcStrategy::droop:
      rg.d_omega = 1.0 / d_p_sm;
      break;
    case GfcStrategy::vsm:
      rg.j_r = 0.02 * d_p_sm;  // keep the recommended inertia/damping ratio
      rg.d_p = d_p_sm;
      break;
    case GfcStrategy::matching:
      cg.k_dc = d_p_sm * rg.k_theta / cp.v_dc_star;
      break;
    case GfcStrategy::dvoc:
      rg.eta = cg.v_star * cg.v_star / d_p_sm;
      break;
  }
}

// ---------------------------------------------------------------------------
// Composed per-unit converter device
// ---------------------------------------------------------------------------

struct GfcDiagnostics {
  double omega_pu = 1.0;   // reference model frequency
  double p = 0.0;          // measured output power (raw)
  double q = 0.0;
  double delta_p_star = 0.0;
  double i_dc_star = 0.0;
  double i_dc = 0.0;       // saturated source current
  double i_tau = 0.0;
  double v_dc = 1.0;
  double m_norm = 0.0;     // demanded modulation depth
  double i_s_norm = 0.0;
  bool ac_limited = false;
  bool dc_limited = false;
};

class ConverterModel {
 public:
  ConverterModel(GfcStrategy strategy, const ConverterParams& cp, const ControlGains& cg,
                 const ReferenceGains& rg)
      : strategy_(strategy), cp_(cp), cg_(cg), rg_(rg) {
    cp.validate();
    cg.validate();
    rg.validate();
  }

  void register_states(StateRegistry& reg, const std::string& prefix) {
    if (strategy_ == GfcStrategy::dvoc) {
      idx_vhat_ = reg.add_pair(prefix + ".vhat");
    } else {
      idx_theta_ = reg.add_angle(prefix + ".theta");
      if (strategy_ == GfcStrategy::vsm) idx_omega_ = reg.add_scalar(prefix + ".omega");
      idx_mpi_ = reg.add_scalar(prefix + ".mag_pi");
    }
    idx_xv_ = reg.add_scalar(prefix + ".xv_d");
    reg.add_scalar(prefix + ".xv_q");
    idx_xi_ = reg.add_scalar(prefix + ".xi_d");
    reg.add_scalar(prefix + ".xi_q");
    idx_vdc_ = reg.add_scalar(prefix + ".v_dc");
    idx_itau_ = reg.add_scalar(prefix + ".i_tau");
    idx_is_ = reg.add_pair(prefix + ".i_s");
    idx_pf_ = reg.add_scalar(prefix + ".p_meas");
  }

  [[nodiscard]] GfcStrategy strategy() const { return strategy_; }
  [[nodiscard]] const ConverterParams& converter_params() const { return cp_; }
  [[nodiscard]] const ControlGains& gains() const { return cg_; }
  [[nodiscard]] const ReferenceGains& reference_gains() const { return rg_; }

  void set_p_star(double p) { p_star_ = p; }
  [[nodiscard]] double p_star() const { return p_star_; }
  void set_q_star(double q) { q_star_ = q; }
  [[nodiscard]] double q_star() const { return q_star_; }

  [[nodiscard]] double v_dc(const double* x) const { return x[idx_vdc_]; }
  [[nodiscard]] double i_tau(const double* x) const { return x[idx_itau_]; }
  [[nodiscard]] AlphaBeta i_s(const double* x) const { return {x[idx_is_], x[idx_is_ + 1]}; }

  // Derivative evaluation. v_lv: filter-bus voltage; i_o: measured grid-side
  // (transformer) current. Returns the filter current injection at the bus.
  AlphaBeta rhs(const double* x, double* dx, AlphaBeta v_lv, AlphaBeta i_o,
                GfcDiagnostics* diag = nullptr) const {
    const AlphaBeta i_s_ab = {x[idx_is_], x[idx_is_ + 1]};
    const double v_dc = x[idx_vdc_];
    const double i_tau = x[idx_itau_];

    // measured power (grid side), optionally filtered
    const PowerPq s_meas = instantaneous_power(v_lv, i_o);
    double p_used = s_meas.p;
    if (cg_.tau_p_meas > 0.0) {
      p_used = x[idx_pf_];
      dx[idx_pf_] = (s_meas.p - x[idx_pf_]) / cg_.tau_p_meas;
    } else {
      dx[idx_pf_] = 0.0;
    }

    // set-point limiter on the filter current magnitude
    const double i_s_norm = i_s_ab.norm();
    const double dps =
        cg_.setpoint_limiter ? power_setpoint_limiter(i_s_norm, cg_.i_ac_th, cg_.gamma_p) : 0.0;
    const double p_star_eff = p_star_ - dps;

    // reference model: frame angle, frame speed, voltage reference magnitude
    double frame_angle = 0.0;
    double omega_pu = 1.0;
    double v_hat_d = cg_.v_star;
    switch (strategy_) {
      case GfcStrategy::droop: {
        omega_pu = 1.0 + rg_.d_omega * (p_star_eff - p_used);
        dx[idx_theta_] = omega_pu * omega_base;
        frame_angle = x[idx_theta_];
        const auto mag = voltage_magnitude_pi(cg_.v_star, v_lv.norm(), x[idx_mpi_], cg_);
        dx[idx_mpi_] = mag.x_dot;
        v_hat_d = mag.command;
        break;
      }
      case GfcStrategy::vsm: {
        omega_pu = x[idx_omega_];
        dx[idx_omega_] = ((p_star_eff - p_used) + rg_.d_p * (1.0 - omega_pu)) / rg_.j_r;
        dx[idx_theta_] = omega_pu * omega_base;
        frame_angle = x[idx_theta_];
        const auto mag = voltage_magnitude_pi(cg_.v_star, v_lv.norm(), x[idx_mpi_], cg_);
        dx[idx_mpi_] = mag.x_dot;
        v_hat_d = omega_pu * mag.command;  // speed-scaled excitation
        break;
      }
      case GfcStrategy::matching: {
        omega_pu = rg_.k_theta * v_dc;
        dx[idx_theta_] = omega_pu * omega_base;
        frame_angle = x[idx_theta_];
        const auto mag = voltage_magnitude_pi(cg_.v_star, v_lv.norm(), x[idx_mpi_], cg_);
        dx[idx_mpi_] = mag.x_dot;
        v_hat_d = mag.command;
        break;
      }
      case GfcStrategy::dvoc: {
        const AlphaBeta v_hat = {x[idx_vhat_], x[idx_vhat_ + 1]};
        const AlphaBeta v_hat_dot =
            dvoc_derivative(v_hat, i_o, p_star_eff, q_star_, cg_.v_star, rg_);
        dx[idx_vhat_] = v_hat_dot.x1;
        dx[idx_vhat_ + 1] = v_hat_dot.x2;
        omega_pu = dvoc_frequency(v_hat, v_hat_dot);
        frame_angle = std::atan2(v_hat.x2, v_hat.x1);
        v_hat_d = v_hat.norm();
        break;
      }
    }

    // cascaded loops in the reference frame
    const Rotation2 rot = Rotation2::from_angle(frame_angle);
    const Dq v_dq = park(v_lv, rot);
    const Dq i_o_dq = park(i_o, rot);
    const Dq i_s_dq = park(i_s_ab, rot);
    const Dq v_hat_dq = {v_hat_d, 0.0};
    const Dq x_v = {x[idx_xv_], x[idx_xv_ + 1]};
    const Dq x_i = {x[idx_xi_], x[idx_xi_ + 1]};

    const auto vl = voltage_loop(v_hat_dq, v_dq, i_o_dq, x_v, cp_.c_f, omega_pu, cg_);
    Dq i_ref = vl.i_s_ref;
    bool ac_limited = false;
    if (cg_.ac_limiter) {
      const Dq lim = limit_ac_current(i_ref, cg_.i_ac_max);
      ac_limited = (lim.x1 != i_ref.x1) || (lim.x2 != i_ref.x2);
      i_ref = lim;
    }
    const Dq p_term_ref = cg_.strict_printed_p_term ? vl.i_s_ref : i_ref;

    if (cg_.anti_windup && ac_limited) {
      dx[idx_xv_] = 0.0;
      dx[idx_xv_ + 1] = 0.0;
    } else {
      dx[idx_xv_] = vl.x_v_dot.x1;
      dx[idx_xv_ + 1] = vl.x_v_dot.x2;
    }

    const auto cl = current_loop(i_ref, p_term_ref, i_s_dq, v_dq, x_i, cp_.r_f, cp_.l_f, omega_pu, cg_);
    dx[idx_xi_] = cl.x_i_dot.x1;
    dx[idx_xi_ + 1] = cl.x_i_dot.x2;

    const AlphaBeta v_s_ref_ab = inverse_park(cl.v_s_ref, rot);
    const AlphaBeta m = modulation(v_s_ref_ab, cp_.v_dc_star, cp_.k_sw);

    // dc side
    const double i_x = switching_current(m, i_s_ab, cp_.k_sw);
    const double i_dc_star =
        dc_current_reference(v_dc, p_star_eff, p_used, i_x, cg_.k_dc, cp_.g_dc, cp_.v_dc_star);

    ConverterPhysicsOutputs pk;
    const ConverterCoreDerivs core =
        converter_core(cp_, v_dc, i_tau, i_s_ab, m, i_dc_star, v_lv, pk);
    dx[idx_vdc_] = core.d_v_dc;
    dx[idx_itau_] = core.d_i_tau;
    dx[idx_is_] = core.d_i_s.x1;
    dx[idx_is_ + 1] = core.d_i_s.x2;

    if (diag) {
      diag->omega_pu = omega_pu;
      diag->p = s_meas.p;
      diag->q = s_meas.q;
      diag->delta_p_star = dps;
      diag->i_dc_star = i_dc_star;
      diag->i_dc = pk.i_dc;
      diag->i_tau = i_tau;
      diag->v_dc = v_dc;
      diag->m_norm = m.norm();
      diag->i_s_norm = i_s_norm;
      diag->ac_limited = ac_limited;
      diag->dc_limited = std::abs(i_tau) > cp_.i_dc_max;
    }
    return i_s_ab;
  }

  // Steady-state backsolve from a network phasor solution at synchronous
  // speed w: filter-bus voltage v, filter current i_s, grid-side current i_o
  // (all alpha-beta phasors at t = 0). Writes this converter's state slice.
  void initialize(double* x, AlphaBeta v, AlphaBeta i_s0, AlphaBeta i_o, double w) {
    const double p0 = instantaneous_power(v, i_o).p;

    // an operating point above the set-point limiter threshold holds the
    // backed-off set-point in steady state
    const double dps = cg_.setpoint_limiter
                           ? power_setpoint_limiter(i_s0.norm(), cg_.i_ac_th, cg_.gamma_p)
                           : 0.0;
    const double p_star_eff = p_star_ - dps;

    // switch-side voltage and power at speed w
    const AlphaBeta ji = j2(i_s0);
    const AlphaBeta v_s = {v.x1 + cp_.r_f * i_s0.x1 + w * cp_.l_f * ji.x1,
                           v.x2 + cp_.r_f * i_s0.x2 + w * cp_.l_f * ji.x2};
    const double p_sw = v_s.x1 * i_s0.x1 + v_s.x2 * i_s0.x2;

    // dc operating point: matching locks it to the frame speed, the others
    // settle where the source reference balances
    double v_dc0;
    if (strategy_ == GfcStrategy::matching) {
      v_dc0 = w * cp_.v_dc_star / rg_.k_theta;
    } else {
      v_dc0 = cp_.v_dc_star;
      for (int pass = 0; pass < 4; ++pass) {
        const double i_x = p_sw / v_dc0;
        v_dc0 = cp_.v_dc_star - (p0 - p_star_eff) / (cg_.k_dc - i_x);
      }
    }
    const double i_x0 = p_sw / v_dc0;
    x[idx_vdc_] = v_dc0;
    x[idx_itau_] = cp_.g_dc * v_dc0 + i_x0;
    x[idx_is_] = i_s0.x1;
    x[idx_is_ + 1] = i_s0.x2;

    // frame aligned with the bus voltage (zero steady voltage-loop error)
    const double theta0 = std::atan2(v.x2, v.x1);
    const double v_norm = v.norm();
    if (strategy_ == GfcStrategy::dvoc) {
      x[idx_vhat_] = v.x1;
      x[idx_vhat_ + 1] = v.x2;
    } else {
      x[idx_theta_] = theta0;
      if (strategy_ == GfcStrategy::vsm) x[idx_omega_] = w;
      // magnitude PI integrator carries the full command
      const double e = cg_.v_star - v_norm;
      const double cmd = strategy_ == GfcStrategy::vsm ? v_norm / w : v_norm;
      x[idx_mpi_] = (cmd - cg_.k_mag_p * e) / cg_.k_mag_i;
    }

    // voltage loop integrator carries the part of the filter current the
    // feed-forward cannot see (shunt draw at the filter bus, e.g. transformer
    // magnetizing current); with the reference equal to the actual current the
    // loop sits still
    const Rotation2 rot = Rotation2::from_angle(theta0);
    const Dq i_s_dq = park(i_s0, rot);
    const Dq i_o_dq = park(i_o, rot);
    const Dq jv_dq = j2(park(v, rot));
    x[idx_xv_] = 0.0;
    x[idx_xv_ + 1] = 0.0;
    if (cg_.k_vi > 0.0) {
      x[idx_xv_] = (i_s_dq.x1 - i_o_dq.x1 - cp_.c_f * w * jv_dq.x1) / cg_.k_vi;
      x[idx_xv_ + 1] = (i_s_dq.x2 - i_o_dq.x2 - cp_.c_f * w * jv_dq.x2) / cg_.k_vi;
    }

    // current loop integrator absorbs the modulation scaling error caused by
    // the off-nominal dc voltage
    const Dq v_s_dq = park(v_s, rot);
    const double scale = cp_.v_dc_star / v_dc0;  // required v_s_ref = v_s * scale
    const Dq mismatch = {v_s_dq.x1 * (scale - 1.0), v_s_dq.x2 * (scale - 1.0)};
    x[idx_xi_] = mismatch.x1 / cg_.k_ii;
    x[idx_xi_ + 1] = mismatch.x2 / cg_.k_ii;

    x[idx_pf_] = p0;
  }

 private:
  GfcStrategy strategy_;
  ConverterParams cp_;
  ControlGains cg_;
  ReferenceGains rg_;
  double p_star_ = 0.0, q_star_ = 0.0;
  int idx_theta_ = -1, idx_omega_ = -1, idx_vhat_ = -1, idx_mpi_ = -1;
  int idx_xv_ = -1, idx_xi_ = -1, idx_vdc_ = -1, idx_itau_ = -1, idx_is_ = -1, idx_pf_ = -1;
};

}  // namespace lowinertia
