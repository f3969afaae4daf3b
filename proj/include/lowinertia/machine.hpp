#pragma once

// Synchronous machine: 8th-order electromechanical model (stator dq fluxes,
// field winding, three damper windings, rotor angle and speed) plus a static
// exciter with voltage transducer, a speed-input stabilizer, and a
// proportional governor driving a first-order turbine.
//
// Conventions: per unit on the system base, time in seconds. Stator currents
// are motor-referenced internally; the network injection and the torque are
// reported generator-referenced. The rotor d-axis sits at electrical angle
// theta in the stationary frame and the speed-voltage term uses the
// instantaneous speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "frames.hpp"
#include "solver.hpp"

namespace lowinertia {

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat3 invert3(const Mat3& m) {
  const double a = m[0][0], b = m[0][1], c = m[0][2];
  const double d = m[1][0], e = m[1][1], f = m[1][2];
  const double g = m[2][0], h = m[2][1], i = m[2][2];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  if (!(std::abs(det) > 1e-12)) throw std::invalid_argument("singular inductance matrix");
  const double s = 1.0 / det;
  return {{{s * (e * i - f * h), s * (c * h - b * i), s * (b * f - c * e)},
           {s * (f * g - d * i), s * (a * i - c * g), s * (c * d - a * f)},
           {s * (d * h - e * g), s * (b * g - a * h), s * (a * e - b * d)}}};
}

inline Mat2 invert2(const Mat2& m) {
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (!(std::abs(det) > 1e-12)) throw std::invalid_argument("singular inductance matrix");
  const double s = 1.0 / det;
  return {{{s * m[1][1], -s * m[0][1]}, {-s * m[1][0], s * m[0][0]}}};
}

}  // namespace detail

struct MachineParams {
  // electrical, pu
  double r_s = 0.003;
  double l_s = 0.16;      // stator leakage
  double l_md = 1.65;     // d-axis mutual
  double l_mq = 1.60;     // q-axis mutual
  double r_fd = 0.0006;
  double l_fd = 0.165;    // field leakage
  double r_1d = 0.0284;
  double l_1d = 0.1713;
  double r_1q = 0.00619;
  double l_1q = 0.7252;
  double r_2q = 0.02368;
  double l_2q = 0.125;

  // mechanical
  double h = 3.7;    // inertia constant, s
  double d_f = 0.0;  // friction torque coefficient, pu

  // governor / turbine
  double d_p = 100.0;  // speed droop gain, pu power per pu speed
  double tau_g = 5.0;  // turbine time constant, s

  // exciter (static, field voltage proportional to regulator output)
  double k_a = 200.0;
  double tau_r = 0.02;    // voltage transducer, s
  double e_fd_max = 6.0;  // symmetric field limits

  // stabilizer: gain, washout, two identical lead stages, output clamp
  double k_pss = 10.0;
  double t_w = 2.0;
  double t_lead = 0.08;
  double t_lag = 0.02;
  double v_pss_max = 0.1;

  bool dampers_enabled = true;
  bool exciter_enabled = true;  // false: field voltage frozen at its initial value
  bool pss_enabled = true;

  [[nodiscard]] double l_d() const { return l_s + l_md; }
  [[nodiscard]] double l_q() const { return l_s + l_mq; }

  void validate() const {
    auto pos = [](double v, const char* what) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("machine: ") + what + " must be positive");
    };
    pos(h, "H");
    pos(tau_g, "tau_g");
    pos(l_s, "l_s");
    pos(l_md, "l_md");
    pos(l_mq, "l_mq");
    // the inductance matrices must be positive definite; leading principal
    // minors suffice for these symmetric matrices
    const double m2d = l_d() * (l_fd + l_md) - l_md * l_md;
    if (!(m2d > 0.0)) throw std::invalid_argument("machine: d-axis inductance matrix not SPD");
    const double m2q = l_q() * (l_1q + l_mq) - l_mq * l_mq;
    if (!(m2q > 0.0)) throw std::invalid_argument("machine: q-axis inductance matrix not SPD");
  }

  // Standard round-rotor lumped-parameter set on the 100 MVA system base,
  // as used in textbook example calculations for a large steam unit.
  [[nodiscard]] static MachineParams round_rotor_100mva() { return {}; }
};

// Torques and recovered currents for one evaluation point.
struct MachineOutputs {
  Dq i_motor;      // stator current, motor sign
  double i_fd = 0.0, i_1d = 0.0, i_1q = 0.0, i_2q = 0.0;
  double t_e = 0.0;    // electrical torque, generator sign
  double t_m = 0.0;    // mechanical torque from turbine power
  double e_fd = 0.0;   // exciter output (field voltage on the normalized scale)
  double v_pss = 0.0;
};

class MachineModel {
 public:
  // state slots, relative to base index
  enum Slot {
    s_theta = 0,
    s_omega,   // pu speed
    s_psi_d,
    s_psi_q,
    s_psi_fd,
    s_psi_1d,
    s_psi_1q,
    s_psi_2q,
    s_p_tau,
    s_v_m,     // transducer output
    s_pss_w,   // washout state
    s_pss_1,
    s_pss_2,
    n_states
  };

  explicit MachineModel(const MachineParams& p) : p_(p) {
    p.validate();
    const detail::Mat3 md = {{{p.l_d(), p.l_md, p.l_md},
                              {p.l_md, p.l_fd + p.l_md, p.l_md},
                              {p.l_md, p.l_md, p.l_1d + p.l_md}}};
    const detail::Mat3 mq = {{{p.l_q(), p.l_mq, p.l_mq},
                              {p.l_mq, p.l_1q + p.l_mq, p.l_mq},
                              {p.l_mq, p.l_mq, p.l_2q + p.l_mq}}};
    md_inv_ = detail::invert3(md);
    mq_inv_ = detail::invert3(mq);
    const detail::Mat2 md2 = {{{p.l_d(), p.l_md}, {p.l_md, p.l_fd + p.l_md}}};
    md2_inv_ = detail::invert2(md2);
  }

  void register_states(StateRegistry& reg, const std::string& prefix) {
    base_ = reg.add_angle(prefix + ".theta");
    reg.add_scalar(prefix + ".omega");
    reg.add_scalar(prefix + ".psi_d");
    reg.add_scalar(prefix + ".psi_q");
    reg.add_scalar(prefix + ".psi_fd");
    reg.add_scalar(prefix + ".psi_1d");
    reg.add_scalar(prefix + ".psi_1q");
    reg.add_scalar(prefix + ".psi_2q");
    reg.add_scalar(prefix + ".p_tau");
    reg.add_scalar(prefix + ".v_m");
    reg.add_scalar(prefix + ".pss_w");
    reg.add_scalar(prefix + ".pss_1");
    reg.add_scalar(prefix + ".pss_2");
  }

  [[nodiscard]] int base() const { return base_; }
  [[nodiscard]] const MachineParams& params() const { return p_; }

  void set_p_star(double p) { p_star_ = p; }
  [[nodiscard]] double p_star() const { return p_star_; }
  void set_v_ref(double v) { v_ref_ = v; }
  [[nodiscard]] double v_ref() const { return v_ref_; }
  void set_e_fd_frozen(double e) { e_fd_frozen_ = e; }

  // Currents recovered from the flux slice of the state (motor sign).
  [[nodiscard]] MachineOutputs outputs(const double* x) const {
    MachineOutputs o;
    const double* s = x + base_;
    if (p_.dampers_enabled) {
      const double fd[3] = {s[s_psi_d], s[s_psi_fd], s[s_psi_1d]};
      const double fq[3] = {s[s_psi_q], s[s_psi_1q], s[s_psi_2q]};
      o.i_motor.x1 = md_inv_[0][0] * fd[0] + md_inv_[0][1] * fd[1] + md_inv_[0][2] * fd[2];
      o.i_fd = md_inv_[1][0] * fd[0] + md_inv_[1][1] * fd[1] + md_inv_[1][2] * fd[2];
      o.i_1d = md_inv_[2][0] * fd[0] + md_inv_[2][1] * fd[1] + md_inv_[2][2] * fd[2];
      o.i_motor.x2 = mq_inv_[0][0] * fq[0] + mq_inv_[0][1] * fq[1] + mq_inv_[0][2] * fq[2];
      o.i_1q = mq_inv_[1][0] * fq[0] + mq_inv_[1][1] * fq[1] + mq_inv_[1][2] * fq[2];
      o.i_2q = mq_inv_[2][0] * fq[0] + mq_inv_[2][1] * fq[1] + mq_inv_[2][2] * fq[2];
    } else {
      // damper windings open: field/stator pair on the d-axis, bare stator
      // inductance on the q-axis
      o.i_motor.x1 = md2_inv_[0][0] * s[s_psi_d] + md2_inv_[0][1] * s[s_psi_fd];
      o.i_fd = md2_inv_[1][0] * s[s_psi_d] + md2_inv_[1][1] * s[s_psi_fd];
      o.i_motor.x2 = s[s_psi_q] / p_.l_q();
    }
    o.t_e = -(s[s_psi_d] * o.i_motor.x2 - s[s_psi_q] * o.i_motor.x1);
    o.t_m = s[s_p_tau] / s[s_omega];
    return o;
  }

  // Fluxes from motor-sign currents (inverse of the recovery above).
  [[nodiscard]] std::array<double, 6> fluxes_from_currents(Dq i_motor, double i_fd, double i_1d,
                                                           double i_1q, double i_2q) const {
    const double psi_d = p_.l_d() * i_motor.x1 + p_.l_md * (i_fd + i_1d);
    const double psi_fd = p_.l_md * i_motor.x1 + (p_.l_fd + p_.l_md) * i_fd + p_.l_md * i_1d;
    const double psi_1d = p_.l_md * (i_motor.x1 + i_fd) + (p_.l_1d + p_.l_md) * i_1d;
    const double psi_q = p_.l_q() * i_motor.x2 + p_.l_mq * (i_1q + i_2q);
    const double psi_1q = p_.l_mq * i_motor.x2 + (p_.l_1q + p_.l_mq) * i_1q + p_.l_mq * i_2q;
    const double psi_2q = p_.l_mq * (i_motor.x2 + i_1q) + (p_.l_2q + p_.l_mq) * i_2q;
    return {psi_d, psi_q, psi_fd, psi_1d, psi_1q, psi_2q};
  }

  // Core derivative evaluation in the rotor frame. Returns the outputs so
  // callers can reuse currents/torques without recomputing.
  MachineOutputs dq_derivatives(const double* x, double* dx, Dq v) const {
    const double* s = x + base_;
    double* d = dx + base_;
    MachineOutputs o = outputs(x);
    const double w = s[s_omega];

    d[s_theta] = w * omega_base;
    d[s_omega] = (o.t_m - o.t_e - p_.d_f * w) / (2.0 * p_.h);
    d[s_psi_d] = omega_base * (v.x1 - p_.r_s * o.i_motor.x1 + w * s[s_psi_q]);
    d[s_psi_q] = omega_base * (v.x2 - p_.r_s * o.i_motor.x2 - w * s[s_psi_d]);

    // excitation path
    const double v_t = v.norm();  // rotor-frame magnitude equals terminal magnitude
    d[s_v_m] = (v_t - s[s_v_m]) / p_.tau_r;
    double v_pss = 0.0;
    if (p_.pss_enabled) {
      const double u = p_.k_pss * (w - 1.0);
      d[s_pss_w] = (u - s[s_pss_w]) / p_.t_w;
      const double y_w = u - s[s_pss_w];
      const double hf = p_.t_lead / p_.t_lag;
      d[s_pss_1] = (y_w - s[s_pss_1]) / p_.t_lag;
      const double y_1 = s[s_pss_1] * (1.0 - hf) + y_w * hf;
      d[s_pss_2] = (y_1 - s[s_pss_2]) / p_.t_lag;
      const double y_2 = s[s_pss_2] * (1.0 - hf) + y_1 * hf;
      v_pss = std::clamp(y_2, -p_.v_pss_max, p_.v_pss_max);
    } else {
      d[s_pss_w] = 0.0;
      d[s_pss_1] = 0.0;
      d[s_pss_2] = 0.0;
    }
    double e_fd = e_fd_frozen_;
    if (p_.exciter_enabled)
      e_fd = std::clamp(p_.k_a * (v_ref_ - s[s_v_m] + v_pss), -p_.e_fd_max, p_.e_fd_max);
    o.e_fd = e_fd;
    o.v_pss = v_pss;
    const double v_fd = p_.r_fd / p_.l_md * e_fd;

    if (p_.dampers_enabled) {
      d[s_psi_fd] = omega_base * (v_fd - p_.r_fd * o.i_fd);
      d[s_psi_1d] = -omega_base * p_.r_1d * o.i_1d;
      d[s_psi_1q] = -omega_base * p_.r_1q * o.i_1q;
      d[s_psi_2q] = -omega_base * p_.r_2q * o.i_2q;
    } else {
      d[s_psi_fd] = omega_base * (v_fd - p_.r_fd * o.i_fd);
      d[s_psi_1d] = 0.0;
      d[s_psi_1q] = 0.0;
      d[s_psi_2q] = 0.0;
    }

    // governor and turbine
    const double p_gov = p_star_ + p_.d_p * (1.0 - w);
    d[s_p_tau] = (p_gov - s[s_p_tau]) / p_.tau_g;
    return o;
  }

  // Stationary-frame wrapper: parks the bus voltage into the rotor frame,
  // evaluates the derivatives, and returns the generator current injection.
  AlphaBeta rhs(const double* x, double* dx, AlphaBeta v_bus) const {
    const Rotation2 rot = Rotation2::from_angle(x[base_ + s_theta]);
    const MachineOutputs o = dq_derivatives(x, dx, park(v_bus, rot));
    return inverse_park(Dq{-o.i_motor.x1, -o.i_motor.x2}, rot);
  }

  [[nodiscard]] double omega_pu(const double* x) const { return x[base_ + s_omega]; }
  [[nodiscard]] double theta(const double* x) const { return x[base_ + s_theta]; }

  // Steady-state backsolve from a network phasor solution: terminal voltage
  // phasor v, generator current phasor i (both as alpha-beta at t = 0), and
  // the synchronous speed w (pu). Writes this machine's state slice and
  // captures the matching regulator references.
  void initialize(double* x, AlphaBeta v, AlphaBeta i_gen, double w) {
    double* s = x + base_;
    // the internal emf behind r_s + j w L_q fixes the rotor axis
    const AlphaBeta e = {v.x1 + p_.r_s * i_gen.x1 - w * p_.l_q() * i_gen.x2,
                         v.x2 + p_.r_s * i_gen.x2 + w * p_.l_q() * i_gen.x1};
    const double theta0 = std::atan2(e.x2, e.x1) - 0.5 * pi;
    const Rotation2 rot = Rotation2::from_angle(theta0);
    const Dq vdq = park(v, rot);
    const Dq ig = park(i_gen, rot);
    const Dq im = {-ig.x1, -ig.x2};

    // stator flux from the steady stator equations at speed w
    const double psi_q = -(vdq.x1 - p_.r_s * im.x1) / w;
    const double psi_d = (vdq.x2 - p_.r_s * im.x2) / w;
    const double i_fd = (psi_d - p_.l_d() * im.x1) / p_.l_md;

    s[s_theta] = theta0;
    s[s_omega] = w;
    s[s_psi_d] = psi_d;
    s[s_psi_q] = psi_q;
    s[s_psi_fd] = (p_.l_fd + p_.l_md) * i_fd + p_.l_md * im.x1;
    s[s_psi_1d] = p_.l_md * (im.x1 + i_fd);
    s[s_psi_1q] = p_.l_mq * im.x2;
    s[s_psi_2q] = p_.l_mq * im.x2;

    const double t_e = -(psi_d * im.x2 - psi_q * im.x1);
    s[s_p_tau] = w * t_e + p_.d_f * w * w;

    const double e_fd0 = p_.l_md * i_fd;
    s[s_v_m] = v.norm();
    v_ref_ = v.norm() + e_fd0 / p_.k_a;
    e_fd_frozen_ = e_fd0;
    const double u0 = p_.k_pss * (w - 1.0);
    s[s_pss_w] = u0;  // washout settled: zero stabilizer output
    s[s_pss_1] = 0.0;
    s[s_pss_2] = 0.0;
  }

 private:
  MachineParams p_;
  detail::Mat3 md_inv_{}, mq_inv_{};
  detail::Mat2 md2_inv_{};
  int base_ = -1;
  double p_star_ = 0.0;
  double v_ref_ = 1.0;
  double e_fd_frozen_ = 0.0;
};

}  // namespace lowinertia
