#pragma once

// Reduced-order frequency models: the per-device angle/frequency
// abstractions, the two-node machine-vs-converter model used for the
// inertia interpolation study, the one-state dc-link voltage model, and
// the gain-equivalence calculator that makes all four converter control
// families share load equally in steady state.
//
// Everything here is deliberately tiny and closed-form-checkable; these
// models exist to explain the full simulations, not to replace them.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <lowinertia/metrics.hpp>

namespace lowinertia {

// ---------------------------------------------------------------------------
// Per-device reduced models
// ---------------------------------------------------------------------------

// A grid-forming device collapses to one of two frequency behaviors:
// droop-like (first-order angle, frequency proportional to power) or
// swing-like (inertia + optionally lagged and saturated turbine power).
struct ReducedDevice {
  enum class Kind { droop_like, swing_like };
  Kind kind = Kind::droop_like;

  double d_omega = 0.001;  // droop-like: pu frequency per pu power

  double h = 3.7;    // swing-like: inertia constant, s
  double d = 0.0;    // swing-like: frequency damping, pu
  double tau = 5.0;  // turbine lag, s; 0 selects the algebraic turbine
  double d_p = 100.0;
  double p_max = std::numeric_limits<double>::infinity();

  // State layout: droop-like [theta]; swing-like [theta, omega, p_tau]
  // (p_tau is carried even for tau = 0, where it is algebraic).
  [[nodiscard]] int n_states() const { return kind == Kind::droop_like ? 1 : 3; }
};

[[nodiscard]] inline double saturate(double x, double limit) {
  if (x > limit) return limit;
  if (x < -limit) return -limit;
  return x;
}

// Frequency deviations in pu, power imbalance p in pu.
inline void reduced_device_derivatives(const ReducedDevice& dev, double p, const double* x,
                                       double* dx) {
  if (dev.kind == ReducedDevice::Kind::droop_like) {
    dx[0] = -dev.d_omega * p;
    return;
  }
  const double omega = x[1];
  const double p_t = dev.tau > 0.0 ? x[2] : -dev.d_p * omega;
  dx[0] = omega;
  dx[1] = (-dev.d * omega + saturate(p_t, dev.p_max) - p) / (2.0 * dev.h);
  dx[2] = dev.tau > 0.0 ? (-p_t - dev.d_p * omega) / dev.tau : 0.0;
}

// A virtual synchronous machine has rotor emulation but no turbine lag.
[[nodiscard]] inline ReducedDevice vsm_reduced(double j_r, double d_p, double w_star = 1.0) {
  ReducedDevice d;
  d.kind = ReducedDevice::Kind::swing_like;
  d.h = 0.5 * j_r * w_star;
  d.d = d_p * w_star;
  d.tau = 0.0;
  d.d_p = 0.0;
  return d;
}

// Matching control: the dc link is the rotor, the dc source is the turbine.
// The tiny dc loss conductance is neglected, leaving the saturable source
// as the only restoring path.
[[nodiscard]] inline ReducedDevice matching_reduced(double c_dc, double k_theta, double k_dc,
                                                    double tau_dc, double v_dc_star,
                                                    double i_dc_max) {
  ReducedDevice d;
  d.kind = ReducedDevice::Kind::swing_like;
  d.h = c_dc / (2.0 * k_theta * k_theta);
  d.d = 0.0;
  d.tau = tau_dc;
  d.d_p = k_dc / k_theta;
  d.p_max = v_dc_star * i_dc_max;
  return d;
}

// ---------------------------------------------------------------------------
// Two-node model: aggregate machine vs aggregate converter
// ---------------------------------------------------------------------------

// Singular-perturbation limit of the network: one swing-like node (the
// machines) loaded by the disturbance p_d and by droop-like converters that
// act as a saturable frequency damper.
struct TwoNodeParams {
  double h = 11.1;   // aggregate inertia, s
  double d_p = 300;  // aggregate turbine droop gain
  double tau = 5.0;  // turbine lag, s
  double d_gfc = 0.0;
  double p_max = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(h > 0.0) || !(tau > 0.0)) throw std::invalid_argument("two-node: h, tau must be > 0");
    if (d_gfc < 0.0) throw std::invalid_argument("two-node: d_gfc must be >= 0");
  }
};

struct TwoNodeResponse {
  std::vector<double> time;
  std::vector<double> omega;  // frequency deviation, pu
  double nadir = 0.0;
  double rocof = 0.0;
};

// Steps the disturbance p_d at t = 0 from rest and integrates
//   2H w' = -sat(D_gfc * w, p_max) + p_tau + p_d
//   tau p_tau' = -p_tau - d_p * w
// with classical RK4. Metrics use the standard 250 ms RoCoF window.
[[nodiscard]] inline TwoNodeResponse two_node_step_response(const TwoNodeParams& prm, double p_d,
                                                            double t_end = 50.0, double dt = 1e-3,
                                                            double rocof_window = 0.25) {
  prm.validate();
  if (!(t_end >= 10.0 * prm.tau))
    throw std::invalid_argument("two-node: t_end must cover the turbine settling (>= 10 tau)");
  auto f = [&](const double* x, double* dx) {
    dx[0] = (-saturate(prm.d_gfc * x[0], prm.p_max) + x[1] + p_d) / (2.0 * prm.h);
    dx[1] = (-x[1] - prm.d_p * x[0]) / prm.tau;
  };
  double x[2] = {0.0, 0.0};
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
  TwoNodeResponse out;
  out.time.reserve(n + 1);
  out.omega.reserve(n + 1);
  out.time.push_back(0.0);
  out.omega.push_back(0.0);
  double k1[2], k2[2], k3[2], k4[2], xs[2];
  for (std::size_t i = 0; i < n; ++i) {
    f(x, k1);
    xs[0] = x[0] + 0.5 * dt * k1[0];
    xs[1] = x[1] + 0.5 * dt * k1[1];
    f(xs, k2);
    xs[0] = x[0] + 0.5 * dt * k2[0];
    xs[1] = x[1] + 0.5 * dt * k2[1];
    f(xs, k3);
    xs[0] = x[0] + dt * k3[0];
    xs[1] = x[1] + dt * k3[1];
    f(xs, k4);
    x[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    x[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    out.time.push_back(static_cast<double>(i + 1) * dt);
    out.omega.push_back(x[0]);
  }
  out.nadir = nadir(out.time, out.omega, 0.0, 0.0);
  out.rocof = rocof(out.time, out.omega, 0.0, rocof_window);
  return out;
}

// ---------------------------------------------------------------------------
// Inertia interpolation study
// ---------------------------------------------------------------------------

// Interpolates the aggregate two-node parameters from the all-machine
// system (nu = 1) towards one third machines, two thirds droop-controlled
// converters (nu = 1/3): inertia and turbine gain scale with nu, while the
// converters contribute pure frequency damping in proportion to (1 - nu).
struct InterpolationPoint {
  double nu = 1.0;
  double rocof_pct = 100.0;  // relative to the nu = 1 anchor
  double nadir_pct = 100.0;
};

struct InterpolationConfig {
  double h_sm = 3.7;    // per-machine inertia constant, s
  double d_p_sm = 100;  // per-machine turbine droop gain (1% droop)
  double tau = 5.0;     // turbine lag, s
  int n_machines = 3;
  double p_d = 1.42;  // disturbance, pu (calibrated; CLI-overridable)
  double p_max = std::numeric_limits<double>::infinity();
};

[[nodiscard]] inline std::vector<double> interpolation_grid(int points = 20) {
  if (points < 2) throw std::invalid_argument("interpolation grid needs at least 2 points");
  std::vector<double> nu(static_cast<std::size_t>(points));
  const double lo = 1.0 / 3.0;
  for (int i = 0; i < points; ++i)
    nu[static_cast<std::size_t>(i)] = 1.0 + (lo - 1.0) * i / (points - 1);
  return nu;
}

[[nodiscard]] inline TwoNodeParams interpolated_params(const InterpolationConfig& cfg, double nu) {
  TwoNodeParams p;
  p.h = nu * cfg.n_machines * cfg.h_sm;
  p.d_p = nu * cfg.n_machines * cfg.d_p_sm;
  p.tau = cfg.tau;
  p.d_gfc = (1.0 - nu) * cfg.n_machines * cfg.d_p_sm;
  p.p_max = cfg.p_max;
  return p;
}

[[nodiscard]] inline std::vector<InterpolationPoint> interpolation_study(
    const InterpolationConfig& cfg, const std::vector<double>& nu_grid) {
  const TwoNodeResponse anchor = two_node_step_response(interpolated_params(cfg, 1.0), cfg.p_d);
  if (!(anchor.nadir > 0.0) || !(anchor.rocof > 0.0))
    throw std::runtime_error("interpolation study: degenerate anchor response");
  std::vector<InterpolationPoint> out;
  out.reserve(nu_grid.size());
  for (const double nu : nu_grid) {
    const TwoNodeResponse r = two_node_step_response(interpolated_params(cfg, nu), cfg.p_d);
    InterpolationPoint pt;
    pt.nu = nu;
    pt.rocof_pct = 100.0 * r.rocof / anchor.rocof;
    pt.nadir_pct = 100.0 * r.nadir / anchor.nadir;
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reduced dc-link voltage model
// ---------------------------------------------------------------------------

struct DcReducedParams {
  double c_dc = 0.047629;   // pu s
  double g_dc = 0.0049415;  // pu
  double k_dc = 1600.0;
  double v_dc_star = 1.0;
  double i_dc_max = 1.2;
};

// One-state collapse model: proportional dc control through the source
// saturation against a constant-power draw.
[[nodiscard]] inline double dc_voltage_reduced(double v_dc, double p, const DcReducedParams& prm) {
  if (!(v_dc > 0.0)) throw std::domain_error("dc reduced model: v_dc must be positive");
  const double i_src = saturate(prm.k_dc * (prm.v_dc_star - v_dc), prm.i_dc_max);
  return (-prm.g_dc * v_dc + i_src - p / v_dc) / prm.c_dc;
}

// Equilibrium of the reduced dc model by bisection on (0, v_dc_star];
// returns 0 when the drawn power admits no positive-voltage equilibrium
// (the collapse regime).
[[nodiscard]] inline double dc_reduced_equilibrium(double p, const DcReducedParams& prm) {
  auto fdot = [&](double v) { return dc_voltage_reduced(v, p, prm); };
  // v_dot is positive near an equilibrium's left side and negative at
  // v_dc_star when p > 0; no sign change anywhere means collapse.
  double lo = 1e-6, hi = prm.v_dc_star + prm.i_dc_max / prm.k_dc;
  if (fdot(hi) > 0.0) return hi;  // negative p: equilibrium above v_star; not modeled finer
  double probe = lo;
  bool bracketed = false;
  for (int i = 0; i < 4096; ++i) {
    const double v = lo + (hi - lo) * i / 4095.0;
    if (fdot(v) > 0.0) {
      probe = v;
      bracketed = true;
    }
  }
  if (!bracketed) return 0.0;
  double a = probe, b = hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    (fdot(mid) > 0.0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Gain equivalence across control families
// ---------------------------------------------------------------------------

// Steady-state load-sharing slopes: given one power-frequency droop gain
// d_p, every family's gain that produces the identical slope.
struct EquivalentGains {
  double d_omega = 0.0;  // droop
  double d_p_vsm = 0.0;  // virtual synchronous machine damping
  double k_dc = 0.0;     // matching (via the dc proportional control)
  double eta = 0.0;      // virtual oscillator synchronization gain
};

[[nodiscard]] inline EquivalentGains compute_equivalent_gains(double d_p, double w_star = 1.0,
                                                              double v_star = 1.0,
                                                              double v_dc_star = 1.0,
                                                              double k_theta = 1.0) {
  if (!(d_p > 0.0)) throw std::invalid_argument("equivalent gains: d_p must be positive");
  EquivalentGains g;
  g.d_omega = 1.0 / d_p;
  g.d_p_vsm = d_p / w_star;
  g.k_dc = d_p * k_theta / v_dc_star;
  g.eta = v_star * v_star / d_p;
  return g;
}

}  // namespace lowinertia
