#pragma once

// Coordinate transforms (abc <-> alpha-beta <-> dq), two-axis signal type,
// rotation helpers, and the per-unit bases shared by every other header.
//
// Conventions, fixed once for the whole library:
//  * amplitude-invariant (peak-value) Clarke transform: a balanced abc set of
//    peak A maps to a rotating vector of magnitude A;
//  * with peak-quantity per-unit bases, instantaneous power is then simply
//    p = v1*i1 + v2*i2 and q = v2*i1 - v1*i2 (no 3/2 factor);
//  * park(v, theta) rotates by -theta (stationary -> rotating frame).

#include <cmath>
#include <numbers>

namespace lowinertia {

inline constexpr double pi = std::numbers::pi;

// System base: 100 MVA, 230 kV, 50 Hz.
inline constexpr double omega_base = 2.0 * pi * 50.0;  // rad/s

enum class Frame { alpha_beta, dq };

// A 2-axis electrical quantity tagged with its frame at compile time.
// Arithmetic across frames does not compile; park/inverse_park are the only
// frame-changing operations.
template <Frame F>
struct TwoAxis {
  double x1 = 0.0;
  double x2 = 0.0;

  [[nodiscard]] double norm() const { return std::hypot(x1, x2); }
  [[nodiscard]] double norm_sq() const { return x1 * x1 + x2 * x2; }

  TwoAxis& operator+=(TwoAxis o) { x1 += o.x1; x2 += o.x2; return *this; }
  TwoAxis& operator-=(TwoAxis o) { x1 -= o.x1; x2 -= o.x2; return *this; }
  TwoAxis& operator*=(double c) { x1 *= c; x2 *= c; return *this; }

  friend TwoAxis operator+(TwoAxis a, TwoAxis b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
  friend TwoAxis operator-(TwoAxis a, TwoAxis b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
  friend TwoAxis operator*(double c, TwoAxis a) { return {c * a.x1, c * a.x2}; }
  friend TwoAxis operator*(TwoAxis a, double c) { return {c * a.x1, c * a.x2}; }
};

using AlphaBeta = TwoAxis<Frame::alpha_beta>;
using Dq = TwoAxis<Frame::dq>;

// 90-degree rotation J2 = R2(pi/2); J2*[x1,x2] = [-x2, x1].
template <Frame F>
[[nodiscard]] inline TwoAxis<F> j2(TwoAxis<F> v) {
  return {-v.x2, v.x1};
}

// Plane rotation R2(angle), cached as (cos, sin) so hot paths pay one sincos.
struct Rotation2 {
  double c = 1.0;
  double s = 0.0;

  static Rotation2 from_angle(double angle) { return {std::cos(angle), std::sin(angle)}; }

  template <Frame F>
  [[nodiscard]] TwoAxis<F> apply(TwoAxis<F> v) const {
    return {c * v.x1 - s * v.x2, s * v.x1 + c * v.x2};
  }
  template <Frame F>
  [[nodiscard]] TwoAxis<F> apply_inverse(TwoAxis<F> v) const {
    return {c * v.x1 + s * v.x2, -s * v.x1 + c * v.x2};
  }
};

// Amplitude-invariant Clarke transform of an instantaneous abc triple.
[[nodiscard]] inline AlphaBeta clarke(double a, double b, double c) {
  return {(2.0 * a - b - c) / 3.0, (b - c) / std::numbers::sqrt3};
}

// Stationary -> rotating frame (rotation by -theta). Magnitude-preserving.
[[nodiscard]] inline Dq park(AlphaBeta v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x1 + s * v.x2, -s * v.x1 + c * v.x2};
}
[[nodiscard]] inline Dq park(AlphaBeta v, const Rotation2& r) {
  return {r.c * v.x1 + r.s * v.x2, -r.s * v.x1 + r.c * v.x2};
}

// Rotating -> stationary frame (rotation by +theta). Exact inverse of park.
[[nodiscard]] inline AlphaBeta inverse_park(Dq v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x1 - s * v.x2, s * v.x1 + c * v.x2};
}
[[nodiscard]] inline AlphaBeta inverse_park(Dq v, const Rotation2& r) {
  return {r.c * v.x1 - r.s * v.x2, r.s * v.x1 + r.c * v.x2};
}

struct PowerPq {
  double p = 0.0;
  double q = 0.0;
};

// Instantaneous two-axis power in peak-quantity per-unit. Frame-invariant:
// the same expression is valid in alpha-beta and in any dq frame.
template <Frame F>
[[nodiscard]] inline PowerPq instantaneous_power(TwoAxis<F> v, TwoAxis<F> i) {
  return {v.x1 * i.x1 + v.x2 * i.x2, v.x2 * i.x1 - v.x1 * i.x2};
}

// Per-unit base set. Voltage base is the peak phase value for ac quantities;
// SI parameter conversion happens once at configuration load.
struct PerUnitBase {
  double s_base;      // VA
  double v_base;      // V
  double omega;       // rad/s

  [[nodiscard]] double i_base() const { return s_base / v_base; }
  [[nodiscard]] double z_base() const { return v_base * v_base / s_base; }
  [[nodiscard]] double l_base() const { return z_base() / omega; }
  [[nodiscard]] double c_base() const { return 1.0 / (z_base() * omega); }
};

}  // namespace lowinertia
