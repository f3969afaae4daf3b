#pragma once

// Fixed-step explicit integration of the assembled system state.
//
// The solver is deliberately plain: classical RK4 on a uniform grid, with
// discrete events applied exactly at grid points and saturations handled
// inside the right-hand side (clipped-rhs). No adaptivity anywhere, so a
// scenario always produces bit-identical traces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace lowinertia {

// ---------------------------------------------------------------------------
// State registry
// ---------------------------------------------------------------------------

// How a state behaves in a synchronously rotating steady state. Needed to
// measure a meaningful steady-state residual: a stationary-frame pair rotates
// forever, an angle ramps forever, and both must have the synchronous motion
// subtracted before asking "has the system settled".
enum class StateKind : unsigned char {
  scalar,      // constant in steady state
  pair_first,  // first axis of a stationary-frame pair (rotates at w)
  pair_second, // second axis of that pair
  angle        // advances at w * omega_base rad/s in steady state
};

class StateRegistry {
 public:
  int add_scalar(std::string name) { return add(std::move(name), StateKind::scalar); }
  int add_angle(std::string name) { return add(std::move(name), StateKind::angle); }

  // Registers two consecutive slots "<name>.a" / "<name>.b"; returns the
  // index of the first.
  int add_pair(const std::string& name) {
    const int i = add(name + ".a", StateKind::pair_first);
    add(name + ".b", StateKind::pair_second);
    return i;
  }

  [[nodiscard]] std::size_t size() const { return names_.size(); }
  [[nodiscard]] const std::string& name(std::size_t i) const { return names_.at(i); }
  [[nodiscard]] StateKind kind(std::size_t i) const { return kinds_.at(i); }
  [[nodiscard]] int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("no state named " + name);
  }
  [[nodiscard]] const std::vector<StateKind>& kinds() const { return kinds_; }

 private:
  int add(std::string name, StateKind k) {
    names_.push_back(std::move(name));
    kinds_.push_back(k);
    return static_cast<int>(names_.size()) - 1;
  }

  std::vector<std::string> names_;
  std::vector<StateKind> kinds_;
};

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

struct LoadStepEvent {
  int bus = 0;
  double delta_p = 0.0;  // pu at nominal voltage
};
struct DeviceTripEvent {
  int device = 0;
};
struct SetpointChangeEvent {
  int device = 0;
  double p_star = 0.0;  // pu
};

struct Event {
  double time = 0.0;
  std::variant<LoadStepEvent, DeviceTripEvent, SetpointChangeEvent> action;
};

struct SolverConfig {
  double dt = 1e-5;        // s
  double t_end = 1.0;      // s
  int sample_stride = 100; // record every N-th step

  void validate() const {
    if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("dt must be in (0, 1e-3] s");
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    if (sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// RK4
// ---------------------------------------------------------------------------

struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& what, double t, int index)
      : std::runtime_error(what), time(t), state_index(index) {}
  double time;
  int state_index;
};

// Classical RK4 step with preallocated slope storage. Rhs signature:
//   rhs(double t, const double* x, double* dxdt)
template <class Rhs>
class Rk4 {
 public:
  explicit Rk4(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), xt_(n), n_(n) {}

  void step(Rhs&& rhs, std::vector<double>& x, double t, double dt) {
    const double half = 0.5 * dt;
    double* xp = x.data();
    rhs(t, xp, k1_.data());
    for (std::size_t i = 0; i < n_; ++i) xt_[i] = xp[i] + half * k1_[i];
    rhs(t + half, xt_.data(), k2_.data());
    for (std::size_t i = 0; i < n_; ++i) xt_[i] = xp[i] + half * k2_[i];
    rhs(t + half, xt_.data(), k3_.data());
    for (std::size_t i = 0; i < n_; ++i) xt_[i] = xp[i] + dt * k3_[i];
    rhs(t + dt, xt_.data(), k4_.data());
    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n_; ++i)
      xp[i] += w * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }

 private:
  std::vector<double> k1_, k2_, k3_, k4_, xt_;
  std::size_t n_;
};

// Single checked step (the standalone operation): throws IntegrationError on
// any non-finite slope, identifying the offending state.
template <class Rhs>
void rk4_step(Rhs&& rhs, std::vector<double>& x, double t, double dt) {
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), xt(n);
  auto check = [&](const std::vector<double>& k, double tk) {
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(k[i]))
        throw IntegrationError("non-finite derivative", tk, static_cast<int>(i));
  };
  const double half = 0.5 * dt;
  rhs(t, x.data(), k1.data());
  check(k1, t);
  for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + half * k1[i];
  rhs(t + half, xt.data(), k2.data());
  check(k2, t + half);
  for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + half * k2[i];
  rhs(t + half, xt.data(), k3.data());
  check(k3, t + half);
  for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + dt * k3[i];
  rhs(t + dt, xt.data(), k4.data());
  check(k4, t + dt);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// ---------------------------------------------------------------------------
// Trace and integration driver
// ---------------------------------------------------------------------------

struct Trace {
  std::vector<std::string> channel_names;
  std::vector<double> time;                 // s
  std::vector<std::vector<double>> values;  // [channel][sample]

  [[nodiscard]] std::size_t samples() const { return time.size(); }
};

enum class RunStatus { completed, stopped, diverged };

struct IntegrationOutcome {
  RunStatus status = RunStatus::completed;
  double t_final = 0.0;
  int bad_state = -1;  // index that left the sanity box, if diverged
};

inline constexpr double sanity_box = 1e6;

// Integration loop. The caller wires behavior through callbacks:
//   on_event(event)                  -- mutate parameters at event time
//   sample(t, x)                     -- record a trace sample
//   stop(t, x) -> bool               -- early-stop predicate (optional)
// Time is always formed as i * dt, never accumulated, so event alignment and
// determinism are exact. Events must sit on the step grid.
template <class Rhs, class OnEvent, class Sample, class Stop>
IntegrationOutcome integrate(Rhs&& rhs, std::vector<double>& x, const std::vector<Event>& events,
                             const SolverConfig& cfg, OnEvent&& on_event, Sample&& sample,
                             Stop&& stop) {
  cfg.validate();
  const auto n_steps = static_cast<long long>(std::llround(cfg.t_end / cfg.dt));

  // map events to step indices, verifying grid alignment
  std::vector<std::pair<long long, std::size_t>> event_steps;
  event_steps.reserve(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    const double step_f = events[e].time / cfg.dt;
    const auto step_i = static_cast<long long>(std::llround(step_f));
    if (std::abs(step_i * cfg.dt - events[e].time) > 1e-9)
      throw std::invalid_argument("event time " + std::to_string(events[e].time) +
                                  " is not on the dt grid");
    if (step_i < 0 || step_i > n_steps)
      throw std::invalid_argument("event time outside [0, t_end]");
    event_steps.emplace_back(step_i, e);
  }
  // stable order: by time, ties by declaration order
  std::stable_sort(event_steps.begin(), event_steps.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  Rk4<Rhs&> stepper(x.size());
  std::size_t next_event = 0;

  for (long long i = 0; i <= n_steps; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;

    if (i % cfg.sample_stride == 0) sample(t, x);
    while (next_event < event_steps.size() && event_steps[next_event].first == i) {
      on_event(events[event_steps[next_event].second]);
      ++next_event;
    }
    if (stop(t, x)) return {RunStatus::stopped, t, -1};
    if (i == n_steps) break;

    stepper.step(rhs, x, t, cfg.dt);

    for (std::size_t s = 0; s < x.size(); ++s) {
      if (!std::isfinite(x[s]) || std::abs(x[s]) > sanity_box)
        return {RunStatus::diverged, t + cfg.dt, static_cast<int>(s)};
    }
  }
  return {RunStatus::completed, static_cast<double>(n_steps) * cfg.dt, -1};
}

template <class Rhs, class OnEvent, class Sample>
IntegrationOutcome integrate(Rhs&& rhs, std::vector<double>& x, const std::vector<Event>& events,
                             const SolverConfig& cfg, OnEvent&& on_event, Sample&& sample) {
  return integrate(rhs, x, events, cfg, on_event, sample,
                   [](double, const std::vector<double>&) { return false; });
}

// ---------------------------------------------------------------------------
// Steady-state residual
// ---------------------------------------------------------------------------

// Plain residual: infinity norm of the raw right-hand side.
template <class Rhs>
double steady_state_residual(Rhs&& rhs, const std::vector<double>& x) {
  std::vector<double> dx(x.size());
  rhs(0.0, x.data(), dx.data());
  double r = 0.0;
  for (double v : dx) r = std::max(r, std::abs(v));
  return r;
}

// Rotating-sense residual: subtracts the synchronous motion (frequency
// w_sync in pu) implied by each state's kind before taking the norm. This is
// the quantity that vanishes at a true rotating equilibrium.
template <class Rhs>
double steady_state_residual(Rhs&& rhs, const std::vector<double>& x, const StateRegistry& reg,
                             double w_sync, double omega_base_rad) {
  if (reg.size() != x.size()) throw std::invalid_argument("registry/state size mismatch");
  std::vector<double> dx(x.size());
  rhs(0.0, x.data(), dx.data());
  const double w = w_sync * omega_base_rad;  // rad/s
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double res = dx[i];
    switch (reg.kind(i)) {
      case StateKind::scalar: break;
      case StateKind::pair_first: res -= -w * x[i + 1]; break;
      case StateKind::pair_second: res -= w * x[i - 1]; break;
      case StateKind::angle: res -= w; break;
    }
    r = std::max(r, std::abs(res));
  }
  return r;
}

}  // namespace lowinertia
