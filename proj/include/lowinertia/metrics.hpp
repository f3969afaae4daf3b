#pragma once

// Frequency-stability metrics (nadir, RoCoF) and the disturbance sweep
// harness that drives one simulation per disturbance size.
//
// Conventions: the nadir is the largest absolute frequency deviation from
// nominal after the event, the RoCoF is a windowed slope (protection-relay
// style, 250 ms by default) rather than an instantaneous derivative. Both
// are evaluated on a single frequency signal: the mechanical frequency of
// the machine at node 1 when one exists, otherwise the internal frequency
// of the first converter's reference model.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <lowinertia/system.hpp>

namespace lowinertia {

// ---------------------------------------------------------------------------
// Pointwise metrics
// ---------------------------------------------------------------------------

// Largest |w_star - w(t)| over t >= t0.
[[nodiscard]] inline double nadir(const std::vector<double>& time, const std::vector<double>& w,
                                  double w_star, double t0) {
  if (time.empty() || time.size() != w.size())
    throw std::invalid_argument("nadir: empty or mismatched trace");
  if (time.back() < t0) throw std::invalid_argument("nadir: trace ends before t0");
  double worst = 0.0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] < t0) continue;
    worst = std::max(worst, std::abs(w_star - w[i]));
  }
  return worst;
}

// Linear interpolation of a sampled channel at time t.
[[nodiscard]] inline double sample_at(const std::vector<double>& time,
                                      const std::vector<double>& y, double t) {
  if (time.empty() || time.size() != y.size())
    throw std::invalid_argument("sample_at: empty or mismatched trace");
  if (t <= time.front()) return y.front();
  if (t >= time.back()) return y.back();
  std::size_t lo = 0, hi = time.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (time[mid] <= t ? lo : hi) = mid;
  }
  const double f = (t - time[lo]) / (time[hi] - time[lo]);
  return y[lo] + f * (y[hi] - y[lo]);
}

// Windowed rate of change of frequency: |w(t0+T) - w(t0)| / T.
[[nodiscard]] inline double rocof(const std::vector<double>& time, const std::vector<double>& w,
                                  double t0, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("rocof: window must be positive");
  if (time.empty() || time.back() < t0 + window)
    throw std::invalid_argument("rocof: trace does not cover the measurement window");
  return std::abs(sample_at(time, w, t0 + window) - sample_at(time, w, t0)) / window;
}

// ---------------------------------------------------------------------------
// Per-run result
// ---------------------------------------------------------------------------

struct MetricsResult {
  double nadir = 0.0;             // pu
  double rocof = 0.0;             // pu/s
  double normalized_nadir = 0.0;  // nadir / |dp|
  double normalized_rocof = 0.0;  // rocof / |dp|
  SystemClass stable = SystemClass::stable;
};

// One simulated response, reduced to what the metrics need.
struct SweepSample {
  std::vector<double> time;
  std::vector<double> omega;  // selected frequency channel, pu
  SystemClass classification = SystemClass::stable;
};

[[nodiscard]] inline MetricsResult evaluate_metrics(const SweepSample& s, double dp, double w_star,
                                                    double t0, double window) {
  MetricsResult r;
  r.stable = s.classification;
  if (s.classification != SystemClass::stable) return r;  // metrics meaningless off a stable run
  r.nadir = nadir(s.time, s.omega, w_star, t0);
  r.rocof = rocof(s.time, s.omega, t0, window);
  const double mag = std::abs(dp);
  if (mag > 0.0) {
    r.normalized_nadir = r.nadir / mag;
    r.normalized_rocof = r.rocof / mag;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Disturbance sweep
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::vector<double> dp_values;  // pu, applied as load steps
  int bus = 6;                    // disturbance bus (ieee9 "bus7")
  double p_l = 2.0;               // base load, pu
  double event_time = 0.5;        // s
  double window = 0.25;           // RoCoF window, s
  double w_star = 1.0;            // pu

  // 100 steps from 0.2 pu, uniformly increasing by 0.007 pu.
  [[nodiscard]] static SweepSpec standard_disturbances() {
    SweepSpec s;
    s.dp_values.resize(100);
    for (int i = 0; i < 100; ++i) s.dp_values[i] = 0.2 + 0.007 * i;
    return s;
  }
};

struct SweepPoint {
  double dp = 0.0;
  MetricsResult metrics;
};

[[nodiscard]] inline int sweep_worker_count(std::size_t jobs) {
  int n = 0;
  if (const char* env = std::getenv("LOWINERTIA_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs `simulate(dp)` for every disturbance in the spec on a small worker
// pool and evaluates the metrics. Results come back in dp order regardless
// of scheduling; a non-stable classification is recorded, never thrown.
[[nodiscard]] inline std::vector<SweepPoint> run_sweep(
    const SweepSpec& spec, const std::function<SweepSample(double)>& simulate) {
  std::vector<SweepPoint> out(spec.dp_values.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= spec.dp_values.size()) return;
      const double dp = spec.dp_values[i];
      out[i].dp = dp;
      out[i].metrics =
          evaluate_metrics(simulate(dp), dp, spec.w_star, spec.event_time, spec.window);
    }
  };
  const int workers = sweep_worker_count(spec.dp_values.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

// Largest per-pu metric over the stable runs of a sweep; the all-machine
// sweep's values anchor the cross-configuration normalization.
[[nodiscard]] inline double max_normalized_nadir(const std::vector<SweepPoint>& pts) {
  double m = 0.0;
  for (const auto& p : pts)
    if (p.metrics.stable == SystemClass::stable) m = std::max(m, p.metrics.normalized_nadir);
  return m;
}

[[nodiscard]] inline double max_normalized_rocof(const std::vector<SweepPoint>& pts) {
  double m = 0.0;
  for (const auto& p : pts)
    if (p.metrics.stable == SystemClass::stable) m = std::max(m, p.metrics.normalized_rocof);
  return m;
}

// Rescale a sweep so the metrics read as fractions of a baseline's maxima.
inline void normalize_against(std::vector<SweepPoint>& pts, double baseline_max_nadir,
                              double baseline_max_rocof) {
  if (!(baseline_max_nadir > 0.0) || !(baseline_max_rocof > 0.0))
    throw std::invalid_argument("normalize_against: baseline maxima must be positive");
  for (auto& p : pts) {
    p.metrics.normalized_nadir /= baseline_max_nadir;
    p.metrics.normalized_rocof /= baseline_max_rocof;
  }
}

}  // namespace lowinertia
