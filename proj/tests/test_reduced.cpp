#include <catch2/catch_amalgamated.hpp>

#include <lowinertia/gfc_controls.hpp>
#include <lowinertia/reduced.hpp>
#include <lowinertia/system.hpp>

#include <array>
#include <cmath>
#include <limits>

using namespace lowinertia;
using Catch::Approx;

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();
}

TEST_CASE("reduced: zero state and zero power give zero derivatives") {
  double x[3] = {0.0, 0.0, 0.0};
  double dx[3] = {1.0, 1.0, 1.0};

  ReducedDevice droop;
  reduced_device_derivatives(droop, 0.0, x, dx);
  CHECK(dx[0] == 0.0);

  ReducedDevice swing;
  swing.kind = ReducedDevice::Kind::swing_like;
  reduced_device_derivatives(swing, 0.0, x, dx);
  CHECK(dx[0] == 0.0);
  CHECK(dx[1] == 0.0);
  CHECK(dx[2] == 0.0);
}

TEST_CASE("reduced: droop-like angle slides at -d_omega * p") {
  ReducedDevice d;
  d.d_omega = 0.002;
  double x[1] = {0.3};
  double dx[1];
  reduced_device_derivatives(d, 0.5, x, dx);
  CHECK(dx[0] == Approx(-0.001));
}

TEST_CASE("reduced: swing-like turbine saturates and the lag filters the command") {
  ReducedDevice d;
  d.kind = ReducedDevice::Kind::swing_like;
  d.h = 2.0;
  d.d = 10.0;
  d.tau = 0.5;
  d.d_p = 100.0;
  d.p_max = 1.2;
  double x[3] = {0.0, -0.01, 2.0};  // turbine state beyond its limit
  double dx[3];
  reduced_device_derivatives(d, 0.1, x, dx);
  CHECK(dx[0] == Approx(-0.01));
  // 2H w' = -D w + sat(p_tau) - p = 0.1 + 1.2 - 0.1
  CHECK(dx[1] == Approx((0.1 + 1.2 - 0.1) / 4.0));
  // tau p_tau' = -p_tau - d_p w = -2 + 1
  CHECK(dx[2] == Approx((-2.0 + 1.0) / 0.5));
}

TEST_CASE("reduced: algebraic turbine (tau = 0) is the instantaneous droop") {
  ReducedDevice d;
  d.kind = ReducedDevice::Kind::swing_like;
  d.h = 1.0;
  d.d = 0.0;
  d.tau = 0.0;
  d.d_p = 50.0;
  double x[3] = {0.0, -0.02, 99.0};  // stale p_tau slot must be ignored
  double dx[3];
  reduced_device_derivatives(d, 0.0, x, dx);
  CHECK(dx[1] == Approx((50.0 * 0.02) / 2.0));
  CHECK(dx[2] == 0.0);
}

TEST_CASE("reduced: virtual synchronous machine maps to lag-free swing dynamics") {
  const ReducedDevice d = vsm_reduced(20.0, 1000.0);
  CHECK(d.kind == ReducedDevice::Kind::swing_like);
  CHECK(d.h == Approx(10.0));
  CHECK(d.d == Approx(1000.0));
  CHECK(d.tau == 0.0);
}

TEST_CASE("reduced: matching control maps the dc link to a rotor and the source to a turbine") {
  const ConverterParams cp;
  const ControlGains cg;
  const ReducedDevice d =
      matching_reduced(cp.c_dc, 1.0, cg.k_dc, cp.tau_dc, cp.v_dc_star, cp.i_dc_max);
  CHECK(d.h == Approx(cp.c_dc / 2.0));
  CHECK(d.d == 0.0);
  CHECK(d.tau == Approx(0.05));
  CHECK(d.d_p == Approx(1600.0));
  CHECK(d.p_max == Approx(1.2));
}

TEST_CASE("reduced: two-node model stays at rest without a disturbance") {
  TwoNodeParams p;
  const TwoNodeResponse r = two_node_step_response(p, 0.0);
  CHECK(r.nadir == 0.0);
  CHECK(r.rocof == 0.0);
}

TEST_CASE("reduced: pure inertia limit reproduces rocof = |p_d|/(2H)") {
  // With zero turbine gain the turbine state never leaves the origin, so the
  // frequency is an exact ramp and the finite-window rocof equals the true
  // initial slope regardless of window length.
  TwoNodeParams p;
  p.h = 11.1;
  p.d_p = 0.0;
  p.tau = 5.0;
  p.d_gfc = 0.0;
  const TwoNodeResponse r = two_node_step_response(p, 0.9, 50.0, 1e-3);
  CHECK(r.rocof == Approx(0.9 / (2.0 * 11.1)).epsilon(1e-9));
}

TEST_CASE("reduced: two-node aggregate response matches the frozen analytic values") {
  // All-machine aggregate: three units of H = 3.7 s, 1% droop, 5 s turbine.
  TwoNodeParams p;
  p.h = 11.1;
  p.d_p = 300.0;
  p.tau = 5.0;
  p.d_gfc = 0.0;

  SECTION("0.9 pu step") {
    const TwoNodeResponse r = two_node_step_response(p, 0.9);
    CHECK(r.nadir == Approx(0.0253257812).epsilon(1e-6));
    CHECK(r.rocof == Approx(0.0394227646).epsilon(1e-6));
  }
  SECTION("1.42 pu step") {
    const TwoNodeResponse r = two_node_step_response(p, 1.42);
    CHECK(r.nadir == Approx(0.0399584548).epsilon(1e-6));
    CHECK(r.rocof == Approx(0.0622003620).epsilon(1e-6));
  }
  SECTION("one-third machines, converters as dampers, 0.9 pu step") {
    TwoNodeParams third = p;
    third.h = 3.7;
    third.d_p = 100.0;
    third.d_gfc = 200.0;
    const TwoNodeResponse r = two_node_step_response(third, 0.9);
    CHECK(r.nadir == Approx(0.0044241757).epsilon(1e-6));
    CHECK(r.rocof == Approx(0.0176696099).epsilon(1e-6));
  }
}

TEST_CASE("reduced: unsaturated two-node metrics are exactly linear in the disturbance") {
  TwoNodeParams p;
  p.h = 7.4;
  p.d_p = 220.0;
  p.tau = 5.0;
  p.d_gfc = 150.0;
  p.p_max = inf;
  const TwoNodeResponse a = two_node_step_response(p, 0.4);
  const TwoNodeResponse b = two_node_step_response(p, 0.8);
  CHECK(b.nadir == Approx(2.0 * a.nadir).epsilon(1e-9));
  CHECK(b.rocof == Approx(2.0 * a.rocof).epsilon(1e-9));
}

TEST_CASE("reduced: coarse and fine steps agree on the windowed rocof") {
  TwoNodeParams p;
  p.h = 11.1;
  p.d_p = 300.0;
  p.tau = 5.0;
  const TwoNodeResponse coarse = two_node_step_response(p, 0.9, 50.0, 1e-3);
  const TwoNodeResponse fine = two_node_step_response(p, 0.9, 50.0, 1e-4);
  CHECK(coarse.rocof == Approx(fine.rocof).epsilon(5e-3));
  CHECK(coarse.nadir == Approx(fine.nadir).epsilon(5e-3));
}

TEST_CASE("reduced: interpolation study anchors at 100% and lands on the plotted endpoints") {
  InterpolationConfig cfg;  // p_d = 1.42 calibrated default

  SECTION("anchor") {
    const auto pts = interpolation_study(cfg, {1.0});
    CHECK(pts[0].rocof_pct == Approx(100.0).margin(1e-9));
    CHECK(pts[0].nadir_pct == Approx(100.0).margin(1e-9));
  }
  SECTION("unsaturated endpoint") {
    const auto pts = interpolation_study(cfg, {1.0 / 3.0});
    CHECK(pts[0].rocof_pct == Approx(44.8227479515198).epsilon(5e-3));
    CHECK(pts[0].nadir_pct == Approx(17.469326401304).epsilon(5e-3));
  }
  SECTION("saturated endpoint") {
    InterpolationConfig sat = cfg;
    sat.p_max = 1.2;
    const auto pts = interpolation_study(sat, {1.0 / 3.0});
    CHECK(pts[0].rocof_pct == Approx(70.3).epsilon(1e-2));
    CHECK(pts[0].nadir_pct == Approx(47.9).epsilon(1e-2));
  }
}

TEST_CASE("reduced: source saturation only ever worsens the interpolated metrics") {
  InterpolationConfig unsat;
  InterpolationConfig sat;
  sat.p_max = 1.2;
  const auto grid = interpolation_grid(7);
  const auto a = interpolation_study(unsat, grid);
  const auto b = interpolation_study(sat, grid);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].rocof_pct >= a[i].rocof_pct - 1e-9);
    CHECK(b[i].nadir_pct >= a[i].nadir_pct - 1e-9);
  }
}

TEST_CASE("reduced: interpolation grid spans 1 down to 1/3 inclusive") {
  const auto g = interpolation_grid(20);
  REQUIRE(g.size() == 20);
  CHECK(g.front() == Approx(1.0));
  CHECK(g.back() == Approx(1.0 / 3.0));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
}

TEST_CASE("reduced: dc model equilibrium without load is the voltage-divider point") {
  DcReducedParams prm;
  const double v_eq = prm.k_dc * prm.v_dc_star / (prm.k_dc + prm.g_dc);
  CHECK(dc_voltage_reduced(v_eq, 0.0, prm) == Approx(0.0).margin(1e-12));
  CHECK(dc_reduced_equilibrium(0.0, prm) == Approx(v_eq).epsilon(1e-6));
}

TEST_CASE("reduced: dc model rejects non-positive voltage") {
  DcReducedParams prm;
  CHECK_THROWS_AS(dc_voltage_reduced(0.0, 0.1, prm), std::domain_error);
  CHECK_THROWS_AS(dc_voltage_reduced(-0.5, 0.1, prm), std::domain_error);
}

TEST_CASE("reduced: overdrawn dc model collapses monotonically") {
  DcReducedParams prm;
  // Largest steady power the saturated source can push is just below
  // v_star * i_dc_max; beyond it v_dot < 0 everywhere.
  const double p = 1.3;
  for (double v = 0.02; v <= prm.v_dc_star; v += 0.02)
    REQUIRE(dc_voltage_reduced(v, p, prm) < 0.0);
  CHECK(dc_reduced_equilibrium(p, prm) == 0.0);
}

TEST_CASE("reduced: dc equilibrium tracks the full dc control loop within 2%") {
  // Full loop steady state: i_tau = i_dc_star and the capacitor balance
  // i_dc = g v + i_x, with the reference from the actual controller
  // (p_star = 0, lossless switches: i_x = p / v, measured p = drawn p).
  DcReducedParams prm;
  const ControlGains cg;
  const ConverterParams cp;
  for (const double p : {0.05, 0.2, 0.5}) {
    // bisect the full-model balance k_dc (v* - v) = p / v on (0.9, 1.0]
    double lo = 0.9, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double i_x = p / mid;
      const double i_ref = dc_current_reference(mid, 0.0, p, i_x, cg.k_dc, cp.g_dc, cp.v_dc_star);
      const double balance = i_ref - (cp.g_dc * mid + i_x);
      (balance > 0.0 ? lo : hi) = mid;
    }
    const double v_full = 0.5 * (lo + hi);
    const double v_red = dc_reduced_equilibrium(p, prm);
    REQUIRE(v_red > 0.0);
    CHECK(v_red == Approx(v_full).epsilon(0.02));
  }
}

TEST_CASE("reduced: equivalent gains reproduce the worked slope algebra") {
  const EquivalentGains g = compute_equivalent_gains(100.0);
  CHECK(g.d_omega == Approx(0.01));
  CHECK(g.d_p_vsm == Approx(100.0));
  CHECK(g.k_dc == Approx(100.0));
  CHECK(g.eta == Approx(0.01));
  CHECK_THROWS_AS(compute_equivalent_gains(0.0), std::invalid_argument);
}

TEST_CASE("reduced: two-node model predicts the full 9-bus response within 20%") {
  // One machine plus two droop converters, 0.2 pu step, no limits active.
  // The converters run the sharing-matched droop slope (1%, the inverse of the
  // machine governor gain). That matters for validity: collapsing a converter
  // to a static damping term assumes its angle relative to the machine settles
  // much faster than the swing, and the relaxation rate is proportional to the
  // droop slope. At the stiff default slope the two timescales overlap and the
  // aggregate model is not expected to hold.
  Topology t = build_ieee9({DeviceKind::sm, DeviceKind::droop, DeviceKind::droop}, 2.0);
  std::vector<DeviceSpec> specs;
  for (const auto& att : t.devices) {
    DeviceSpec s;
    s.kind = att.kind;
    s.p_star = 0.66;
    if (att.kind == DeviceKind::droop) s.reference.d_omega = 0.01;
    specs.push_back(s);
  }
  PowerSystem sys(t, specs);
  sys.initialize();
  SolverConfig cfg;
  cfg.dt = 5e-5;
  cfg.t_end = 16.0;
  cfg.sample_stride = 100;
  int bus7 = 0;
  for (int b = 0; b < (int)t.buses.size(); ++b)
    if (t.buses[b].name == "bus7") bus7 = b;
  const double t0 = 0.5, dp = 0.2;
  const SystemRunResult r = sys.run(cfg, {{t0, LoadStepEvent{bus7, dp}}});
  REQUIRE(r.classification == SystemClass::stable);
  const auto& time = r.trace.time;
  const auto& w = r.trace.values[sys.frequency_channel()];
  const double w_pre = sample_at(time, w, t0 - 1e-3);
  const double full_nadir = nadir(time, w, w_pre, t0);
  const double full_rocof = rocof(time, w, t0, 0.25);

  TwoNodeParams p;
  p.h = 3.7;    // the single machine carries all the inertia
  p.d_p = 100;  // its governor
  p.tau = 5.0;
  p.d_gfc = 2.0 / 0.01;  // two droop converters at the sharing-matched slope
  const TwoNodeResponse red = two_node_step_response(p, dp);

  CHECK(full_nadir == Approx(red.nadir).epsilon(0.20));
  CHECK(full_rocof == Approx(red.rocof).epsilon(0.20));
}
