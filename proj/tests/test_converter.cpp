#include <catch2/catch_amalgamated.hpp>

#include <lowinertia/converter.hpp>
#include <lowinertia/solver.hpp>

#include <cmath>
#include <random>

using namespace lowinertia;
using Catch::Approx;

TEST_CASE("dc source saturation is a bidirectional hard clamp") {
  CHECK(saturate_dc(1.0, 1.2) == 1.0);
  CHECK(saturate_dc(1.5, 1.2) == 1.2);
  CHECK(saturate_dc(-1.5, 1.2) == -1.2);
  CHECK(saturate_dc(0.0, 1.2) == 0.0);
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (int k = 0; k < 200; ++k) {
    const double i = dist(gen);
    const double s = saturate_dc(i, 1.2);
    CHECK(std::abs(s) <= 1.2);
    CHECK(s * i >= 0.0);  // sign preserved
  }
}

TEST_CASE("switching stage is lossless for any gain") {
  std::mt19937 gen(29);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (double k_sw : {0.5, ConverterParams{}.k_sw}) {
    for (int t = 0; t < 1000; ++t) {
      const AlphaBeta m = {dist(gen), dist(gen)};
      const AlphaBeta i_s = {dist(gen), dist(gen)};
      const double v_dc = std::abs(dist(gen)) + 0.1;
      const AlphaBeta v_s = switching_voltage(m, v_dc, k_sw);
      const double i_x = switching_current(m, i_s, k_sw);
      const double ac = v_s.x1 * i_s.x1 + v_s.x2 * i_s.x2;
      CHECK(std::abs(v_dc * i_x - ac) < 1e-12);
    }
  }
}

TEST_CASE("switching stage arithmetic") {
  // natural half-bridge scaling
  const AlphaBeta v = switching_voltage({1.0, 0.0}, 2.0, 0.5);
  CHECK(v.x1 == Approx(1.0));
  CHECK(v.x2 == Approx(0.0));
  const AlphaBeta z = switching_voltage({0.0, 0.0}, 1.7, 0.5);
  CHECK(z.x1 == 0.0);
  CHECK(z.x2 == 0.0);
  CHECK(switching_current({0.0, 0.0}, {1.0, 1.0}, 0.5) == 0.0);

  // per-unit gain: half the dc base over the peak ac base
  CHECK(ConverterParams{}.k_sw == Approx(1.49419).epsilon(1e-4));
}

TEST_CASE("converter equilibrium balances source, loss, and switching power") {
  ConverterParams p;
  ConverterPhysicsState s;
  s.v_dc = p.v_dc_star;
  s.i_s = {0.5, 0.1};
  const AlphaBeta m = {0.6, -0.05};
  ConverterPhysicsOutputs out;
  // construct the consistent filter/grid boundary
  const AlphaBeta v_s = switching_voltage(m, s.v_dc, p.k_sw);
  s.v = {v_s.x1 - p.r_f * s.i_s.x1, v_s.x2 - p.r_f * s.i_s.x2};
  const double i_x = switching_current(m, s.i_s, p.k_sw);
  const double i_dc_needed = p.g_dc * s.v_dc + i_x;
  s.i_tau = i_dc_needed;
  const auto d = converter_derivatives(s, p, m, i_dc_needed, s.i_s, out);
  CHECK(out.i_dc == Approx(p.g_dc * p.v_dc_star + i_x));
  CHECK(d.d_v_dc == Approx(0.0).margin(1e-14));
  CHECK(d.d_i_tau == Approx(0.0).margin(1e-14));
  CHECK(d.d_i_s.x1 == Approx(0.0).margin(1e-10));
  CHECK(d.d_i_s.x2 == Approx(0.0).margin(1e-10));
  CHECK(d.d_v.x1 == Approx(0.0).margin(1e-14));
  CHECK(d.d_v.x2 == Approx(0.0).margin(1e-14));
}

TEST_CASE("idle dc link discharges through its own conductance") {
  ConverterParams p;
  // state vector: [v_dc, i_tau, i_s, v] with m = 0 and no grid exchange
  std::vector<double> x = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  auto rhs = [&](double, const double* s, double* d) {
    ConverterPhysicsState st;
    st.v_dc = s[0];
    st.i_tau = s[1];
    st.i_s = {s[2], s[3]};
    st.v = {s[4], s[5]};
    ConverterPhysicsOutputs out;
    const auto dv = converter_derivatives(st, p, {0.0, 0.0}, 0.0, {0.0, 0.0}, out);
    d[0] = dv.d_v_dc;
    d[1] = dv.d_i_tau;
    d[2] = dv.d_i_s.x1;
    d[3] = dv.d_i_s.x2;
    d[4] = dv.d_v.x1;
    d[5] = dv.d_v.x2;
  };
  SolverConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_end = 2.0;
  auto out = integrate(rhs, x, {}, cfg, [](const Event&) {}, [](double, const std::vector<double>&) {});
  REQUIRE(out.status == RunStatus::completed);
  const double tau = p.c_dc / p.g_dc;  // about 9.64 s
  CHECK(tau == Approx(9.6385).epsilon(1e-3));
  CHECK(x[0] == Approx(std::exp(-2.0 / tau)).margin(1e-8));
  CHECK(x[2] == 0.0);  // ac side never woke up
}

TEST_CASE("dc link energy balance is an algebraic identity") {
  ConverterParams p;
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int t = 0; t < 100; ++t) {
    ConverterPhysicsState s;
    s.v_dc = 0.2 + std::abs(dist(gen));
    s.i_tau = dist(gen);
    s.i_s = {dist(gen), dist(gen)};
    s.v = {dist(gen), dist(gen)};
    const AlphaBeta m = {dist(gen), dist(gen)};
    ConverterPhysicsOutputs out;
    const auto d = converter_derivatives(s, p, m, dist(gen), {dist(gen), dist(gen)}, out);
    // d/dt (1/2 C v^2) = v (i_dc - G v - i_x)
    const double lhs = p.c_dc * s.v_dc * d.d_v_dc;
    const double rhs = s.v_dc * (out.i_dc - p.g_dc * s.v_dc - out.i_x);
    CHECK(lhs == Approx(rhs).margin(1e-12));
    CHECK(std::abs(out.i_dc) <= p.i_dc_max + 1e-15);
  }
}

TEST_CASE("dc source limit can be disabled for studies") {
  ConverterParams p;
  p.dc_saturation = false;
  ConverterPhysicsState s;
  s.v_dc = 1.0;
  s.i_tau = 3.0;
  ConverterPhysicsOutputs out;
  converter_derivatives(s, p, {0.0, 0.0}, 0.0, {0.0, 0.0}, out);
  CHECK(out.i_dc == Approx(3.0));
}

TEST_CASE("converter parameter validation") {
  ConverterParams p;
  CHECK_NOTHROW(p.validate());
  p.c_dc = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.i_dc_max = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(dc_collapse_threshold == Approx(0.3));
}
