#include <catch2/catch_amalgamated.hpp>

#include <lowinertia/machine.hpp>
#include <lowinertia/solver.hpp>

#include <cmath>
#include <random>

using namespace lowinertia;
using Catch::Approx;

namespace {

struct Rig {
  MachineModel machine;
  StateRegistry reg;
  std::vector<double> x, dx;

  explicit Rig(const MachineParams& p = MachineParams::round_rotor_100mva()) : machine(p) {
    machine.register_states(reg, "sm");
    x.assign(reg.size(), 0.0);
    dx.assign(reg.size(), 0.0);
  }
};

}  // namespace

TEST_CASE("flux-current map is a bijection") {
  Rig rig;
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    const Dq i_m = {dist(gen), dist(gen)};
    const double i_fd = dist(gen), i_1d = dist(gen), i_1q = dist(gen), i_2q = dist(gen);
    const auto f = rig.machine.fluxes_from_currents(i_m, i_fd, i_1d, i_1q, i_2q);
    rig.x[MachineModel::s_psi_d] = f[0];
    rig.x[MachineModel::s_psi_q] = f[1];
    rig.x[MachineModel::s_psi_fd] = f[2];
    rig.x[MachineModel::s_psi_1d] = f[3];
    rig.x[MachineModel::s_psi_1q] = f[4];
    rig.x[MachineModel::s_psi_2q] = f[5];
    const auto o = rig.machine.outputs(rig.x.data());
    CHECK(o.i_motor.x1 == Approx(i_m.x1).margin(1e-12));
    CHECK(o.i_motor.x2 == Approx(i_m.x2).margin(1e-12));
    CHECK(o.i_fd == Approx(i_fd).margin(1e-12));
    CHECK(o.i_1d == Approx(i_1d).margin(1e-12));
    CHECK(o.i_1q == Approx(i_1q).margin(1e-12));
    CHECK(o.i_2q == Approx(i_2q).margin(1e-12));
  }
}

TEST_CASE("zero fluxes and zero inputs give zero flux derivatives and torque") {
  MachineParams p;
  p.exciter_enabled = false;  // field voltage frozen (at zero by default)
  Rig rig(p);
  rig.x[MachineModel::s_omega] = 1.0;
  const auto o = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{0.0, 0.0});
  CHECK(o.t_e == 0.0);
  for (int s : {MachineModel::s_psi_d, MachineModel::s_psi_q, MachineModel::s_psi_fd,
                MachineModel::s_psi_1d, MachineModel::s_psi_1q, MachineModel::s_psi_2q})
    CHECK(rig.dx[s] == Approx(0.0).margin(1e-15));
  CHECK(rig.dx[MachineModel::s_omega] == Approx(0.0).margin(1e-15));
  CHECK(rig.dx[MachineModel::s_theta] == Approx(omega_base));
}

TEST_CASE("torque balance freezes the speed") {
  Rig rig;
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  for (int s = MachineModel::s_psi_d; s <= MachineModel::s_psi_2q; ++s) rig.x[s] = dist(gen);
  const double w = 1.01;
  rig.x[MachineModel::s_omega] = w;
  const auto o0 = rig.machine.outputs(rig.x.data());
  rig.x[MachineModel::s_p_tau] = o0.t_e * w;  // T_m = p_tau / w = T_e
  rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{0.3, 0.9});
  CHECK(rig.dx[MachineModel::s_omega] == Approx(0.0).margin(1e-14));
}

TEST_CASE("rotor energy balance holds by construction") {
  Rig rig;
  std::mt19937 gen(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : rig.x) v = dist(gen);
  rig.x[MachineModel::s_omega] = 0.97;
  const auto o = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{dist(gen), dist(gen)});
  const double w = rig.x[MachineModel::s_omega];
  // d/dt (H w^2) = w (T_m - T_e - T_f)
  const double lhs = 2.0 * rig.machine.params().h * w * rig.dx[MachineModel::s_omega];
  const double rhs = w * (o.t_m - o.t_e - rig.machine.params().d_f * w);
  CHECK(lhs == Approx(rhs).margin(1e-12));
}

TEST_CASE("governor raises turbine power against a speed dip") {
  Rig rig;
  rig.machine.set_p_star(0.0);
  rig.x[MachineModel::s_omega] = 0.99;  // 0.01 pu below nominal
  rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{0.0, 0.0});
  // d_p = 100 -> requested power 1.0 pu, first-order lag tau_g = 5 s
  CHECK(rig.dx[MachineModel::s_p_tau] == Approx(1.0 / rig.machine.params().tau_g));

  rig.machine.set_p_star(0.4);
  rig.x[MachineModel::s_omega] = 1.0;
  rig.x[MachineModel::s_p_tau] = 0.4;
  rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{0.0, 0.0});
  CHECK(rig.dx[MachineModel::s_p_tau] == Approx(0.0).margin(1e-15));
}

TEST_CASE("steady-state backsolve zeroes the rotating-sense residual") {
  for (double w : {1.0, 1.002, 0.997}) {
    Rig rig;
    const AlphaBeta v = {1.0, 0.2};
    const AlphaBeta i_gen = {0.5, -0.1};
    rig.machine.initialize(rig.x.data(), v, i_gen, w);
    const auto o = rig.machine.outputs(rig.x.data());
    rig.machine.set_p_star(w * o.t_e - rig.machine.params().d_p * (1.0 - w));

    // terminal voltage rotates with the synchronous speed; at t=0 it is v
    auto rhs = [&](double t, const double* x, double* dx) {
      const double th = w * omega_base * t;
      const AlphaBeta vt = {v.x1 * std::cos(th) - v.x2 * std::sin(th),
                            v.x1 * std::sin(th) + v.x2 * std::cos(th)};
      rig.machine.rhs(x, dx, vt);
    };
    CHECK(steady_state_residual(rhs, rig.x, rig.reg, w, omega_base) < 1e-9);

    // the injection reported at t=0 is the generator current phasor
    std::vector<double> dx(rig.reg.size());
    const AlphaBeta inj = rig.machine.rhs(rig.x.data(), dx.data(), v);
    CHECK(inj.x1 == Approx(i_gen.x1).margin(1e-12));
    CHECK(inj.x2 == Approx(i_gen.x2).margin(1e-12));
  }
}

TEST_CASE("voltage regulator pushes the field the right way") {
  Rig rig;
  rig.machine.initialize(rig.x.data(), {1.0, 0.0}, {0.5, 0.0}, 1.0);
  const auto o_eq = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});

  rig.x[MachineModel::s_v_m] -= 0.01;  // measured voltage sags
  const auto o_low = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});
  CHECK(o_low.e_fd > o_eq.e_fd + 1.0);  // K_A = 200 on a 0.01 sag

  rig.x[MachineModel::s_v_m] += 0.05;  // now above the reference
  const auto o_high = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});
  CHECK(o_high.e_fd < o_eq.e_fd);
  CHECK(o_high.e_fd >= -rig.machine.params().e_fd_max);
}

TEST_CASE("stabilizer blocks dc and clamps large swings") {
  Rig rig;
  rig.machine.set_v_ref(1.0);
  rig.x[MachineModel::s_omega] = 1.005;
  rig.x[MachineModel::s_v_m] = 1.0;

  // dc fixed point of the stabilizer chain: washout state = gained input,
  // lead-lag states zero -> output zero
  const auto& p = rig.machine.params();
  rig.x[MachineModel::s_pss_w] = p.k_pss * (rig.x[MachineModel::s_omega] - 1.0);
  rig.x[MachineModel::s_pss_1] = 0.0;
  rig.x[MachineModel::s_pss_2] = 0.0;
  auto o = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});
  CHECK(o.v_pss == Approx(0.0).margin(1e-12));
  CHECK(rig.dx[MachineModel::s_pss_w] == Approx(0.0).margin(1e-12));
  CHECK(rig.dx[MachineModel::s_pss_1] == Approx(0.0).margin(1e-12));
  CHECK(rig.dx[MachineModel::s_pss_2] == Approx(0.0).margin(1e-12));

  // instantaneous feedthrough: gain k * (T_lead/T_lag)^2 = 10 * 16, clamped
  rig.x[MachineModel::s_pss_w] = 0.0;
  rig.x[MachineModel::s_omega] = 1.001;
  o = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});
  CHECK(o.v_pss == Approx(p.v_pss_max));  // 0.16 clamped to 0.1
  rig.x[MachineModel::s_omega] = 1.0001;
  o = rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{1.0, 0.0});
  CHECK(o.v_pss == Approx(0.016));
}

TEST_CASE("open damper windings reduce to the classical model") {
  MachineParams p;
  p.dampers_enabled = false;
  Rig rig(p);
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : rig.x) v = dist(gen);
  rig.x[MachineModel::s_omega] = 1.0;

  const auto o = rig.machine.outputs(rig.x.data());
  CHECK(o.i_1d == 0.0);
  CHECK(o.i_1q == 0.0);
  CHECK(o.i_2q == 0.0);
  CHECK(o.i_motor.x2 == Approx(rig.x[MachineModel::s_psi_q] / p.l_q()));

  rig.machine.dq_derivatives(rig.x.data(), rig.dx.data(), Dq{0.5, 0.5});
  CHECK(rig.dx[MachineModel::s_psi_1d] == 0.0);
  CHECK(rig.dx[MachineModel::s_psi_1q] == 0.0);
  CHECK(rig.dx[MachineModel::s_psi_2q] == 0.0);

  // two-winding d-axis bijection
  const Dq i_m = {0.7, -0.4};
  const double i_fd = 1.1;
  const auto f = rig.machine.fluxes_from_currents(i_m, i_fd, 0.0, 0.0, 0.0);
  rig.x[MachineModel::s_psi_d] = f[0];
  rig.x[MachineModel::s_psi_q] = f[1];
  rig.x[MachineModel::s_psi_fd] = f[2];
  const auto o2 = rig.machine.outputs(rig.x.data());
  CHECK(o2.i_motor.x1 == Approx(i_m.x1).margin(1e-12));
  CHECK(o2.i_fd == Approx(i_fd).margin(1e-12));
}

TEST_CASE("machine parameter validation rejects non-physical sets") {
  MachineParams p;
  p.h = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.l_fd = -1.64;  // drives the d-axis matrix indefinite
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  CHECK_NOTHROW(p.validate());
}
