#pragma once

// Steady-state initialization: a droop-slack power flow in rectangular phasor
// coordinates. There is no slack bus; instead the synchronous speed w is an
// unknown and every device contributes its steady-state frequency/power
// characteristic, so the pre-disturbance operating point already reflects
// how the units share the load. The phasor equations are exactly the rotating
// fixed point of the dynamic network model, which is what makes the computed
// point land on a machine-precision equilibrium of the full simulation.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "frames.hpp"
#include "gfc_controls.hpp"
#include "machine.hpp"
#include "network.hpp"

namespace lowinertia {

struct PowerFlowDevice {
  DeviceKind kind = DeviceKind::sm;
  int bus = 0;          // terminal bus (machine) / filter bus (converter)
  int grid_branch = -1; // series branch carrying the measured grid current (converters)
  double p_star = 0.0;
  double q_star = 0.0;
  double v_mag = 1.0;   // regulated terminal voltage magnitude

  // machine characteristic
  double r_s = 0.0, d_p = 0.0, d_f = 0.0;

  // converter characteristics
  double d_omega = 0.0;   // droop
  double vsm_d_p = 0.0;   // virtual machine damping
  double k_dc = 0.0, k_theta = 1.0, v_dc_star = 1.0;  // matching
  double eta = 0.0, alpha = 0.0;                      // virtual oscillator
  double r_f = 0.0, l_f = 0.0;                        // filter (for switch power)
};

[[nodiscard]] inline PowerFlowDevice pf_device(const MachineModel& m, int bus) {
  PowerFlowDevice d;
  d.kind = DeviceKind::sm;
  d.bus = bus;
  d.p_star = m.p_star();
  d.r_s = m.params().r_s;
  d.d_p = m.params().d_p;
  d.d_f = m.params().d_f;
  return d;
}

[[nodiscard]] inline PowerFlowDevice pf_device(const ConverterModel& c, int bus, int grid_branch) {
  PowerFlowDevice d;
  switch (c.strategy()) {
    case GfcStrategy::droop: d.kind = DeviceKind::droop; break;
    case GfcStrategy::vsm: d.kind = DeviceKind::vsm; break;
    case GfcStrategy::matching: d.kind = DeviceKind::matching; break;
    case GfcStrategy::dvoc: d.kind = DeviceKind::dvoc; break;
  }
  d.bus = bus;
  d.grid_branch = grid_branch;
  d.p_star = c.p_star();
  d.q_star = c.q_star();
  d.v_mag = c.gains().v_star;
  d.d_omega = c.reference_gains().d_omega;
  d.vsm_d_p = c.reference_gains().d_p;
  d.k_dc = c.gains().k_dc;
  d.k_theta = c.reference_gains().k_theta;
  d.v_dc_star = c.converter_params().v_dc_star;
  d.eta = c.reference_gains().eta;
  d.alpha = c.reference_gains().alpha;
  d.r_f = c.converter_params().r_f;
  d.l_f = c.converter_params().l_f;
  return d;
}

struct PowerFlowOptions {
  double tol = 1e-12;     // infinity norm of the residual
  int max_iterations = 60;
  double fd_step = 1e-7;  // forward-difference Jacobian perturbation
};

struct PowerFlowResult {
  std::vector<std::complex<double>> v;        // bus voltage phasors
  std::vector<std::complex<double>> i_dev;    // device injection phasors
  std::vector<std::complex<double>> i_series; // series branch current phasors
  std::vector<std::complex<double>> i_mag;    // magnetizing current phasors
  double w = 1.0;          // synchronous speed, pu
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct PfProblem {
  const NetworkModel& net;
  const std::vector<PowerFlowDevice>& devices;
  int nb, nd, m;

  PfProblem(const NetworkModel& n, const std::vector<PowerFlowDevice>& d)
      : net(n), devices(d), nb(n.n_buses()), nd(static_cast<int>(d.size())),
        m(2 * n.n_buses() + 2 * static_cast<int>(d.size()) + 1) {}

  [[nodiscard]] std::complex<double> bus_v(const Eigen::VectorXd& u, int b) const {
    return {u[2 * b], u[2 * b + 1]};
  }
  [[nodiscard]] std::complex<double> dev_i(const Eigen::VectorXd& u, int d) const {
    return {u[2 * nb + 2 * d], u[2 * nb + 2 * d + 1]};
  }
  [[nodiscard]] double dw(const Eigen::VectorXd& u) const { return u[m - 1]; }

  // branch current, oriented out of the device bus
  [[nodiscard]] std::complex<double> grid_current(const Eigen::VectorXd& u,
                                                  const PowerFlowDevice& d) const {
    const auto& br = net.series_branches().at(static_cast<std::size_t>(d.grid_branch));
    const double w = 1.0 + dw(u);
    const std::complex<double> z{br.r, w * br.l};
    std::complex<double> i = (bus_v(u, br.from) - bus_v(u, br.to)) / z;
    if (br.to == d.bus) i = -i;
    return i;
  }

  void residual(const Eigen::VectorXd& u, Eigen::VectorXd& f) const {
    const double w = 1.0 + dw(u);
    const std::complex<double> jw{0.0, w};

    // complex KCL per bus: device injection + branch inflow - shunt draw
    std::vector<std::complex<double>> kcl(static_cast<std::size_t>(nb));
    for (int b = 0; b < nb; ++b)
      kcl[b] = -(net.bus_conductance(b) + jw * net.bus_c(b)) * bus_v(u, b);
    for (const auto& br : net.series_branches()) {
      const std::complex<double> i = (bus_v(u, br.from) - bus_v(u, br.to)) /
                                     std::complex<double>{br.r, w * br.l};
      kcl[br.from] -= i;
      kcl[br.to] += i;
    }
    for (const auto& mg : net.mag_branches())
      kcl[mg.bus] -= bus_v(u, mg.bus) / std::complex<double>{0.0, w * mg.l};
    for (int d = 0; d < nd; ++d) kcl[devices[d].bus] += dev_i(u, d);

    for (int b = 0; b < nb; ++b) {
      f[2 * b] = kcl[b].real();
      f[2 * b + 1] = kcl[b].imag();
    }

    // device boundary conditions
    for (int d = 0; d < nd; ++d) {
      const auto& dev = devices[d];
      const std::complex<double> v = bus_v(u, dev.bus);
      const std::complex<double> i = dev_i(u, d);
      const double dwv = dw(u);
      double f1 = 0.0, f2 = 0.0;
      if (dev.kind == DeviceKind::sm) {
        // air-gap power matches the governor characteristic; AVR holds |V|
        const std::complex<double> s = v * std::conj(i);
        const double p_air = s.real() + dev.r_s * std::norm(i);
        f1 = p_air - (dev.p_star + dev.d_p * (1.0 - w) - dev.d_f * w * w);
        f2 = std::abs(v) - dev.v_mag;
      } else {
        const std::complex<double> i_o = grid_current(u, dev);
        const std::complex<double> s = v * std::conj(i_o);
        const double p = s.real(), q = s.imag();
        switch (dev.kind) {
          case DeviceKind::droop:
            f1 = p - (dev.p_star - dwv / dev.d_omega);
            f2 = std::abs(v) - dev.v_mag;
            break;
          case DeviceKind::vsm:
            f1 = p - (dev.p_star - dev.vsm_d_p * dwv);
            f2 = std::abs(v) - dev.v_mag;
            break;
          case DeviceKind::matching: {
            // dc balance at v_dc = w v_dc*/k_theta with switch power from i_s
            const std::complex<double> v_s =
                v + std::complex<double>{dev.r_f, w * dev.l_f} * i;
            const double p_sw = (v_s * std::conj(i)).real();
            const double v_dc = w * dev.v_dc_star / dev.k_theta;
            const double i_x = p_sw / v_dc;
            f1 = p - (dev.p_star - (dev.k_dc * dev.v_dc_star - i_x) * (v_dc - dev.v_dc_star));
            f2 = std::abs(v) - dev.v_mag;
            break;
          }
          case DeviceKind::dvoc: {
            const double n2 = std::norm(v);
            const double vs2 = dev.v_mag * dev.v_mag;
            f1 = p - n2 * (dev.p_star / vs2 - dwv / dev.eta);
            f2 = q - n2 * (dev.q_star / vs2 + dev.alpha * (vs2 - n2) / vs2);
            break;
          }
          default:
            throw std::logic_error("power flow: unsupported device kind");
        }
      }
      f[2 * nb + 2 * d] = f1;
      f[2 * nb + 2 * d + 1] = f2;
    }

    // angle reference: the first device terminal voltage is real
    f[m - 1] = u[2 * devices.front().bus + 1];
  }
};

}  // namespace detail

[[nodiscard]] inline PowerFlowResult solve_power_flow(const NetworkModel& net,
                                                      const std::vector<PowerFlowDevice>& devices,
                                                      const PowerFlowOptions& opt = {}) {
  if (devices.empty()) throw std::invalid_argument("power flow: no devices");
  for (const auto& d : devices) {
    if (d.bus < 0 || d.bus >= net.n_buses()) throw std::invalid_argument("power flow: bad bus");
    if (d.kind != DeviceKind::sm) {
      if (d.grid_branch < 0 || d.grid_branch >= net.n_series())
        throw std::invalid_argument("power flow: converter needs a grid branch");
      const auto& br = net.series_branches()[static_cast<std::size_t>(d.grid_branch)];
      if (br.from != d.bus && br.to != d.bus)
        throw std::invalid_argument("power flow: grid branch does not touch the device bus");
    }
  }

  detail::PfProblem pf(net, devices);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(pf.m);
  for (int b = 0; b < pf.nb; ++b) u[2 * b] = 1.0;  // flat start
  for (int d = 0; d < pf.nd; ++d) u[2 * pf.nb + 2 * d] = devices[d].p_star;

  Eigen::VectorXd f(pf.m), f_trial(pf.m), f_pert(pf.m);
  Eigen::MatrixXd jac(pf.m, pf.m);
  PowerFlowResult out;

  pf.residual(u, f);
  double fn = f.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < opt.max_iterations && fn > opt.tol; ++it) {
    for (int c = 0; c < pf.m; ++c) {
      const double h = opt.fd_step * std::max(1.0, std::abs(u[c]));
      const double saved = u[c];
      u[c] = saved + h;
      pf.residual(u, f_pert);
      u[c] = saved;
      jac.col(c) = (f_pert - f) / h;
    }
    const Eigen::VectorXd step = jac.partialPivLu().solve(-f);
    double lambda = 1.0;
    for (int half = 0; half < 8; ++half) {
      const Eigen::VectorXd u_trial = u + lambda * step;
      pf.residual(u_trial, f_trial);
      const double fn_trial = f_trial.lpNorm<Eigen::Infinity>();
      if (fn_trial < fn || fn_trial <= opt.tol) {
        u = u_trial;
        f = f_trial;
        fn = fn_trial;
        break;
      }
      lambda *= 0.5;
    }
  }

  out.converged = fn <= opt.tol;
  out.residual = fn;
  out.iterations = it;
  out.w = 1.0 + pf.dw(u);
  out.v.resize(static_cast<std::size_t>(pf.nb));
  for (int b = 0; b < pf.nb; ++b) out.v[b] = pf.bus_v(u, b);
  out.i_dev.resize(static_cast<std::size_t>(pf.nd));
  for (int d = 0; d < pf.nd; ++d) out.i_dev[d] = pf.dev_i(u, d);
  for (const auto& br : net.series_branches())
    out.i_series.push_back((out.v[br.from] - out.v[br.to]) /
                           std::complex<double>{br.r, out.w * br.l});
  for (const auto& mg : net.mag_branches())
    out.i_mag.push_back(out.v[mg.bus] / std::complex<double>{0.0, out.w * mg.l});
  return out;
}

// Writes the network slice of the state vector from a phasor solution: bus
// voltages and branch/magnetizing currents at t = 0.
inline void load_network_state(const NetworkModel& net, const PowerFlowResult& pf, double* x) {
  for (int b = 0; b < net.n_buses(); ++b) {
    x[net.bus_v_index(b)] = pf.v[b].real();
    x[net.bus_v_index(b) + 1] = pf.v[b].imag();
  }
  for (int k = 0; k < net.n_series(); ++k) {
    x[net.series_i_index(k)] = pf.i_series[k].real();
    x[net.series_i_index(k) + 1] = pf.i_series[k].imag();
  }
  for (std::size_t k = 0; k < net.mag_branches().size(); ++k) {
    x[net.mag_i_index(static_cast<int>(k))] = pf.i_mag[k].real();
    x[net.mag_i_index(static_cast<int>(k)) + 1] = pf.i_mag[k].imag();
  }
}

}  // namespace lowinertia
