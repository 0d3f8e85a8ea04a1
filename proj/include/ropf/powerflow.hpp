#pragma once

// Newton-Raphson AC power flow in polar coordinates.
//
// Injections follow the standard polar form
//   P_i =  V_i * sum_j V_j |Y_ij| cos(theta_ij + delta_j - delta_i)
//   Q_i = -V_i * sum_j V_j |Y_ij| sin(theta_ij + delta_j - delta_i)

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ropf/netmodel.hpp"

namespace ropf {

struct BusState {
  double v = 1.0;
  double delta = 0.0;  // radians
};

enum class BusRole { slack, pq, pv };

/// Specified net injections (generation minus demand) per bus, in case bus
/// order. `v_set` is read for slack and PV buses. `q_min`/`q_max` bound the
/// net reactive injection of PV buses when limit enforcement is on.
struct InjectionSpec {
  std::vector<BusRole> role;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> v_set;
  std::vector<double> q_min;
  std::vector<double> q_max;

  static InjectionSpec all_pq(std::size_t n) {
    InjectionSpec s;
    s.role.assign(n, BusRole::pq);
    s.p.assign(n, 0.0);
    s.q.assign(n, 0.0);
    s.v_set.assign(n, 1.0);
    s.q_min.assign(n, -std::numeric_limits<double>::infinity());
    s.q_max.assign(n, std::numeric_limits<double>::infinity());
    return s;
  }

  std::size_t size() const { return role.size(); }
};

struct SolverOptions {
  double tolerance = 1e-6;
  int max_iterations = 50;
  bool flat_start = true;
  /// Used when flat_start is false; must hold one state per bus.
  std::vector<BusState> initial;
  /// Convert PV buses to PQ at the violated limit and re-solve.
  bool enforce_q_limits = true;
};

enum class SolveStatus { converged, max_iterations, singular_jacobian, diverged };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::singular_jacobian: return "singular_jacobian";
    case SolveStatus::diverged: return "diverged";
  }
  return "diverged";
}

struct PowerFlowSolution {
  std::vector<BusState> states;
  int iterations = 0;
  double max_mismatch = std::numeric_limits<double>::infinity();
  bool converged = false;
  SolveStatus status = SolveStatus::max_iterations;
  double p_slack = 0.0;
  double q_slack = 0.0;
  double total_loss = 0.0;
  /// Computed net injection at every bus.
  std::vector<std::complex<double>> injections;
  /// Roles after any PV-to-PQ switching.
  std::vector<BusRole> roles;
};

/// Net complex power injected at every bus for the given voltages.
inline std::vector<std::complex<double>> bus_injections(const std::vector<BusState>& states,
                                                        const AdmittanceMatrix& y) {
  const std::size_t n = states.size();
  std::vector<std::complex<double>> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 0.0, q = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto yik = y(i, k);
      if (yik == 0.0) continue;
      const double mag = std::abs(yik);
      const double ang = std::arg(yik) + states[k].delta - states[i].delta;
      p += states[k].v * mag * std::cos(ang);
      q -= states[k].v * mag * std::sin(ang);
    }
    s[i] = {states[i].v * p, states[i].v * q};
  }
  return s;
}

/// Per-bus residuals spec - calculated. Entries for omitted constraints (slack
/// P and Q, PV Q) are zero.
struct Residuals {
  Eigen::VectorXd dp;
  Eigen::VectorXd dq;

  double max_abs() const {
    double m = 0.0;
    if (dp.size()) m = std::max(m, dp.cwiseAbs().maxCoeff());
    if (dq.size()) m = std::max(m, dq.cwiseAbs().maxCoeff());
    return m;
  }
};

inline Residuals compute_mismatch(const std::vector<BusState>& states, const InjectionSpec& spec,
                                  const AdmittanceMatrix& y) {
  const std::size_t n = states.size();
  if (spec.size() != n || y.size() != n)
    throw std::invalid_argument("compute_mismatch: dimension mismatch");
  const auto s = bus_injections(states, y);
  Residuals r{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (spec.role[i] == BusRole::slack) continue;
    r.dp(ii) = spec.p[i] - s[i].real();
    if (spec.role[i] == BusRole::pq) r.dq(ii) = spec.q[i] - s[i].imag();
  }
  return r;
}

/// Ordering of Newton unknowns: angles of every non-slack bus, then
/// magnitudes of every PQ bus. Equations use the same ordering (P rows, then
/// Q rows).
struct NewtonLayout {
  std::vector<std::size_t> angle_buses;
  std::vector<std::size_t> magnitude_buses;

  explicit NewtonLayout(const std::vector<BusRole>& roles) {
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (roles[i] != BusRole::slack) angle_buses.push_back(i);
      if (roles[i] == BusRole::pq) magnitude_buses.push_back(i);
    }
  }

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(angle_buses.size() + magnitude_buses.size());
  }

  Eigen::VectorXd pack(const std::vector<BusState>& states) const {
    Eigen::VectorXd x(size());
    Eigen::Index k = 0;
    for (auto i : angle_buses) x(k++) = states[i].delta;
    for (auto i : magnitude_buses) x(k++) = states[i].v;
    return x;
  }

  void unpack(const Eigen::VectorXd& x, std::vector<BusState>& states) const {
    Eigen::Index k = 0;
    for (auto i : angle_buses) states[i].delta = x(k++);
    for (auto i : magnitude_buses) states[i].v = x(k++);
  }

  Eigen::VectorXd pack(const Residuals& r) const {
    Eigen::VectorXd f(size());
    Eigen::Index k = 0;
    for (auto i : angle_buses) f(k++) = r.dp(static_cast<Eigen::Index>(i));
    for (auto i : magnitude_buses) f(k++) = r.dq(static_cast<Eigen::Index>(i));
    return f;
  }
};

/// Analytic Jacobian of the calculated injections (P rows for non-slack
/// buses, Q rows for PQ buses) with respect to the Newton unknowns.
inline Eigen::MatrixXd power_jacobian(const std::vector<BusState>& states,
                                      const std::vector<BusRole>& roles,
                                      const AdmittanceMatrix& y) {
  const NewtonLayout layout(roles);
  const auto s = bus_injections(states, y);
  const std::size_t n = states.size();

  // Column position of each bus's angle / magnitude unknown, or -1.
  std::vector<Eigen::Index> acol(n, -1), mcol(n, -1);
  Eigen::Index k = 0;
  for (auto i : layout.angle_buses) acol[i] = k++;
  for (auto i : layout.magnitude_buses) mcol[i] = k++;

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  auto fill_row = [&](Eigen::Index row, std::size_t i, bool p_row) {
    const double vi = states[i].v;
    const double gii = y(i, i).real();
    const double bii = y(i, i).imag();
    const double pi = s[i].real();
    const double qi = s[i].imag();
    for (std::size_t m = 0; m < n; ++m) {
      if (acol[m] < 0 && mcol[m] < 0) continue;
      double d_delta = 0.0, d_v = 0.0;
      if (m == i) {
        d_delta = p_row ? -qi - vi * vi * bii : pi - vi * vi * gii;
        d_v = p_row ? pi / vi + vi * gii : qi / vi - vi * bii;
      } else {
        const auto yim = y(i, m);
        if (yim == 0.0) continue;
        const double mag = std::abs(yim);
        const double ang = std::arg(yim) + states[m].delta - states[i].delta;
        const double c = std::cos(ang), sn = std::sin(ang);
        d_delta = p_row ? -vi * states[m].v * mag * sn : -vi * states[m].v * mag * c;
        d_v = p_row ? vi * mag * c : -vi * mag * sn;
      }
      if (acol[m] >= 0) jac(row, acol[m]) = d_delta;
      if (mcol[m] >= 0) jac(row, mcol[m]) = d_v;
    }
  };

  Eigen::Index row = 0;
  for (auto i : layout.angle_buses) fill_row(row++, i, true);
  for (auto i : layout.magnitude_buses) fill_row(row++, i, false);
  return jac;
}

namespace detail {

inline void newton(std::vector<BusState>& states, const InjectionSpec& spec,
                   const std::vector<BusRole>& roles, const AdmittanceMatrix& y,
                   const SolverOptions& opts, PowerFlowSolution& sol) {
  InjectionSpec active = spec;
  active.role = roles;
  const NewtonLayout layout(roles);
  for (;;) {
    const auto r = compute_mismatch(states, active, y);
    sol.max_mismatch = r.max_abs();
    if (!std::isfinite(sol.max_mismatch)) {
      sol.status = SolveStatus::diverged;
      return;
    }
    if (sol.max_mismatch <= opts.tolerance) {
      sol.status = SolveStatus::converged;
      return;
    }
    if (sol.iterations >= opts.max_iterations) {
      sol.status = SolveStatus::max_iterations;
      return;
    }
    const Eigen::MatrixXd jac = power_jacobian(states, roles, y);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) {
      sol.status = SolveStatus::singular_jacobian;
      return;
    }
    const Eigen::VectorXd dx = lu.solve(layout.pack(r));
    layout.unpack(layout.pack(states) + dx, states);
    ++sol.iterations;
    for (const auto& st : states)
      if (!std::isfinite(st.v) || !std::isfinite(st.delta) || st.v <= 0.0) {
        sol.status = SolveStatus::diverged;
        return;
      }
  }
}

}  // namespace detail

/// Solve the load-flow equations for the given injections. Never throws on
/// numerical failure: non-convergence comes back with converged == false and
/// the last iterate.
inline PowerFlowSolution solve_power_flow(const AdmittanceMatrix& y, const InjectionSpec& spec,
                                          const SolverOptions& opts = {}) {
  const std::size_t n = y.size();
  if (spec.size() != n || spec.p.size() != n || spec.q.size() != n || spec.v_set.size() != n)
    throw std::invalid_argument("solve_power_flow: injection spec does not match the network");
  if (!(opts.tolerance > 0.0) || opts.max_iterations < 1)
    throw std::invalid_argument("solve_power_flow: invalid solver options");
  if (std::count(spec.role.begin(), spec.role.end(), BusRole::slack) != 1)
    throw std::invalid_argument("solve_power_flow: exactly one slack bus is required");

  PowerFlowSolution sol;
  sol.roles = spec.role;
  if (!opts.flat_start && opts.initial.size() == n) {
    sol.states = opts.initial;
  } else {
    sol.states.assign(n, BusState{});
  }
  for (std::size_t i = 0; i < n; ++i)
    if (spec.role[i] != BusRole::pq) sol.states[i].v = spec.v_set[i];

  const bool have_limits = spec.q_min.size() == n && spec.q_max.size() == n;
  InjectionSpec working = spec;
  for (int round = 0;; ++round) {
    detail::newton(sol.states, working, sol.roles, y, opts, sol);
    if (sol.status != SolveStatus::converged || !opts.enforce_q_limits || !have_limits) break;

    const auto s = bus_injections(sol.states, y);
    bool switched = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (sol.roles[i] != BusRole::pv) continue;
      const double qi = s[i].imag();
      if (qi > spec.q_max[i] + opts.tolerance || qi < spec.q_min[i] - opts.tolerance) {
        sol.roles[i] = BusRole::pq;
        working.q[i] = std::clamp(qi, spec.q_min[i], spec.q_max[i]);
        switched = true;
      }
    }
    if (!switched || round > static_cast<int>(n)) break;
  }

  sol.converged = sol.status == SolveStatus::converged;
  sol.injections = bus_injections(sol.states, y);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += sol.injections[i].real();
    if (spec.role[i] == BusRole::slack) {
      sol.p_slack = sol.injections[i].real();
      sol.q_slack = sol.injections[i].imag();
    }
  }
  sol.total_loss = loss;
  return sol;
}

inline PowerFlowSolution solve_power_flow(const NetworkCase& nc, const InjectionSpec& spec,
                                          const SolverOptions& opts = {}) {
  return solve_power_flow(build_admittance(nc), spec, opts);
}

/// Series I^2 R loss summed over branches. Line charging and ideal tap
/// changers are lossless.
inline double branch_losses(const std::vector<BusState>& states, const NetworkCase& nc) {
  double loss = 0.0;
  for (const auto& br : nc.branches) {
    const auto& f = states[nc.bus_index(br.from_bus)];
    const auto& t = states[nc.bus_index(br.to_bus)];
    const auto vf = std::polar(f.v, f.delta);
    const auto vt = std::polar(t.v, t.delta);
    const double a = br.transformer ? br.tap_ratio : 1.0;
    const auto current = (vf / a - vt) * br.series_admittance();
    loss += std::norm(current) * br.resistance;
  }
  return loss;
}

/// Real power loss of a solved network, as the sum of net injections. The
/// branch-by-branch I^2 R sum must agree to 1e-8 p.u.; a disagreement means
/// the admittance model and the branch model have drifted apart.
inline double total_losses(const PowerFlowSolution& sol, const NetworkCase& nc) {
  const auto s = bus_injections(sol.states, build_admittance(nc));
  double by_injection = 0.0;
  for (const auto& si : s) by_injection += si.real();
  const double by_branch = branch_losses(sol.states, nc);
  if (std::abs(by_injection - by_branch) > 1e-8)
    throw std::logic_error("loss cross-check failed: injections " + std::to_string(by_injection) +
                           " vs branches " + std::to_string(by_branch));
  return by_injection;
}

}  // namespace ropf
