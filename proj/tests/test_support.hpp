#pragma once

// Shared fixtures and independent reference computations for the tests.
// Nothing in here calls the Newton solver.

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "ropf/netmodel.hpp"
#include "ropf/powerflow.hpp"

namespace ropf::testing {

inline std::string fixture_path() { return std::string(ROPF_DATA_DIR) + "/ieee14.case"; }

/// Slack at bus 1, one line to bus 2, an optional load at bus 2.
inline NetworkCase two_bus(double r, double x, double p_load, double q_load, double b = 0.0) {
  NetworkCase nc;
  nc.base_mva = 100.0;
  nc.buses = {{1, BusKind::slack, 0.95, 1.05, 1.0}, {2, BusKind::load, 0.95, 1.05, 1.0}};
  Branch br;
  br.from_bus = 1;
  br.to_bus = 2;
  br.resistance = r;
  br.reactance = x;
  br.charging_susceptance = b;
  nc.branches = {br};
  if (p_load != 0.0 || q_load != 0.0) nc.loads = {{2, p_load, q_load}};
  return nc;
}

/// Closed form for the lossless two-bus line with a pure real load:
/// V2 = cos(d2), sin(2 d2) = -2 X P (high-voltage branch).
struct TwoBusAnalytic {
  double v2;
  double delta2;
};

inline TwoBusAnalytic two_bus_lossless(double x, double p_load) {
  const double delta2 = -0.5 * std::asin(2.0 * x * p_load);
  return {std::cos(delta2), delta2};
}

/// Receiving-end voltage of a two-bus line fed at 1.0 p.u., by fixed-point
/// iteration on V2 = V1 - Z * conj(S_load / V2). Returns the converged V2 and
/// the series current.
struct TwoBusFixedPoint {
  std::complex<double> v2;
  std::complex<double> current;
};

inline TwoBusFixedPoint two_bus_fixed_point(double r, double x, double p_load, double q_load) {
  const std::complex<double> z(r, x), v1(1.0, 0.0), s(p_load, q_load);
  std::complex<double> v2 = v1;
  for (int k = 0; k < 10000; ++k) {
    const auto next = v1 - z * std::conj(s / v2);
    if (std::abs(next - v2) < 1e-15) {
      v2 = next;
      break;
    }
    v2 = next;
  }
  return {v2, (v1 - v2) / z};
}

struct RandomCaseOptions {
  bool shunts = true;       // line charging
  bool transformers = true; // off-nominal taps
  bool resistance = true;
};

/// Random connected network: a random spanning tree plus a few extra edges,
/// light loads, slack at the first bus.
inline NetworkCase random_case(std::mt19937_64& rng, std::size_t n,
                               RandomCaseOptions opt = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetworkCase nc;
  nc.base_mva = 100.0;
  for (std::size_t i = 0; i < n; ++i)
    nc.buses.push_back({static_cast<int>(i + 1), i == 0 ? BusKind::slack : BusKind::load, 0.9,
                        1.1, 1.0});
  auto make_branch = [&](int f, int t) {
    Branch br;
    br.from_bus = f;
    br.to_bus = t;
    br.reactance = 0.05 + 0.25 * u(rng);
    br.resistance = opt.resistance ? 0.01 + 0.08 * u(rng) : 0.0;
    if (opt.transformers && u(rng) < 0.25) {
      br.transformer = true;
      br.tap_ratio = 0.9 + 0.2 * u(rng);
    } else if (opt.shunts) {
      br.charging_susceptance = 0.04 * u(rng);
    }
    return br;
  };
  for (std::size_t i = 1; i < n; ++i) {
    const auto parent = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    nc.branches.push_back(make_branch(parent + 1, static_cast<int>(i + 1)));
  }
  for (std::size_t extra = 0; extra < n / 2; ++extra) {
    const auto a = std::uniform_int_distribution<int>(1, static_cast<int>(n))(rng);
    const auto b = std::uniform_int_distribution<int>(1, static_cast<int>(n))(rng);
    if (a != b) nc.branches.push_back(make_branch(a, b));
  }
  for (std::size_t i = 1; i < n; ++i)
    if (u(rng) < 0.8) nc.loads.push_back({static_cast<int>(i + 1), 0.3 * u(rng), 0.1 * u(rng)});
  return nc;
}

/// Injection spec with the case slack, every other bus PQ and the loads as
/// negative injections.
inline InjectionSpec load_only_spec(const NetworkCase& nc) {
  auto spec = InjectionSpec::all_pq(nc.bus_count());
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    if (nc.buses[i].kind == BusKind::slack) spec.role[i] = BusRole::slack;
    spec.v_set[i] = nc.buses[i].v_set;
  }
  for (const auto& l : nc.loads) {
    spec.p[nc.bus_index(l.bus)] -= l.p;
    spec.q[nc.bus_index(l.bus)] -= l.q;
  }
  return spec;
}

/// Complex power injections S = V * conj(Y V) in rectangular form, as an
/// independent check on the polar formulas.
inline std::vector<std::complex<double>> rectangular_injections(
    const std::vector<BusState>& states, const AdmittanceMatrix& y) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = std::polar(states[i].v, states[i].delta);
  const Eigen::VectorXcd current = y.entries * v;
  std::vector<std::complex<double>> s(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    s[i] = v[static_cast<Eigen::Index>(i)] * std::conj(current[static_cast<Eigen::Index>(i)]);
  return s;
}

}  // namespace ropf::testing
