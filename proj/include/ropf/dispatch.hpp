#pragma once

// Reactive optimal power flow: the penalized fitness over a power-flow solve,
// loss before and after compensation, the optimization run, and settlement
// of the resulting costs between generators and loads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropf/costmodel.hpp"
#include "ropf/netmodel.hpp"
#include "ropf/powerflow.hpp"
#include "ropf/pso.hpp"

namespace ropf {

/// Reactive output per costed generator and per compensator, p.u.
struct DecisionVector {
  std::vector<double> q_gen;
  std::vector<double> q_comp;

  std::vector<double> flatten() const {
    std::vector<double> x(q_gen);
    x.insert(x.end(), q_comp.begin(), q_comp.end());
    return x;
  }
};

struct PenaltyConfig {
  /// $/h per p.u.^2 of voltage-limit violation, summed over buses.
  double voltage_weight = 1e6;
  /// $/h added when the power flow does not converge.
  double nonconvergence_penalty = 1e9;
  /// Largest voltage-limit violation (p.u.) still reported as feasible.
  double feasibility_tolerance = 1e-3;
};

struct FitnessEvaluation {
  double fitness = std::numeric_limits<double>::infinity();
  ReactiveCostBreakdown cost;
  double voltage_penalty = 0.0;
  double max_voltage_violation = 0.0;
  int worst_bus = 0;
  bool converged = false;
  PowerFlowSolution flow;
};

/// The network prepared for repeated fitness evaluations. Immutable after
/// construction and safe to evaluate from several threads.
class RopfProblem {
 public:
  RopfProblem(NetworkCase nc, PenaltyConfig penalties, SolverOptions solver = {})
      : case_(std::move(nc)),
        penalties_(penalties),
        solver_(std::move(solver)),
        y_(build_admittance(case_)),
        gens_(costed_generators(case_)) {
    if (penalties_.voltage_weight < 0.0 || penalties_.nonconvergence_penalty < 0.0)
      throw std::invalid_argument("penalty weights must be >= 0");
    solver_.enforce_q_limits = false;
    for (auto g : gens_) {
      const auto& gen = case_.generators[g];
      bounds_.push_back({gen.q_min, gen.q_max});
    }
    for (const auto& c : case_.compensators) bounds_.push_back({c.q_min, c.q_max});
    for (std::size_t d = 0; d < bounds_.size(); ++d)
      if (bounds_[d].lo < bounds_[d].hi) free_dims_.push_back(d);
  }

  const NetworkCase& network() const { return case_; }
  const AdmittanceMatrix& admittance() const { return y_; }
  const PenaltyConfig& penalties() const { return penalties_; }
  const std::vector<std::size_t>& generators() const { return gens_; }
  std::size_t dimension() const { return bounds_.size(); }
  const pso::Bounds& bounds() const { return bounds_; }

  /// Dimensions with a nonempty range; the rest are pinned at their limit.
  const std::vector<std::size_t>& free_dimensions() const { return free_dims_; }

  pso::Bounds free_bounds() const {
    pso::Bounds out;
    for (auto d : free_dims_) out.push_back(bounds_[d]);
    return out;
  }

  DecisionVector expand(std::span<const double> free_values) const {
    std::vector<double> x(bounds_.size());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = bounds_[d].lo;
    for (std::size_t k = 0; k < free_dims_.size(); ++k) x[free_dims_[k]] = free_values[k];
    return unflatten(x);
  }

  DecisionVector unflatten(std::span<const double> x) const {
    if (x.size() != bounds_.size()) throw std::invalid_argument("decision vector size mismatch");
    DecisionVector d;
    d.q_gen.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(gens_.size()));
    d.q_comp.assign(x.begin() + static_cast<std::ptrdiff_t>(gens_.size()), x.end());
    return d;
  }

  /// Every non-slack bus as PQ, with generator and compensator reactive
  /// output taken from the decision.
  InjectionSpec injections(const DecisionVector& d) const {
    auto spec = base_injections();
    for (std::size_t k = 0; k < gens_.size(); ++k)
      spec.q[case_.bus_index(case_.generators[gens_[k]].bus)] += d.q_gen[k];
    for (std::size_t j = 0; j < case_.compensators.size(); ++j)
      spec.q[case_.bus_index(case_.compensators[j].bus)] += d.q_comp[j];
    return spec;
  }

  /// Uncompensated operating point: compensators off, generator buses
  /// voltage-controlled at their setpoint within their reactive limits.
  InjectionSpec baseline_injections() const {
    auto spec = base_injections();
    for (auto g : gens_) {
      const auto& gen = case_.generators[g];
      const auto i = case_.bus_index(gen.bus);
      if (spec.role[i] != BusRole::pv) {
        spec.role[i] = BusRole::pv;
        spec.q_min[i] = spec.q[i];
        spec.q_max[i] = spec.q[i];
      }
      spec.q_min[i] += gen.q_min;
      spec.q_max[i] += gen.q_max;
    }
    return spec;
  }

  FitnessEvaluation evaluate(const DecisionVector& d,
                             LimitPolicy policy = LimitPolicy::enforce) const {
    FitnessEvaluation ev;
    ev.cost = total_reactive_cost(case_, d.q_gen, d.q_comp, policy);
    ev.flow = solve_power_flow(y_, injections(d), solver_);
    ev.converged = ev.flow.converged;
    if (!ev.converged) {
      ev.max_voltage_violation = std::numeric_limits<double>::infinity();
      ev.fitness = ev.cost.total + penalties_.nonconvergence_penalty;
      return ev;
    }
    for (std::size_t i = 0; i < case_.bus_count(); ++i) {
      const auto& bus = case_.buses[i];
      const double v = ev.flow.states[i].v;
      const double over = std::max(0.0, v - bus.v_max);
      const double under = std::max(0.0, bus.v_min - v);
      ev.voltage_penalty += over * over + under * under;
      if (std::max(over, under) > ev.max_voltage_violation) {
        ev.max_voltage_violation = std::max(over, under);
        ev.worst_bus = bus.id;
      }
    }
    ev.voltage_penalty *= penalties_.voltage_weight;
    ev.fitness = ev.cost.total + ev.voltage_penalty;
    return ev;
  }

  bool feasible(const FitnessEvaluation& ev) const {
    return ev.converged && ev.max_voltage_violation <= penalties_.feasibility_tolerance;
  }

 private:
  InjectionSpec base_injections() const {
    const std::size_t n = case_.bus_count();
    auto spec = InjectionSpec::all_pq(n);
    for (std::size_t i = 0; i < n; ++i) {
      spec.v_set[i] = case_.buses[i].v_set;
      if (case_.buses[i].kind == BusKind::slack) spec.role[i] = BusRole::slack;
    }
    for (auto g : gens_) spec.p[case_.bus_index(case_.generators[g].bus)] += case_.generators[g].p_output;
    for (const auto& l : case_.loads) {
      const auto i = case_.bus_index(l.bus);
      spec.p[i] -= l.p;
      spec.q[i] -= l.q;
    }
    return spec;
  }

  NetworkCase case_;
  PenaltyConfig penalties_;
  SolverOptions solver_;
  AdmittanceMatrix y_;
  std::vector<std::size_t> gens_;
  pso::Bounds bounds_;
  std::vector<std::size_t> free_dims_;
};

inline double evaluate_fitness(const NetworkCase& nc, const DecisionVector& d,
                               const PenaltyConfig& penalties) {
  return RopfProblem(nc, penalties).evaluate(d).fitness;
}

/// A power flow the study cannot proceed without failed to converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BaselineResult {
  PowerFlowSolution flow;
  double loss = 0.0;
};

/// Loss before compensation. Throws if the uncompensated flow does not
/// converge.
inline BaselineResult baseline_loss(const NetworkCase& nc) {
  const RopfProblem problem(nc, PenaltyConfig{});
  SolverOptions opts;
  opts.enforce_q_limits = true;
  auto flow = solve_power_flow(problem.admittance(), problem.baseline_injections(), opts);
  if (!flow.converged)
    throw ConvergenceError(std::string("baseline power flow did not converge (") +
                             to_string(flow.status) + ")");
  const double loss = total_losses(flow, nc);
  return {std::move(flow), loss};
}

enum class SourceKind { generator, compensator };

struct SourceResult {
  std::string label;
  SourceKind kind = SourceKind::generator;
  int bus = 0;
  double q = 0.0;     // p.u.
  double cost = 0.0;  // $/h
};

struct RopfReport {
  std::vector<SourceResult> sources;
  double loss_before = 0.0;
  double loss_after = 0.0;
  /// Loss with generators at their optimized output and compensators off.
  std::optional<double> loss_before_generators_optimized;
  double total_payment = 0.0;
  double reactive_cost = 0.0;
  std::optional<double> duty_cost_cg;
  std::optional<double> load_allocated_cost;
  std::vector<double> convergence_history;
  double best_fitness = 0.0;
  bool converged = false;
  bool feasible = false;
  double max_voltage_violation = 0.0;
  std::string diagnostics;
  std::vector<BusState> voltages;
  std::vector<int> bus_ids;
  pso::PsoParams pso;
  PenaltyConfig penalties;
};

namespace detail {

inline RopfReport assemble_report(const RopfProblem& problem, const DecisionVector& d,
                                  const FitnessEvaluation& ev) {
  const auto& nc = problem.network();
  RopfReport r;
  for (std::size_t k = 0; k < problem.generators().size(); ++k) {
    const auto& g = nc.generators[problem.generators()[k]];
    r.sources.push_back({"G" + std::to_string(k + 1), SourceKind::generator, g.bus, d.q_gen[k],
                         ev.cost.generator[k]});
  }
  for (std::size_t j = 0; j < nc.compensators.size(); ++j) {
    const auto& c = nc.compensators[j];
    r.sources.push_back({"IC" + std::to_string(c.bus), SourceKind::compensator, c.bus,
                         d.q_comp[j], ev.cost.compensator[j]});
  }
  r.reactive_cost = ev.cost.total;
  r.total_payment = 0.0;
  for (const auto& s : r.sources) r.total_payment += s.cost;
  r.best_fitness = ev.fitness;
  r.converged = ev.converged;
  r.feasible = problem.feasible(ev);
  r.max_voltage_violation = ev.max_voltage_violation;
  r.voltages = ev.flow.states;
  for (const auto& b : nc.buses) r.bus_ids.push_back(b.id);
  r.penalties = problem.penalties();
  if (ev.converged) r.loss_after = total_losses(ev.flow, nc);
  if (!ev.converged)
    r.diagnostics = "no evaluated decision produced a converged power flow";
  else if (!r.feasible)
    r.diagnostics = "best decision violates voltage limits by " +
                    std::to_string(ev.max_voltage_violation) + " p.u. at bus " +
                    std::to_string(ev.worst_bus);
  return r;
}

}  // namespace detail

/// Price and describe a given dispatch without optimizing. price_only skips
/// the case's reactive limits, for dispatches recorded elsewhere.
inline RopfReport evaluate_dispatch(const NetworkCase& nc, const DecisionVector& d,
                                    const PenaltyConfig& penalties = {},
                                    LimitPolicy policy = LimitPolicy::enforce) {
  const RopfProblem problem(nc, penalties);
  return detail::assemble_report(problem, d, problem.evaluate(d, policy));
}

inline RopfReport run_ropf(const NetworkCase& nc, const pso::PsoParams& params,
                           const PenaltyConfig& penalties = {}) {
  const auto baseline = baseline_loss(nc);
  const RopfProblem problem(nc, penalties);

  DecisionVector best;
  std::vector<double> history;
  if (problem.free_dimensions().empty()) {
    best = problem.expand({});
  } else {
    auto fitness = [&problem](std::span<const double> x) {
      return problem.evaluate(problem.expand(x)).fitness;
    };
    auto result = pso::optimize(fitness, problem.free_bounds(), params);
    best = problem.expand(result.best_position);
    history = std::move(result.history);
  }

  const auto ev = problem.evaluate(best);
  auto report = detail::assemble_report(problem, best, ev);
  report.convergence_history = history.empty() ? std::vector<double>{ev.fitness} : history;
  report.loss_before = baseline.loss;
  report.pso = params;

  // Alternative reading of "before compensation": generators keep their
  // optimized output, only the compensators are switched off.
  DecisionVector gens_only = best;
  std::fill(gens_only.q_comp.begin(), gens_only.q_comp.end(), 0.0);
  if (!gens_only.q_comp.empty()) {
    auto flow = solve_power_flow(problem.admittance(), problem.injections(gens_only));
    if (flow.converged) report.loss_before_generators_optimized = total_losses(flow, nc);
  }
  return report;
}

/// The reactive support cost attributable to real-power delivery: the optimal
/// procurement cost with every load at unity power factor.
struct DutyCost {
  double value = 0.0;
  /// Generator costs in the unity-power-factor optimum, costed-generator order.
  std::vector<double> generator_cost;
  RopfReport unity_report;
};

inline NetworkCase with_unity_power_factor(NetworkCase nc) {
  for (auto& l : nc.loads) l.q = 0.0;
  return nc;
}

inline DutyCost duty_cost_cg(const NetworkCase& nc, const pso::PsoParams& params,
                             const PenaltyConfig& penalties = {}) {
  DutyCost out;
  out.unity_report = run_ropf(with_unity_power_factor(nc), params, penalties);
  out.value = out.unity_report.reactive_cost;
  for (const auto& s : out.unity_report.sources)
    if (s.kind == SourceKind::generator) out.generator_cost.push_back(s.cost);
  return out;
}

struct Payments {
  std::vector<double> generator;        // $/h, after the duty deduction
  std::vector<double> generator_share;  // allocated duty, $/h
  std::vector<double> compensator;      // $/h
  double duty_cost = 0.0;
  double load_allocated_cost = 0.0;

  double total() const {
    return std::accumulate(generator.begin(), generator.end(), 0.0) +
           std::accumulate(compensator.begin(), compensator.end(), 0.0);
  }
};

/// Settle an optimized dispatch. The duty cost C_G is shared among
/// generators in proportion to their unity-power-factor cost (equally when
/// those are all zero); each generator is paid its incurred cost less its
/// share, floored at zero. Compensators are paid their charge. Loads carry
/// C_Q* - C_G, floored at zero.
inline Payments allocate_payments(const RopfReport& report, const DutyCost& duty) {
  Payments out;
  out.duty_cost = duty.value;
  out.load_allocated_cost = std::max(0.0, report.reactive_cost - duty.value);

  std::vector<double> incurred;
  for (const auto& s : report.sources) {
    if (s.kind == SourceKind::generator)
      incurred.push_back(s.cost);
    else
      out.compensator.push_back(s.cost);
  }
  const std::size_t ng = incurred.size();
  std::vector<double> weight(ng, 0.0);
  if (duty.generator_cost.size() == ng)
    weight = duty.generator_cost;
  const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
  for (std::size_t i = 0; i < ng; ++i) {
    const double share = wsum > 0.0 ? duty.value * weight[i] / wsum
                                    : duty.value / static_cast<double>(ng);
    out.generator_share.push_back(share);
    out.generator.push_back(std::max(0.0, incurred[i] - share));
  }
  return out;
}

}  // namespace ropf
