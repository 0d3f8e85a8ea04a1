#pragma once

// Cost of reactive support: generator opportunity cost, compensator charges
// and the total procurement cost.

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropf/netmodel.hpp"

namespace ropf {

/// Opportunity cost in $/h of producing reactive power q (p.u.).
///
/// Producing q leaves sqrt(s_max^2 - q^2) of apparent-power capability for
/// real power. The cost is the active-power cost forgone between full
/// capability and that reduced capability, scaled by the profit rate:
///   k * (C(s_max) - C(sqrt(s_max^2 - q^2)))
inline double generator_opportunity_cost(const Generator& gen, double q) {
  if (!(std::abs(q) <= gen.s_max))
    throw std::domain_error("reactive output " + std::to_string(q) +
                            " exceeds apparent-power capability " + std::to_string(gen.s_max));
  const double remaining = std::sqrt(gen.s_max * gen.s_max - q * q);
  return (gen.cost(gen.s_max) - gen.cost(remaining)) * gen.profit_rate;
}

/// Charge in $/h for q p.u. purchased from a compensator.
inline double compensator_cost(const Compensator& comp, double q, double base_mva) {
  if (!(q >= comp.q_min && q <= comp.q_max))
    throw std::domain_error("compensator output " + std::to_string(q) + " outside [" +
                            std::to_string(comp.q_min) + ", " + std::to_string(comp.q_max) + "]");
  return comp.rate * q * base_mva;
}

/// Capital cost recovered per MVArh of service, in $/MVArh.
inline double depreciation_rate(double investment_per_mvar, double lifespan_years,
                                double working_rate) {
  if (!(investment_per_mvar > 0.0 && lifespan_years > 0.0 && working_rate > 0.0))
    throw std::invalid_argument("depreciation_rate: inputs must be positive");
  if (working_rate > 1.0) throw std::invalid_argument("depreciation_rate: working rate above 1");
  return investment_per_mvar / (lifespan_years * 365.0 * 24.0 * working_rate);
}

struct ReactiveCostBreakdown {
  std::vector<double> generator;    // $/h, one per costed generator
  std::vector<double> compensator;  // $/h, one per compensator
  double total = 0.0;
};

/// Generators whose reactive output is priced: every generator not located at
/// the slack bus.
inline std::vector<std::size_t> costed_generators(const NetworkCase& nc) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nc.generators.size(); ++i)
    if (!nc.is_slack(nc.generators[i].bus)) out.push_back(i);
  return out;
}

enum class LimitPolicy {
  enforce,     // outputs must respect the case's reactive limits
  price_only,  // only the physical domain is checked: |q| <= s_max, q >= 0
};

/// Total procurement cost. `q_gen` holds one value per costed generator (see
/// costed_generators) and `q_comp` one per compensator.
///
/// LimitPolicy::price_only prices a dispatch recorded elsewhere, e.g. one
/// that overran the case's contracted limits.
inline ReactiveCostBreakdown total_reactive_cost(const NetworkCase& nc,
                                                 std::span<const double> q_gen,
                                                 std::span<const double> q_comp,
                                                 LimitPolicy policy = LimitPolicy::enforce) {
  const auto gens = costed_generators(nc);
  if (q_gen.size() != gens.size() || q_comp.size() != nc.compensators.size())
    throw std::invalid_argument("total_reactive_cost: decision size does not match the case");

  ReactiveCostBreakdown out;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const auto& g = nc.generators[gens[i]];
    const double q = q_gen[i];
    if (policy == LimitPolicy::enforce && !(q >= g.q_min && q <= g.q_max))
      throw std::domain_error("generator at bus " + std::to_string(g.bus) + ": output " +
                              std::to_string(q) + " outside its reactive limits");
    out.generator.push_back(generator_opportunity_cost(g, q));
  }
  for (std::size_t j = 0; j < nc.compensators.size(); ++j) {
    auto c = nc.compensators[j];
    if (policy == LimitPolicy::price_only) {
      if (q_comp[j] < 0.0) throw std::domain_error("compensator output must be nonnegative");
      c.q_min = 0.0;
      c.q_max = q_comp[j];
    }
    out.compensator.push_back(compensator_cost(c, q_comp[j], nc.base_mva));
  }
  out.total = std::accumulate(out.generator.begin(), out.generator.end(), 0.0) +
              std::accumulate(out.compensator.begin(), out.compensator.end(), 0.0);
  return out;
}

}  // namespace ropf
