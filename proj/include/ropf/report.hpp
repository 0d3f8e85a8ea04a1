#pragma once

// Text and JSON renderings of optimization reports.

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ropf/dispatch.hpp"

namespace ropf {

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline bool differs_by_more_than(double a, double b, double rel) {
  return std::abs(a - b) > rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace detail

/// Table-shaped summary: VAR requirement per source, loss before and after
/// compensation, per-source cost and total payment.
inline std::string format_report_text(const RopfReport& r, const NetworkCase& nc,
                                      const std::optional<Payments>& payments = std::nullopt) {
  using detail::fixed;
  std::ostringstream o;
  auto row = [&](auto&& cell) {
    for (const auto& s : r.sources) o << "  " << cell(s);
    o << '\n';
  };
  auto pad = [](std::string s) {
    if (s.size() < 10) s.insert(0, 10 - s.size(), ' ');
    return s;
  };

  if (!nc.compensators.empty()) {
    o << "Compensator rates ($/MVAr-h):";
    for (const auto& c : nc.compensators) o << " IC" << c.bus << '=' << c.rate;
    o << '\n';
  }
  o << "Source          ";
  row([&](const SourceResult& s) { return pad(s.label + "@" + std::to_string(s.bus)); });
  o << "Requirement of VAR sources in p.u.\n                ";
  row([&](const SourceResult& s) { return pad(fixed(s.q, 4)); });
  o << "Power loss before compensation = " << fixed(r.loss_before, 6) << " p.u.\n";
  if (r.loss_before_generators_optimized &&
      detail::differs_by_more_than(*r.loss_before_generators_optimized, r.loss_before, 0.01))
    o << "Power loss before compensation (generators at optimized output, compensators off) = "
      << fixed(*r.loss_before_generators_optimized, 6) << " p.u.\n";
  o << "Power loss after compensation = " << fixed(r.loss_after, 6) << " p.u.\n";
  o << "Cost of reactive contribution in $/h\n                ";
  row([&](const SourceResult& s) { return pad(fixed(s.cost, 4)); });
  o << "Payment to generators and reactive Compensators = " << fixed(r.total_payment, 4)
    << " $/h\n";

  if (payments) {
    o << "\nDuty cost of real-power delivery C_G = " << fixed(payments->duty_cost, 4) << " $/h\n";
    o << "Cost allocated to reactive loads = " << fixed(payments->load_allocated_cost, 4)
      << " $/h\n";
    std::size_t gi = 0, ci = 0;
    for (const auto& s : r.sources) {
      if (s.kind == SourceKind::generator) {
        o << "  " << s.label << ": incurred " << fixed(s.cost, 4) << ", duty share "
          << fixed(payments->generator_share[gi], 4) << ", paid "
          << fixed(payments->generator[gi], 4) << " $/h\n";
        ++gi;
      } else {
        o << "  " << s.label << ": paid " << fixed(payments->compensator[ci++], 4) << " $/h\n";
      }
    }
  }

  if (!r.feasible) o << "\nWARNING: " << r.diagnostics << '\n';
  return o.str();
}

inline nlohmann::ordered_json to_json(const pso::PsoParams& p) {
  return {{"swarm_size", p.swarm_size}, {"iterations", p.max_iterations},
          {"w_start", p.w_start},       {"w_end", p.w_end},
          {"c1", p.c1},                 {"c2", p.c2},
          {"v_max_fraction", p.v_max_fraction}, {"seed", p.seed}};
}

inline nlohmann::ordered_json to_json(const PenaltyConfig& p) {
  return {{"voltage_weight", p.voltage_weight},
          {"nonconvergence_penalty", p.nonconvergence_penalty},
          {"feasibility_tolerance", p.feasibility_tolerance}};
}

inline nlohmann::ordered_json to_json(const RopfReport& r) {
  nlohmann::ordered_json sources = nlohmann::ordered_json::array();
  for (const auto& s : r.sources)
    sources.push_back({{"label", s.label},
                       {"kind", s.kind == SourceKind::generator ? "generator" : "compensator"},
                       {"bus", s.bus},
                       {"var_requirement", s.q},
                       {"cost", s.cost}});
  nlohmann::ordered_json voltages = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.voltages.size(); ++i)
    voltages.push_back({{"bus", r.bus_ids.at(i)},
                        {"v", r.voltages[i].v},
                        {"delta", r.voltages[i].delta}});

  nlohmann::ordered_json j;
  j["sources"] = sources;
  j["loss_before"] = r.loss_before;
  j["loss_after"] = r.loss_after;
  j["loss_before_generators_optimized"] =
      r.loss_before_generators_optimized ? nlohmann::ordered_json(*r.loss_before_generators_optimized)
                                         : nlohmann::ordered_json(nullptr);
  j["reactive_cost"] = r.reactive_cost;
  j["total_payment"] = r.total_payment;
  j["duty_cost_cg"] = r.duty_cost_cg ? nlohmann::ordered_json(*r.duty_cost_cg) : nullptr;
  j["load_allocated_cost"] =
      r.load_allocated_cost ? nlohmann::ordered_json(*r.load_allocated_cost) : nullptr;
  j["best_fitness"] = r.best_fitness;
  j["converged"] = r.converged;
  j["feasible"] = r.feasible;
  j["max_voltage_violation"] = r.max_voltage_violation;
  j["diagnostics"] = r.diagnostics;
  j["seed"] = r.pso.seed;
  j["pso"] = to_json(r.pso);
  j["penalties"] = to_json(r.penalties);
  j["voltages"] = voltages;
  j["convergence_history"] = r.convergence_history;
  return j;
}

inline nlohmann::ordered_json to_json(const Payments& p) {
  return {{"duty_cost_cg", p.duty_cost},
          {"load_allocated_cost", p.load_allocated_cost},
          {"generator_share", p.generator_share},
          {"generator_payment", p.generator},
          {"compensator_payment", p.compensator},
          {"total", p.total()}};
}

}  // namespace ropf
