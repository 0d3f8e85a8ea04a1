#pragma once

// Command-line front end: validate | powerflow | ropf | pricing.
//
// Exit status: 0 success, 1 validation found violations, 2 data or argument
// error, 3 non-convergence.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ropf/dispatch.hpp"
#include "ropf/netmodel.hpp"
#include "ropf/powerflow.hpp"
#include "ropf/report.hpp"

namespace ropf::cli {

enum ExitCode : int { ok = 0, violations = 1, data_error = 2, nonconvergence = 3 };

struct RunConfig {
  std::string case_path;
  std::string command;
  std::uint64_t seed = 1;
  std::size_t swarm_size = 30;
  std::size_t iterations = 300;
  double w_start = 1.2;
  double w_end = 0.9;
  double c1 = 2.0;
  double c2 = 2.0;
  double voltage_weight = 1e6;
  std::string output_format = "text";

  pso::PsoParams pso_params() const {
    pso::PsoParams p;
    p.seed = seed;
    p.swarm_size = swarm_size;
    p.max_iterations = iterations;
    p.w_start = w_start;
    p.w_end = w_end;
    p.c1 = c1;
    p.c2 = c2;
    p.threads = std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
    return p;
  }

  PenaltyConfig penalties() const {
    PenaltyConfig p;
    p.voltage_weight = voltage_weight;
    return p;
  }

  nlohmann::ordered_json to_json() const {
    return {{"case_path", case_path}, {"command", command},   {"seed", seed},
            {"swarm_size", swarm_size}, {"iterations", iterations}, {"w_start", w_start},
            {"w_end", w_end},           {"c1", c1},               {"c2", c2},
            {"voltage_weight", voltage_weight}, {"output_format", output_format}};
  }

  std::string to_text() const {
    std::ostringstream o;
    o << "# " << command << ' ' << case_path << " --seed " << seed << " --swarm_size "
      << swarm_size << " --iterations " << iterations << " --w_start " << w_start
      << " --w_end " << w_end << " --c1 " << c1 << " --c2 " << c2 << " --voltage_weight "
      << voltage_weight << " --output_format " << output_format << '\n';
    return o.str();
  }
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json document(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["timestamp"] = utc_timestamp();
  j["config"] = cfg.to_json();
  return j;
}

inline int run_validate(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> warnings;
  const auto nc = load_case(cfg.case_path, ParseMode::syntax_only, &warnings);
  const auto problems = validate_case(nc);
  if (cfg.output_format == "json") {
    auto j = document(cfg);
    j["violations"] = problems;
    j["warnings"] = warnings;
    out << j.dump(2) << '\n';
  } else {
    out << cfg.to_text();
    for (const auto& w : warnings) out << "warning: " << w << '\n';
    for (const auto& p : problems) out << p << '\n';
    out << problems.size() << " violations\n";
  }
  return problems.empty() ? ok : violations;
}

inline int run_powerflow(const RunConfig& cfg, std::ostream& out) {
  const auto nc = load_case(cfg.case_path);
  const auto base = baseline_loss(nc);
  const auto& sol = base.flow;
  if (cfg.output_format == "json") {
    auto j = document(cfg);
    nlohmann::ordered_json buses = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < nc.bus_count(); ++i)
      buses.push_back({{"bus", nc.buses[i].id},
                       {"v", sol.states[i].v},
                       {"delta", sol.states[i].delta},
                       {"p", sol.injections[i].real()},
                       {"q", sol.injections[i].imag()}});
    j["baseline"] = {{"converged", sol.converged}, {"iterations", sol.iterations},
                     {"max_mismatch", sol.max_mismatch}, {"p_slack", sol.p_slack},
                     {"q_slack", sol.q_slack},       {"total_loss", base.loss},
                     {"buses", buses}};
    out << j.dump(2) << '\n';
  } else {
    out << cfg.to_text();
    out << "Uncompensated power flow: " << to_string(sol.status) << " in " << sol.iterations
        << " iterations (max mismatch " << sol.max_mismatch << ")\n";
    out << "  bus       V (p.u.)   angle (deg)      P (p.u.)      Q (p.u.)\n";
    for (std::size_t i = 0; i < nc.bus_count(); ++i) {
      char line[128];
      std::snprintf(line, sizeof line, "  %3d  %12.6f  %12.4f  %12.6f  %12.6f\n", nc.buses[i].id,
                    sol.states[i].v, sol.states[i].delta * 180.0 / std::numbers::pi,
                    sol.injections[i].real(), sol.injections[i].imag());
      out << line;
    }
    out << "Slack injection: P = " << sol.p_slack << ", Q = " << sol.q_slack << " p.u.\n";
    out << "Power loss before compensation = " << ropf::detail::fixed(base.loss, 6) << " p.u.\n";
  }
  return ok;
}

inline int run_study(const RunConfig& cfg, std::ostream& out, bool pricing) {
  const auto nc = load_case(cfg.case_path);
  const auto params = cfg.pso_params();
  const auto penalties = cfg.penalties();
  auto report = run_ropf(nc, params, penalties);

  std::optional<Payments> payments;
  std::optional<DutyCost> duty;
  if (pricing) {
    duty = duty_cost_cg(nc, params, penalties);
    payments = allocate_payments(report, *duty);
    report.duty_cost_cg = payments->duty_cost;
    report.load_allocated_cost = payments->load_allocated_cost;
  }

  if (cfg.output_format == "json") {
    auto j = document(cfg);
    j["report"] = to_json(report);
    if (payments) {
      j["payments"] = to_json(*payments);
      j["unity_power_factor_report"] = to_json(duty->unity_report);
    }
    out << j.dump(2) << '\n';
  } else {
    out << cfg.to_text() << format_report_text(report, nc, payments);
  }
  return report.converged ? ok : nonconvergence;
}

}  // namespace detail

/// Parse arguments and run one command. Reports go to `out`, errors to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Reactive optimal power flow with particle swarm optimization"};
  app.add_option("command", cfg.command, "validate | powerflow | ropf | pricing")
      ->required()
      ->check(CLI::IsMember({"validate", "powerflow", "ropf", "pricing"}));
  app.add_option("case_path", cfg.case_path, "case file")->required();
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--swarm_size,--swarm-size", cfg.swarm_size, "particles in the swarm");
  app.add_option("--iterations", cfg.iterations, "optimizer iterations");
  app.add_option("--w_start,--w-start", cfg.w_start, "initial inertia weight");
  app.add_option("--w_end,--w-end", cfg.w_end, "final inertia weight");
  app.add_option("--c1", cfg.c1, "cognitive acceleration coefficient");
  app.add_option("--c2", cfg.c2, "social acceleration coefficient");
  app.add_option("--voltage_weight,--voltage-weight", cfg.voltage_weight,
                 "penalty weight on voltage-limit violations ($/h per p.u.^2)");
  app.add_option("--output_format,--output-format", cfg.output_format, "text | json")
      ->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  }

  try {
    cfg.pso_params().validate();
    if (cfg.voltage_weight < 0.0) throw std::invalid_argument("voltage_weight must be >= 0");
    if (!std::filesystem::exists(cfg.case_path))
      throw std::runtime_error("case file not found: " + cfg.case_path);

    if (cfg.command == "validate") return detail::run_validate(cfg, out);
    if (cfg.command == "powerflow") return detail::run_powerflow(cfg, out);
    return detail::run_study(cfg, out, cfg.command == "pricing");
  } catch (const CaseError& e) {
    err << "error: " << cfg.case_path << ": " << e.what() << '\n';
    return data_error;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return nonconvergence;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return data_error;
  }
}

}  // namespace ropf::cli
