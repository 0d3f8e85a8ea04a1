#pragma once

// Network description: buses, branches, sources and loads, the text case
// format, structural validation and the bus admittance matrix.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ropf {

enum class BusKind { slack, generator, load, compensator };

inline std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack: return "slack";
    case BusKind::generator: return "generator";
    case BusKind::load: return "load";
    case BusKind::compensator: return "compensator";
  }
  return "load";
}

inline std::optional<BusKind> bus_kind_from_string(std::string_view s) {
  if (s == "slack") return BusKind::slack;
  if (s == "generator") return BusKind::generator;
  if (s == "load") return BusKind::load;
  if (s == "compensator") return BusKind::compensator;
  return std::nullopt;
}

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double v_min = 0.95;
  double v_max = 1.05;
  // Voltage magnitude held by the slack and by voltage-controlled buses.
  double v_set = 1.0;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double charging_susceptance = 0.0;
  // Off-nominal turns ratio on the from side; 1.0 for plain lines.
  double tap_ratio = 1.0;
  bool transformer = false;

  std::complex<double> series_admittance() const {
    return 1.0 / std::complex<double>(resistance, reactance);
  }

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Active-power production cost a + b*P + c*P^2 in $/h, P in per unit.
struct CostQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double p) const { return a + b * p + c * p * p; }

  friend bool operator==(const CostQuadratic&, const CostQuadratic&) = default;
};

struct Generator {
  int bus = 0;
  double p_output = 0.0;
  double s_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  CostQuadratic cost;
  double profit_rate = 0.0;

  friend bool operator==(const Generator&, const Generator&) = default;
};

struct Compensator {
  int bus = 0;
  double q_min = 0.0;
  double q_max = 0.0;
  /// Depreciation rate in $/MVArh.
  double rate = 0.0;

  friend bool operator==(const Compensator&, const Compensator&) = default;
};

struct Load {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;

  friend bool operator==(const Load&, const Load&) = default;
};

struct NetworkCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Compensator> compensators;
  std::vector<Load> loads;

  std::size_t bus_count() const { return buses.size(); }

  std::optional<std::size_t> find_bus(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return i;
    return std::nullopt;
  }

  std::size_t bus_index(int id) const {
    if (auto i = find_bus(id)) return *i;
    throw std::out_of_range("unknown bus " + std::to_string(id));
  }

  std::size_t slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].kind == BusKind::slack) return i;
    throw std::logic_error("case has no slack bus");
  }

  bool is_slack(int bus_id) const {
    auto i = find_bus(bus_id);
    return i && buses[*i].kind == BusKind::slack;
  }

  friend bool operator==(const NetworkCase&, const NetworkCase&) = default;
};

/// Malformed case text. line() is 1-based, or 0 when the problem is not tied
/// to a single line.
class CaseError : public std::runtime_error {
 public:
  CaseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// Validation

/// Every broken invariant, as human-readable messages. Empty means the case is
/// usable.
inline std::vector<std::string> validate_case(const NetworkCase& nc) {
  std::vector<std::string> out;
  auto bus_text = [](int id) { return "bus " + std::to_string(id); };

  if (!(nc.base_mva > 0.0)) out.push_back("base_mva must be positive");
  if (nc.buses.empty()) out.push_back("case has no buses");

  std::map<int, int> seen;
  std::size_t slack_count = 0;
  for (const auto& b : nc.buses) {
    if (++seen[b.id] == 2) out.push_back("duplicate " + bus_text(b.id));
    if (b.kind == BusKind::slack) ++slack_count;
    if (!(b.v_min > 0.0 && b.v_min < b.v_max))
      out.push_back(bus_text(b.id) + ": voltage bounds must satisfy 0 < v_min < v_max");
    if (!(b.v_set > 0.0)) out.push_back(bus_text(b.id) + ": voltage setpoint must be positive");
  }
  if (slack_count == 0 && !nc.buses.empty()) out.push_back("no slack bus");
  if (slack_count > 1) out.push_back("duplicate slack");

  auto known = [&](int id) { return seen.count(id) > 0; };
  auto check_ref = [&](int id, std::string_view what) {
    if (!known(id)) out.push_back(std::string(what) + " references nonexistent " + bus_text(id));
    return known(id);
  };

  for (const auto& br : nc.branches) {
    std::string name = (br.transformer ? "transformer " : "branch ") + std::to_string(br.from_bus) +
                       "-" + std::to_string(br.to_bus);
    check_ref(br.from_bus, name);
    check_ref(br.to_bus, name);
    if (br.from_bus == br.to_bus) out.push_back(name + ": from and to bus are the same");
    if (br.resistance == 0.0 && br.reactance == 0.0) out.push_back(name + ": zero impedance");
    if (!(br.tap_ratio > 0.0)) out.push_back(name + ": tap ratio must be positive");
  }

  for (const auto& g : nc.generators) {
    std::string name = "generator at " + bus_text(g.bus);
    check_ref(g.bus, name);
    if (!(g.s_max > 0.0)) out.push_back(name + ": s_max must be positive");
    if (g.q_min > g.q_max) out.push_back(name + ": q_min exceeds q_max");
    if (std::abs(g.q_min) > g.s_max || std::abs(g.q_max) > g.s_max)
      out.push_back(name + ": reactive limits exceed s_max");
    if (g.p_output > g.s_max) out.push_back(name + ": p_out exceeds s_max");
    if (g.cost.c < 0.0) out.push_back(name + ": quadratic cost coefficient must be >= 0");
    if (g.profit_rate < 0.0) out.push_back(name + ": profit rate must be >= 0");
  }

  for (const auto& c : nc.compensators) {
    std::string name = "compensator at " + bus_text(c.bus);
    check_ref(c.bus, name);
    if (!(0.0 <= c.q_min && c.q_min <= c.q_max))
      out.push_back(name + ": limits must satisfy 0 <= q_min <= q_max");
    if (c.rate < 0.0) out.push_back(name + ": rate must be >= 0");
  }

  for (const auto& l : nc.loads) check_ref(l.bus, "load");

  // Connectivity over branches whose endpoints both exist.
  if (!nc.buses.empty()) {
    std::map<int, std::vector<int>> adj;
    for (const auto& br : nc.branches)
      if (known(br.from_bus) && known(br.to_bus)) {
        adj[br.from_bus].push_back(br.to_bus);
        adj[br.to_bus].push_back(br.from_bus);
      }
    std::map<int, bool> reached;
    std::queue<int> todo;
    todo.push(nc.buses.front().id);
    reached[nc.buses.front().id] = true;
    while (!todo.empty()) {
      int u = todo.front();
      todo.pop();
      for (int v : adj[u])
        if (!reached[v]) {
          reached[v] = true;
          todo.push(v);
        }
    }
    std::string missing;
    for (const auto& b : nc.buses)
      if (!reached[b.id]) missing += (missing.empty() ? "" : ", ") + std::to_string(b.id);
    if (!missing.empty())
      out.push_back("disconnected: buses " + missing + " are not reachable from bus " +
                    std::to_string(nc.buses.front().id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Case file format

enum class ParseMode {
  strict,       // reject any case that fails validate_case
  syntax_only,  // only reject text that cannot be read
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_number(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto first = field.data();
  if (!field.empty() && field.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw CaseError(line, "expected a number, got '" + std::string(field) + "'");
  return v;
}

inline int parse_id(std::string_view field, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw CaseError(line, "expected an integer bus id, got '" + std::string(field) + "'");
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parse the sectioned text case format.
///
/// Sections: [BASE_MVA] [BUS] [GENERATOR] [COMPENSATOR] [BRANCH]
/// [TRANSFORMER] [LOAD]. One whitespace-separated record per line, '#' starts
/// a comment. BUS records take an optional fifth field, the voltage setpoint.
/// Negative load demands are accepted and reported through `warnings`.
inline NetworkCase parse_case(std::string_view text, ParseMode mode = ParseMode::strict,
                              std::vector<std::string>* warnings = nullptr) {
  NetworkCase nc;
  std::string section;
  std::size_t section_line = 0;
  std::size_t section_records = 0;
  bool have_base = false;
  std::map<std::string, bool> seen_sections;
  std::optional<std::size_t> slack_line;
  // Bus references are resolved once every section has been read.
  std::vector<std::pair<int, std::size_t>> refs;

  auto close_section = [&] {
    if (!section.empty() && section_records == 0)
      throw CaseError(section_line, "empty section [" + section + "]");
  };
  auto expect = [&](const std::vector<std::string_view>& f, std::size_t lo, std::size_t hi,
                    std::size_t line) {
    if (f.size() < lo || f.size() > hi)
      throw CaseError(line, "[" + section + "] record needs " + std::to_string(lo) +
                                (hi != lo ? "-" + std::to_string(hi) : "") + " fields, got " +
                                std::to_string(f.size()));
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto line = detail::trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw CaseError(line_no, "malformed section header");
      close_section();
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      static const char* known[] = {"BASE_MVA", "BUS",  "GENERATOR", "COMPENSATOR",
                                    "BRANCH",   "TRANSFORMER", "LOAD"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw CaseError(line_no, "unknown section [" + section + "]");
      if (seen_sections[section]) throw CaseError(line_no, "repeated section [" + section + "]");
      seen_sections[section] = true;
      section_line = line_no;
      section_records = 0;
      continue;
    }
    if (section.empty()) throw CaseError(line_no, "record outside of any section");

    auto f = detail::split_fields(line);
    auto num = [&](std::size_t i) { return detail::parse_number(f[i], line_no); };
    auto id = [&](std::size_t i) {
      int v = detail::parse_id(f[i], line_no);
      refs.emplace_back(v, line_no);
      return v;
    };
    ++section_records;

    if (section == "BASE_MVA") {
      expect(f, 1, 1, line_no);
      if (have_base) throw CaseError(line_no, "[BASE_MVA] holds a single value");
      nc.base_mva = num(0);
      have_base = true;
    } else if (section == "BUS") {
      expect(f, 4, 5, line_no);
      Bus b;
      b.id = detail::parse_id(f[0], line_no);
      auto kind = bus_kind_from_string(f[1]);
      if (!kind) throw CaseError(line_no, "unknown bus kind '" + std::string(f[1]) + "'");
      b.kind = *kind;
      b.v_min = num(2);
      b.v_max = num(3);
      if (f.size() == 5) b.v_set = num(4);
      if (nc.find_bus(b.id)) throw CaseError(line_no, "duplicate bus " + std::to_string(b.id));
      if (b.kind == BusKind::slack) {
        if (slack_line) throw CaseError(line_no, "duplicate slack");
        slack_line = line_no;
      }
      nc.buses.push_back(b);
    } else if (section == "GENERATOR") {
      expect(f, 9, 9, line_no);
      Generator g;
      g.bus = id(0);
      g.p_output = num(1);
      g.s_max = num(2);
      g.q_min = num(3);
      g.q_max = num(4);
      g.cost = {num(5), num(6), num(7)};
      g.profit_rate = num(8);
      nc.generators.push_back(g);
    } else if (section == "COMPENSATOR") {
      expect(f, 4, 4, line_no);
      nc.compensators.push_back({id(0), num(1), num(2), num(3)});
    } else if (section == "BRANCH") {
      expect(f, 5, 5, line_no);
      Branch br;
      br.from_bus = id(0);
      br.to_bus = id(1);
      br.resistance = num(2);
      br.reactance = num(3);
      br.charging_susceptance = num(4);
      nc.branches.push_back(br);
    } else if (section == "TRANSFORMER") {
      expect(f, 5, 5, line_no);
      Branch br;
      br.from_bus = id(0);
      br.to_bus = id(1);
      br.resistance = num(2);
      br.reactance = num(3);
      br.tap_ratio = num(4);
      br.transformer = true;
      nc.branches.push_back(br);
    } else if (section == "LOAD") {
      expect(f, 3, 3, line_no);
      Load l{id(0), num(1), num(2)};
      if ((l.p < 0.0 || l.q < 0.0) && warnings)
        warnings->push_back("line " + std::to_string(line_no) + ": negative demand at bus " +
                            std::to_string(l.bus));
      nc.loads.push_back(l);
    }
  }
  close_section();

  if (!seen_sections["BUS"]) throw CaseError(0, "missing [BUS] section");
  for (auto [bus, line] : refs)
    if (!nc.find_bus(bus)) throw CaseError(line, "unknown bus " + std::to_string(bus));

  if (mode == ParseMode::strict) {
    auto problems = validate_case(nc);
    if (!problems.empty()) throw CaseError(0, problems.front());
  }
  return nc;
}

inline NetworkCase load_case(const std::filesystem::path& path, ParseMode mode = ParseMode::strict,
                             std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open case file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str(), mode, warnings);
}

/// Write a case in the text format. Numbers use the shortest representation
/// that reads back to the same double.
inline std::string serialize_case(const NetworkCase& nc) {
  using detail::format_number;
  std::ostringstream o;
  o << "[BASE_MVA]\n" << format_number(nc.base_mva) << "\n\n[BUS]\n";
  for (const auto& b : nc.buses) {
    o << b.id << ' ' << to_string(b.kind) << ' ' << format_number(b.v_min) << ' '
      << format_number(b.v_max);
    if (b.v_set != 1.0) o << ' ' << format_number(b.v_set);
    o << '\n';
  }
  if (!nc.generators.empty()) {
    o << "\n[GENERATOR]\n";
    for (const auto& g : nc.generators)
      o << g.bus << ' ' << format_number(g.p_output) << ' ' << format_number(g.s_max) << ' '
        << format_number(g.q_min) << ' ' << format_number(g.q_max) << ' '
        << format_number(g.cost.a) << ' ' << format_number(g.cost.b) << ' '
        << format_number(g.cost.c) << ' ' << format_number(g.profit_rate) << '\n';
  }
  if (!nc.compensators.empty()) {
    o << "\n[COMPENSATOR]\n";
    for (const auto& c : nc.compensators)
      o << c.bus << ' ' << format_number(c.q_min) << ' ' << format_number(c.q_max) << ' '
        << format_number(c.rate) << '\n';
  }
  auto lines = std::count_if(nc.branches.begin(), nc.branches.end(),
                             [](const Branch& b) { return !b.transformer; });
  if (lines > 0) {
    o << "\n[BRANCH]\n";
    for (const auto& b : nc.branches)
      if (!b.transformer)
        o << b.from_bus << ' ' << b.to_bus << ' ' << format_number(b.resistance) << ' '
          << format_number(b.reactance) << ' ' << format_number(b.charging_susceptance) << '\n';
  }
  if (lines < static_cast<std::ptrdiff_t>(nc.branches.size())) {
    o << "\n[TRANSFORMER]\n";
    for (const auto& b : nc.branches)
      if (b.transformer)
        o << b.from_bus << ' ' << b.to_bus << ' ' << format_number(b.resistance) << ' '
          << format_number(b.reactance) << ' ' << format_number(b.tap_ratio) << '\n';
  }
  if (!nc.loads.empty()) {
    o << "\n[LOAD]\n";
    for (const auto& l : nc.loads)
      o << l.bus << ' ' << format_number(l.p) << ' ' << format_number(l.q) << '\n';
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Admittance matrix

/// Dense nodal admittance matrix, indexed by position in NetworkCase::buses.
struct AdmittanceMatrix {
  Eigen::MatrixXcd entries;

  std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
  std::complex<double> operator()(std::size_t i, std::size_t j) const {
    return entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Plain lines use the pi model with half the charging at each end.
/// Transformers carry the tap on the from side: Yff += y/a^2, Ytt += y,
/// Yft = Ytf -= y/a.
inline AdmittanceMatrix build_admittance(const NetworkCase& nc) {
  const auto n = static_cast<Eigen::Index>(nc.bus_count());
  AdmittanceMatrix y{Eigen::MatrixXcd::Zero(n, n)};
  const std::complex<double> j(0.0, 1.0);
  for (const auto& br : nc.branches) {
    if (br.resistance == 0.0 && br.reactance == 0.0)
      throw std::invalid_argument("zero-impedance branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus));
    const auto f = static_cast<Eigen::Index>(nc.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(nc.bus_index(br.to_bus));
    const auto ys = br.series_admittance();
    if (br.transformer) {
      const double a = br.tap_ratio;
      y.entries(f, f) += ys / (a * a);
      y.entries(t, t) += ys;
      y.entries(f, t) -= ys / a;
      y.entries(t, f) -= ys / a;
    } else {
      const auto half_charging = j * (br.charging_susceptance / 2.0);
      y.entries(f, f) += ys + half_charging;
      y.entries(t, t) += ys + half_charging;
      y.entries(f, t) -= ys;
      y.entries(t, f) -= ys;
    }
  }
  return y;
}

}  // namespace ropf
