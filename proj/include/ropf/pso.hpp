#pragma once

// Global-best particle swarm optimizer with a linearly scheduled inertia
// weight, velocity clamping and absorbing position bounds. Minimizes.
//
// Every particle owns a random stream derived from (seed, particle index), so
// results do not depend on how fitness evaluations are scheduled across
// threads.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ropf::pso {

struct PsoParams {
  std::size_t swarm_size = 30;
  std::size_t max_iterations = 300;
  double w_start = 1.2;
  double w_end = 0.9;
  double c1 = 2.0;
  double c2 = 2.0;
  /// Velocity clamp as a fraction of each dimension's range.
  double v_max_fraction = 0.5;
  std::uint64_t seed = 1;
  /// Worker threads for fitness evaluation; 0 or 1 evaluates inline.
  unsigned threads = 1;

  void validate() const {
    if (swarm_size < 2) throw std::invalid_argument("swarm_size must be at least 2");
    if (!(w_start >= 0.0 && w_start <= 2.0 && w_end >= 0.0 && w_end <= 2.0))
      throw std::invalid_argument("inertia weights must lie in [0, 2]");
    if (!(c1 >= 0.0 && c2 >= 0.0)) throw std::invalid_argument("c1 and c2 must be >= 0");
    if (!(v_max_fraction > 0.0 && v_max_fraction <= 1.0))
      throw std::invalid_argument("v_max_fraction must lie in (0, 1]");
  }
};

struct Bound {
  double lo = 0.0;
  double hi = 0.0;
};

using Bounds = std::vector<Bound>;

inline void validate_bounds(const Bounds& bounds) {
  if (bounds.empty()) throw std::invalid_argument("empty bounds");
  for (std::size_t d = 0; d < bounds.size(); ++d)
    if (!(std::isfinite(bounds[d].lo) && std::isfinite(bounds[d].hi) &&
          bounds[d].lo < bounds[d].hi))
      throw std::invalid_argument("dimension " + std::to_string(d) + ": need lo < hi");
}

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> pbest_position;
  double fitness = std::numeric_limits<double>::infinity();
  double pbest_fitness = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng;
};

struct Swarm {
  std::vector<Particle> particles;
  std::vector<double> gbest_position;
  double gbest_fitness = std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;
  PsoParams params;
  Bounds bounds;
  std::vector<double> v_max;
  /// Set when no initial particle produced a finite fitness.
  bool all_initial_nonfinite = false;
};

template <class F>
concept FitnessFunction = std::invocable<F&, std::span<const double>> &&
    std::convertible_to<std::invoke_result_t<F&, std::span<const double>>, double>;

/// Inertia weight for step t (0-based), linear from w_start to w_end over
/// max_iterations steps.
inline double inertia_at(const PsoParams& p, std::size_t t) {
  if (p.max_iterations <= 1) return p.w_start;
  return p.w_start + (p.w_end - p.w_start) * static_cast<double>(t) /
                         static_cast<double>(p.max_iterations - 1);
}

/// w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x), elementwise, unclamped.
inline std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest,
                                           double w, const PsoParams& params,
                                           std::span<const double> r1,
                                           std::span<const double> r2) {
  const std::size_t n = p.position.size();
  if (p.velocity.size() != n || p.pbest_position.size() != n || gbest.size() != n ||
      r1.size() != n || r2.size() != n)
    throw std::invalid_argument("update_velocity: dimension mismatch");
  std::vector<double> v(n);
  for (std::size_t d = 0; d < n; ++d)
    v[d] = w * p.velocity[d] + params.c1 * r1[d] * (p.pbest_position[d] - p.position[d]) +
           params.c2 * r2[d] * (gbest[d] - p.position[d]);
  return v;
}

inline std::vector<double> update_velocity(const Particle& p, std::span<const double> gbest,
                                           double w, const PsoParams& params, double r1,
                                           double r2) {
  const std::vector<double> a(p.position.size(), r1), b(p.position.size(), r2);
  return update_velocity(p, gbest, w, params, a, b);
}

inline std::vector<double> clamp_velocity(std::span<const double> v,
                                          std::span<const double> v_max) {
  if (v.size() != v_max.size()) throw std::invalid_argument("clamp_velocity: dimension mismatch");
  std::vector<double> out(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = std::clamp(v[d], -v_max[d], v_max[d]);
  return out;
}

namespace detail {

inline double sanitize(double f) {
  return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
}

inline std::mt19937_64 particle_stream(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline double unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Evaluate every particle's current position. Results land by index, so
/// the outcome is the same for any thread count.
template <FitnessFunction F>
void evaluate_all(Swarm& swarm, F& fitness) {
  const std::size_t n = swarm.particles.size();
  auto eval_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& p = swarm.particles[i];
      p.fitness = sanitize(static_cast<double>(std::invoke(fitness, std::span<const double>(p.position))));
    }
  };
  const std::size_t workers = std::min<std::size_t>(swarm.params.threads, n);
  if (workers <= 1) {
    eval_range(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t begin = 0; begin < n; begin += chunk)
    pool.emplace_back(eval_range, begin, std::min(n, begin + chunk));
}

inline void update_gbest(Swarm& swarm) {
  for (const auto& p : swarm.particles)
    if (p.pbest_fitness < swarm.gbest_fitness) {
      swarm.gbest_fitness = p.pbest_fitness;
      swarm.gbest_position = p.pbest_position;
    }
}

}  // namespace detail

/// Random positions uniform in the bounds, velocities uniform in +-v_max.
template <FitnessFunction F>
Swarm initialize_swarm(const Bounds& bounds, const PsoParams& params, F&& fitness) {
  params.validate();
  validate_bounds(bounds);

  Swarm swarm;
  swarm.params = params;
  swarm.bounds = bounds;
  for (const auto& b : bounds) swarm.v_max.push_back(params.v_max_fraction * (b.hi - b.lo));

  swarm.particles.resize(params.swarm_size);
  for (std::size_t i = 0; i < params.swarm_size; ++i) {
    auto& p = swarm.particles[i];
    p.rng = detail::particle_stream(params.seed, i);
    for (std::size_t d = 0; d < bounds.size(); ++d)
      p.position.push_back(bounds[d].lo + (bounds[d].hi - bounds[d].lo) * detail::unit(p.rng));
    for (std::size_t d = 0; d < bounds.size(); ++d)
      p.velocity.push_back(swarm.v_max[d] * (2.0 * detail::unit(p.rng) - 1.0));
  }

  detail::evaluate_all(swarm, fitness);
  swarm.all_initial_nonfinite = true;
  for (auto& p : swarm.particles) {
    p.pbest_position = p.position;
    p.pbest_fitness = p.fitness;
    if (std::isfinite(p.fitness)) swarm.all_initial_nonfinite = false;
  }
  // Fall back to the first particle so gbest_position is always meaningful.
  swarm.gbest_position = swarm.particles.front().position;
  swarm.gbest_fitness = swarm.particles.front().fitness;
  detail::update_gbest(swarm);
  return swarm;
}

/// One synchronous iteration: every particle moves using the gbest of the
/// previous iteration, then bests are updated in particle order. Only strict
/// improvements replace an incumbent.
template <FitnessFunction F>
void step(Swarm& swarm, F&& fitness) {
  const auto& params = swarm.params;
  const double w = inertia_at(params, swarm.iteration);
  const std::size_t dims = swarm.bounds.size();
  std::vector<double> r1(dims), r2(dims);

  for (auto& p : swarm.particles) {
    for (std::size_t d = 0; d < dims; ++d) {
      r1[d] = detail::unit(p.rng);
      r2[d] = detail::unit(p.rng);
    }
    p.velocity = clamp_velocity(update_velocity(p, swarm.gbest_position, w, params, r1, r2),
                                swarm.v_max);
    for (std::size_t d = 0; d < dims; ++d)
      p.position[d] =
          std::clamp(p.position[d] + p.velocity[d], swarm.bounds[d].lo, swarm.bounds[d].hi);
  }

  detail::evaluate_all(swarm, fitness);
  for (auto& p : swarm.particles)
    if (p.fitness < p.pbest_fitness) {
      p.pbest_fitness = p.fitness;
      p.pbest_position = p.position;
    }
  detail::update_gbest(swarm);
  ++swarm.iteration;
}

struct PsoResult {
  std::vector<double> best_position;
  double best_fitness = std::numeric_limits<double>::infinity();
  /// gbest fitness after initialization, then after each step.
  std::vector<double> history;
  bool all_initial_nonfinite = false;
};

template <FitnessFunction F>
PsoResult optimize(F&& fitness, const Bounds& bounds, const PsoParams& params) {
  auto swarm = initialize_swarm(bounds, params, fitness);
  PsoResult out;
  out.all_initial_nonfinite = swarm.all_initial_nonfinite;
  out.history.reserve(params.max_iterations + 1);
  out.history.push_back(swarm.gbest_fitness);
  for (std::size_t t = 0; t < params.max_iterations; ++t) {
    step(swarm, fitness);
    out.history.push_back(swarm.gbest_fitness);
  }
  out.best_position = swarm.gbest_position;
  out.best_fitness = swarm.gbest_fitness;
  return out;
}

}  // namespace ropf::pso
