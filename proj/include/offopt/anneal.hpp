#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "offopt/csv.hpp"
#include "offopt/error.hpp"
#include "offopt/rng.hpp"
#include "offopt/tsp.hpp"

namespace offopt {

struct SAConfig {
  std::int64_t iterations = 20000;
  int t0_samples = 100;           // neighbor evaluations used to set T0
  double final_temp_ratio = 1e-3; // T_final / T0 of the geometric schedule
  std::int64_t log_every = 50;    // trajectory sampling stride
  std::uint64_t seed = 0;
};

/// One evaluation of the search objective. `score` and `md` travel with the
/// cost so trajectories can log them; cost functions that have no surrogate
/// behind them fill equivalents (e.g. score = -cost, md = 0).
struct CostEval {
  double cost = 0.0;
  double score = 0.0;
  double md = 0.0;
};

using CostFn = std::function<CostEval(const ProblemInstance&, const Route&)>;

struct TrajectorySample {
  std::int64_t iteration = 0;
  double temperature = 0.0;
  double cost = 0.0;
  double score = 0.0;
  double md = 0.0;
  std::optional<double> true_length;       // only when oracle logging is on
  std::optional<double> best_true_length;  // running minimum of true_length
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
};

struct OptResult {
  Route best_route;
  double best_cost = 0.0;
  Trajectory trajectory;
};

inline void validate_sa_config(const SAConfig& config) {
  if (config.iterations < 0) throw InvalidArgument("SAConfig: iterations must be >= 0");
  if (config.t0_samples < 2) throw InvalidArgument("SAConfig: t0_samples must be >= 2");
  if (!(config.final_temp_ratio > 0.0 && config.final_temp_ratio < 1.0))
    throw InvalidArgument("SAConfig: final_temp_ratio must be in (0,1)");
  if (config.log_every < 1) throw InvalidArgument("SAConfig: log_every must be >= 1");
}

/// Reverses route positions [i, j], both included.
inline void apply_two_opt(Route& route, int i, int j) {
  if (i < 0 || j >= route.n() || i >= j)
    throw InvalidArgument("apply_two_opt: need 0 <= i < j < n");
  std::reverse(route.order.begin() + i, route.order.begin() + j + 1);
}

/// 2-opt move: a uniformly chosen segment [i, j] of the visit order is
/// reversed. Routes with fewer than 3 cities have no distinct neighbors and
/// are returned unchanged.
inline Route propose_neighbor(const Route& route, Rng& rng) {
  const int n = route.n();
  if (n < 3) return route;
  int i = rng.uniform_int(0, n - 1);
  int j = rng.uniform_int(0, n - 2);
  if (j >= i) ++j;
  if (i > j) std::swap(i, j);
  Route neighbor = route;
  apply_two_opt(neighbor, i, j);
  return neighbor;
}

/// Accept downhill always; uphill with probability exp(-delta/temperature).
inline bool metropolis_accept(double delta, double temperature, Rng& rng) {
  if (!(temperature > 0.0))
    throw InvalidArgument("metropolis_accept: temperature must be > 0");
  if (delta <= 0.0) return true;
  return rng.uniform() < std::exp(-delta / temperature);
}

/// T0 = population standard deviation of the cost over random neighbors of
/// the start route; 1 when the spread is zero. Tying T0 to the observed cost
/// spread makes the schedule insensitive to the scale of learned scores.
inline double initial_temperature(const CostFn& cost_fn, const ProblemInstance& instance,
                                  const Route& start_route, const SAConfig& config, Rng& rng) {
  validate_sa_config(config);
  std::vector<double> costs;
  costs.reserve(static_cast<std::size_t>(config.t0_samples));
  for (int s = 0; s < config.t0_samples; ++s) {
    const Route neighbor = propose_neighbor(start_route, rng);
    costs.push_back(cost_fn(instance, neighbor).cost);
  }
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(costs.size());
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  var /= static_cast<double>(costs.size());
  const double sd = std::sqrt(var);
  return sd > 0.0 ? sd : 1.0;
}

/// Simulated annealing over closed-tour permutations with geometric cooling
/// and Metropolis acceptance. Starts from a uniformly random permutation and
/// returns the best-cost state among all evaluated candidates. When
/// `oracle_logging` is set, the logged samples carry the true tour length of
/// the incumbent; the cost function itself never sees the oracle.
inline OptResult anneal(const CostFn& cost_fn, const ProblemInstance& instance,
                        const SAConfig& config, Rng& rng, bool oracle_logging) {
  validate_sa_config(config);
  if (instance.n() < 2) throw InvalidArgument("anneal: instance needs at least 2 cities");

  Route current = random_route(instance.n(), rng);
  CostEval current_eval = cost_fn(instance, current);
  if (!std::isfinite(current_eval.cost))
    throw NumericalFailure("anneal: non-finite cost at iteration 0");

  OptResult result;
  result.best_route = current;
  result.best_cost = current_eval.cost;

  double best_true = std::numeric_limits<double>::infinity();
  const auto log_sample = [&](std::int64_t iteration, double temperature) {
    TrajectorySample s;
    s.iteration = iteration;
    s.temperature = temperature;
    s.cost = current_eval.cost;
    s.score = current_eval.score;
    s.md = current_eval.md;
    if (oracle_logging) {
      const double true_length = tour_length(instance, current);
      best_true = std::min(best_true, true_length);
      s.true_length = true_length;
      s.best_true_length = best_true;
    }
    result.trajectory.samples.push_back(s);
  };

  if (config.iterations == 0) {
    log_sample(0, 0.0);
    return result;
  }

  const double t0 = initial_temperature(cost_fn, instance, current, config, rng);
  const double gamma =
      std::pow(config.final_temp_ratio, 1.0 / static_cast<double>(config.iterations));

  double temperature = t0;
  log_sample(0, temperature);

  for (std::int64_t k = 1; k <= config.iterations; ++k) {
    const Route candidate = propose_neighbor(current, rng);
    const CostEval candidate_eval = cost_fn(instance, candidate);
    if (!std::isfinite(candidate_eval.cost))
      throw NumericalFailure("anneal: non-finite cost at iteration " + std::to_string(k));

    if (candidate_eval.cost < result.best_cost) {
      result.best_cost = candidate_eval.cost;
      result.best_route = candidate;
    }

    const double delta = candidate_eval.cost - current_eval.cost;
    if (metropolis_accept(delta, temperature, rng)) {
      current = candidate;
      current_eval = candidate_eval;
    }
    temperature *= gamma;

    if (k % config.log_every == 0 || k == config.iterations) log_sample(k, temperature);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: iter,temperature,cost,score,md,true_length,best_true_length
// Floats fixed 6-decimal; the true-length columns stay empty when oracle
// logging was off.

inline constexpr const char* kTrajectoryHeader =
    "iter,temperature,cost,score,md,true_length,best_true_length";

inline void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kTrajectoryHeader << '\n';
  for (const TrajectorySample& s : trajectory.samples) {
    out << s.iteration << ',' << fixed6(s.temperature) << ',' << fixed6(s.cost) << ','
        << fixed6(s.score) << ',' << fixed6(s.md) << ',';
    if (s.true_length) out << fixed6(*s.true_length);
    out << ',';
    if (s.best_true_length) out << fixed6(*s.best_true_length);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader)
    throw ParseError(path + ": missing or malformed trajectory header");

  static const char* kColumns[7] = {"iter",       "temperature", "cost",
                                    "score",      "md",          "true_length",
                                    "best_true_length"};
  Trajectory trajectory;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw ParseError(path + ": row " + std::to_string(row) + ": expected 7 columns, got " +
                       std::to_string(cells.size()));
    const auto where = [&](int col) {
      return path + ": row " + std::to_string(row) + ", column '" + kColumns[col] + "'";
    };
    TrajectorySample s;
    s.iteration = parse_csv_int(cells[0], where(0));
    s.temperature = parse_csv_double(cells[1], where(1));
    s.cost = parse_csv_double(cells[2], where(2));
    s.score = parse_csv_double(cells[3], where(3));
    s.md = parse_csv_double(cells[4], where(4));
    if (!cells[5].empty()) s.true_length = parse_csv_double(cells[5], where(5));
    if (!cells[6].empty()) s.best_true_length = parse_csv_double(cells[6], where(6));
    trajectory.samples.push_back(s);
  }
  return trajectory;
}

}  // namespace offopt
