#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "offopt/anneal.hpp"
#include "offopt/rng.hpp"
#include "offopt/tsp.hpp"

using namespace offopt;

namespace {

CostFn length_cost() {
  return [](const ProblemInstance& inst, const Route& route) {
    const double len = tour_length(inst, route);
    return CostEval{len, -len, 0.0};
  };
}

double brute_force_optimum(const ProblemInstance& inst) {
  std::vector<int> order(static_cast<std::size_t>(inst.n()));
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const City& a = inst.cities[static_cast<std::size_t>(order[i])];
      const City& b = inst.cities[static_cast<std::size_t>(order[(i + 1) % order.size()])];
      total += std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y));
    }
    best = std::min(best, total);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("offopt_test_" + name);
}

}  // namespace

TEST_CASE("apply_two_opt reverses the chosen segment", "[anneal]") {
  Route route{{0, 1, 2, 3, 4}};
  apply_two_opt(route, 1, 3);
  REQUIRE(route.order == std::vector<int>{0, 3, 2, 1, 4});
  REQUIRE_THROWS_AS(apply_two_opt(route, 2, 2), InvalidArgument);
  REQUIRE_THROWS_AS(apply_two_opt(route, 3, 5), InvalidArgument);
}

TEST_CASE("propose_neighbor always yields a valid permutation", "[anneal][property]") {
  Rng rng(13);
  Route route = random_route(11, rng);
  for (int trial = 0; trial < 200; ++trial) {
    route = propose_neighbor(route, rng);
    REQUIRE(is_valid_route(route, 11));
  }

  const Route two{{1, 0}};
  REQUIRE(propose_neighbor(two, rng).order == two.order);  // no move below 3 cities
}

TEST_CASE("any 2-opt move on three cities preserves the tour length", "[anneal]") {
  Rng rng(17);
  const ProblemInstance inst = sample_instance(3, rng);
  const Route route = random_route(3, rng);
  const double base = tour_length(inst, route);
  for (int trial = 0; trial < 20; ++trial) {
    const Route moved = propose_neighbor(route, rng);
    REQUIRE(tour_length(inst, moved) == Catch::Approx(base).margin(1e-12));
  }
}

TEST_CASE("metropolis_accept follows the acceptance rule", "[anneal]") {
  Rng rng(19);
  REQUIRE(metropolis_accept(-1.0, 0.5, rng));
  REQUIRE(metropolis_accept(0.0, 0.5, rng));
  REQUIRE_THROWS_AS(metropolis_accept(1.0, 0.0, rng), InvalidArgument);
  REQUIRE_THROWS_AS(metropolis_accept(1.0, -2.0, rng), InvalidArgument);

  // frozen limit: exp(-delta/T) underflows to zero
  for (int trial = 0; trial < 100; ++trial)
    REQUIRE_FALSE(metropolis_accept(1.0, 1e-300, rng));
}

TEST_CASE("metropolis_accept frequency matches exp(-1)", "[anneal][oracle]") {
  Rng rng(23);
  int accepted = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t)
    if (metropolis_accept(1.0, 1.0, rng)) ++accepted;
  const double rate = static_cast<double>(accepted) / trials;
  REQUIRE(rate == Catch::Approx(std::exp(-1.0)).margin(0.02));
}

TEST_CASE("initial_temperature is the cost spread over random neighbors", "[anneal][oracle]") {
  Rng rng(29);
  const ProblemInstance inst = sample_instance(8, rng);
  const Route start = random_route(8, rng);
  SAConfig config;
  config.t0_samples = 100;

  const CostFn constant = [](const ProblemInstance&, const Route&) {
    return CostEval{3.5, 0.0, 0.0};
  };
  Rng t0_rng(1);
  REQUIRE(initial_temperature(constant, inst, start, config, t0_rng) == 1.0);

  // alternating costs {0, 2} sampled evenly: population standard deviation 1
  int call = 0;
  const CostFn alternating = [&call](const ProblemInstance&, const Route&) {
    return CostEval{(call++ % 2 == 0) ? 0.0 : 2.0, 0.0, 0.0};
  };
  Rng alt_rng(2);
  REQUIRE(initial_temperature(alternating, inst, start, config, alt_rng) == 1.0);

  Rng len_rng(3);
  REQUIRE(initial_temperature(length_cost(), inst, start, config, len_rng) > 0.0);
}

TEST_CASE("anneal against the true length finds small optima", "[anneal][oracle]") {
  Rng inst_rng(31);
  const ProblemInstance inst = sample_instance(6, inst_rng);
  const double optimum = brute_force_optimum(inst);

  SAConfig config;
  config.iterations = 20000;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const OptResult result = anneal(length_cost(), inst, config, rng, false);
    if (std::abs(result.best_cost - optimum) <= 1e-9) ++hits;
  }
  REQUIRE(hits >= 18);
}

TEST_CASE("anneal with zero iterations returns the initial route", "[anneal]") {
  Rng rng(37);
  const ProblemInstance inst = sample_instance(10, rng);
  SAConfig config;
  config.iterations = 0;
  config.seed = 0;

  Rng run_rng(41);
  const OptResult result = anneal(length_cost(), inst, config, run_rng, true);
  Rng check_rng(41);
  const Route expected = random_route(10, check_rng);
  REQUIRE(result.best_route.order == expected.order);
  REQUIRE(result.trajectory.samples.size() == 1);
  REQUIRE(result.trajectory.samples[0].iteration == 0);
}

TEST_CASE("anneal tracks the best evaluated state and is deterministic",
          "[anneal][property]") {
  Rng inst_rng(43);
  const ProblemInstance inst = sample_instance(12, inst_rng);
  SAConfig config;
  config.iterations = 3000;
  config.log_every = 10;

  Rng rng_a(7);
  const OptResult a = anneal(length_cost(), inst, config, rng_a, true);
  Rng rng_b(7);
  const OptResult b = anneal(length_cost(), inst, config, rng_b, true);

  REQUIRE(a.best_route.order == b.best_route.order);
  REQUIRE(a.best_cost == b.best_cost);
  REQUIRE(a.trajectory.samples.size() == b.trajectory.samples.size());

  REQUIRE(is_valid_route(a.best_route, 12));
  REQUIRE(tour_length(inst, a.best_route) == a.best_cost);  // cost fn is the length

  double prev_best = std::numeric_limits<double>::infinity();
  std::int64_t prev_iter = -1;
  for (const TrajectorySample& s : a.trajectory.samples) {
    REQUIRE(s.iteration > prev_iter);
    prev_iter = s.iteration;
    REQUIRE(a.best_cost <= s.cost + 1e-12);
    REQUIRE(s.best_true_length.has_value());
    REQUIRE(*s.best_true_length <= prev_best + 1e-15);
    prev_best = *s.best_true_length;
  }
  REQUIRE(a.trajectory.samples.back().iteration == config.iterations);
}

TEST_CASE("anneal reports the iteration of a non-finite cost", "[anneal]") {
  Rng rng(47);
  const ProblemInstance inst = sample_instance(6, rng);
  SAConfig config;
  config.iterations = 100;

  int calls = 0;
  const CostFn poisoned = [&calls](const ProblemInstance&, const Route&) {
    ++calls;
    return CostEval{calls > 150 ? std::nan("") : 1.0, 0.0, 0.0};
  };
  Rng run_rng(1);
  try {
    anneal(poisoned, inst, config, run_rng, false);
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    REQUIRE(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("trajectory CSV round trip and oracle-off gaps", "[anneal]") {
  Rng rng(53);
  const ProblemInstance inst = sample_instance(9, rng);
  SAConfig config;
  config.iterations = 200;
  config.log_every = 50;

  const auto path = temp_path("traj.csv");

  SECTION("oracle logging on") {
    Rng run_rng(2);
    const OptResult result = anneal(length_cost(), inst, config, run_rng, true);
    write_trajectory_csv(result.trajectory, path.string());

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "iter,temperature,cost,score,md,true_length,best_true_length");

    const Trajectory back = read_trajectory_csv(path.string());
    REQUIRE(back.samples.size() == result.trajectory.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
      REQUIRE(back.samples[i].iteration == result.trajectory.samples[i].iteration);
      REQUIRE(back.samples[i].cost ==
              Catch::Approx(result.trajectory.samples[i].cost).margin(5e-7));
      REQUIRE(back.samples[i].true_length.has_value());
    }
  }

  SECTION("oracle logging off leaves the true-length columns empty") {
    Rng run_rng(3);
    const OptResult result = anneal(length_cost(), inst, config, run_rng, false);
    write_trajectory_csv(result.trajectory, path.string());
    const Trajectory back = read_trajectory_csv(path.string());
    for (const auto& s : back.samples) {
      REQUIRE_FALSE(s.true_length.has_value());
      REQUIRE_FALSE(s.best_true_length.has_value());
    }
  }

  SECTION("non-numeric cells are reported with row and column") {
    std::ofstream out(path);
    out << "iter,temperature,cost,score,md,true_length,best_true_length\n";
    out << "0,1.0,oops,0.0,0.0,,\n";
    out.close();
    try {
      read_trajectory_csv(path.string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      REQUIRE(msg.find("row 1") != std::string::npos);
      REQUIRE(msg.find("cost") != std::string::npos);
    }
  }

  std::filesystem::remove(path);
}
