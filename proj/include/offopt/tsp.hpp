#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "offopt/error.hpp"
#include "offopt/rng.hpp"

namespace offopt {

struct City {
  double x = 0.0;
  double y = 0.0;
};

/// A problem condition: an ordered list of 2-D city coordinates in [0,1].
struct ProblemInstance {
  std::int64_t id = 0;
  std::vector<City> cities;

  int n() const { return static_cast<int>(cities.size()); }
};

/// A solution: a permutation of city indices, read as a closed tour
/// (the last visited city connects back to the first).
struct Route {
  std::vector<int> order;

  int n() const { return static_cast<int>(order.size()); }

  bool operator==(const Route& other) const { return order == other.order; }
};

struct LipschitzEstimate {
  double k_hat = 0.0;
  std::int64_t sample_pairs = 0;  // pairs used; zero-distance pairs excluded
};

inline bool is_valid_route(const Route& route, int n_cities) {
  if (route.n() != n_cities) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n_cities), false);
  for (int idx : route.order) {
    if (idx < 0 || idx >= n_cities || seen[static_cast<std::size_t>(idx)])
      return false;
    seen[static_cast<std::size_t>(idx)] = true;
  }
  return true;
}

inline void validate_route(const Route& route, int n_cities) {
  if (!is_valid_route(route, n_cities))
    throw ValidationError("invalid route: not a permutation of 0.." +
                          std::to_string(n_cities - 1));
}

/// n cities drawn independently uniform on [0,1]^2 from the given stream.
inline ProblemInstance sample_instance(int n, Rng& rng) {
  if (n < 2) throw InvalidArgument("sample_instance: need at least 2 cities");
  ProblemInstance instance;
  instance.cities.resize(static_cast<std::size_t>(n));
  for (auto& city : instance.cities) {
    city.x = rng.uniform();
    city.y = rng.uniform();
  }
  return instance;
}

inline Route random_route(int n, Rng& rng) {
  Route route;
  route.order.resize(static_cast<std::size_t>(n));
  std::iota(route.order.begin(), route.order.end(), 0);
  rng.shuffle(route.order);
  return route;
}

/// Euclidean length of the closed tour, including the edge from the last
/// visited city back to the first.
inline double tour_length(const ProblemInstance& instance, const Route& route) {
  validate_route(route, instance.n());
  const int n = instance.n();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const City& a = instance.cities[static_cast<std::size_t>(route.order[static_cast<std::size_t>(i)])];
    const City& b = instance.cities[static_cast<std::size_t>(route.order[static_cast<std::size_t>((i + 1) % n)])];
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

/// Positional Hamming distance, normalized to [0,1]. A diagnostic metric:
/// no canonicalization of rotations or reflections is attempted.
inline double route_distance(const Route& r1, const Route& r2) {
  if (r1.n() != r2.n())
    throw InvalidArgument("route_distance: routes have different lengths");
  const int n = r1.n();
  int differing = 0;
  for (int i = 0; i < n; ++i)
    if (r1.order[static_cast<std::size_t>(i)] != r2.order[static_cast<std::size_t>(i)]) ++differing;
  return static_cast<double>(differing) / static_cast<double>(n);
}

/// Samples `samples` pairs of random routes and returns the largest observed
/// ratio |length(r1) - length(r2)| / route_distance(r1, r2). Pairs with zero
/// route distance carry no information and are excluded.
inline LipschitzEstimate estimate_lipschitz(const ProblemInstance& instance,
                                            std::int64_t samples, Rng& rng) {
  if (samples < 1) throw InvalidArgument("estimate_lipschitz: samples must be >= 1");
  const int n = instance.n();
  LipschitzEstimate est;
  for (std::int64_t s = 0; s < samples; ++s) {
    const Route r1 = random_route(n, rng);
    const Route r2 = random_route(n, rng);
    const double dist = route_distance(r1, r2);
    if (dist == 0.0) continue;
    const double spread = std::abs(tour_length(instance, r1) - tour_length(instance, r2));
    est.k_hat = std::max(est.k_hat, spread / dist);
    ++est.sample_pairs;
  }
  if (est.sample_pairs == 0)
    throw ValidationError("estimate_lipschitz: every sampled pair was identical");
  return est;
}

/// Exact maximum of the same ratio over all unordered pairs of the n!
/// permutations. Only viable for tiny instances.
inline LipschitzEstimate estimate_lipschitz_exhaustive(const ProblemInstance& instance) {
  const int n = instance.n();
  if (n > 7)
    throw InvalidArgument("estimate_lipschitz_exhaustive: instance too large (n > 7)");

  std::vector<Route> routes;
  Route perm;
  perm.order.resize(static_cast<std::size_t>(n));
  std::iota(perm.order.begin(), perm.order.end(), 0);
  do {
    routes.push_back(perm);
  } while (std::next_permutation(perm.order.begin(), perm.order.end()));

  std::vector<double> lengths(routes.size());
  for (std::size_t i = 0; i < routes.size(); ++i)
    lengths[i] = tour_length(instance, routes[i]);

  LipschitzEstimate est;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (std::size_t j = i + 1; j < routes.size(); ++j) {
      const double dist = route_distance(routes[i], routes[j]);
      if (dist == 0.0) continue;
      est.k_hat = std::max(est.k_hat, std::abs(lengths[i] - lengths[j]) / dist);
      ++est.sample_pairs;
    }
  }
  if (est.sample_pairs == 0)
    throw ValidationError("estimate_lipschitz_exhaustive: no usable pairs");
  return est;
}

}  // namespace offopt
