#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "offopt/error.hpp"
#include "offopt/json_util.hpp"
#include "offopt/rng.hpp"
#include "offopt/tsp.hpp"

namespace offopt {

/// One historical observation: a condition, the solution that was used on it,
/// and the measured outcome (true tour length).
struct TrainingRecord {
  std::int64_t id = 0;
  ProblemInstance instance;
  Route route;
  double length = 0.0;
};

/// A condition to be solved; test records carry no solution.
struct TestRecord {
  std::int64_t id = 0;
  ProblemInstance instance;
};

enum class DatasetKind { train, test };

struct Dataset {
  DatasetKind kind = DatasetKind::train;
  std::vector<TrainingRecord> train;  // populated when kind == train
  std::vector<TestRecord> test;       // populated when kind == test

  std::size_t size() const {
    return kind == DatasetKind::train ? train.size() : test.size();
  }
};

/// `count` records, each with n uniform cities, one uniformly random route,
/// and the recorded true length of that route.
inline Dataset generate_training_set(std::int64_t count, int n, Rng& rng) {
  if (count < 0) throw InvalidArgument("generate_training_set: negative count");
  if (n < 2) throw InvalidArgument("generate_training_set: need at least 2 cities");
  Dataset ds;
  ds.kind = DatasetKind::train;
  ds.train.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    TrainingRecord rec;
    rec.id = i;
    rec.instance = sample_instance(n, rng);
    rec.instance.id = i;
    rec.route = random_route(n, rng);
    rec.length = tour_length(rec.instance, rec.route);
    ds.train.push_back(std::move(rec));
  }
  return ds;
}

/// `count` instances with city counts drawn uniformly from [n_min, n_max].
inline Dataset generate_test_set(std::int64_t count, int n_min, int n_max, Rng& rng) {
  if (count < 0) throw InvalidArgument("generate_test_set: negative count");
  if (n_min < 2 || n_min > n_max)
    throw InvalidArgument("generate_test_set: need 2 <= n_min <= n_max");
  Dataset ds;
  ds.kind = DatasetKind::test;
  ds.test.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    TestRecord rec;
    rec.id = i;
    rec.instance = sample_instance(rng.uniform_int(n_min, n_max), rng);
    rec.instance.id = i;
    ds.test.push_back(std::move(rec));
  }
  return ds;
}

namespace detail {

inline ordered_json cities_to_json(const ProblemInstance& instance) {
  ordered_json arr = ordered_json::array();
  for (const City& c : instance.cities) arr.push_back(ordered_json::array({c.x, c.y}));
  return arr;
}

inline ProblemInstance parse_instance(const ordered_json& obj, std::int64_t id,
                                      const std::string& where) {
  if (!obj.is_array()) throw ParseError(where + ": \"cities\" must be an array");
  ProblemInstance instance;
  instance.id = id;
  for (const auto& entry : obj) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number())
      throw ParseError(where + ": each city must be a [x, y] pair of numbers");
    City c{entry[0].get<double>(), entry[1].get<double>()};
    if (!std::isfinite(c.x) || !std::isfinite(c.y) || c.x < 0.0 || c.x > 1.0 || c.y < 0.0 ||
        c.y > 1.0)
      throw ValidationError(where + ": city coordinates must lie in [0,1]");
    instance.cities.push_back(c);
  }
  if (instance.n() < 2) throw ValidationError(where + ": instance needs at least 2 cities");
  return instance;
}

inline Route parse_route(const ordered_json& obj, const ProblemInstance& instance,
                         const std::string& where) {
  if (!obj.is_array()) throw ParseError(where + ": \"route\" must be an array");
  Route route;
  for (const auto& entry : obj) {
    if (!entry.is_number_integer()) throw ParseError(where + ": route entries must be integers");
    route.order.push_back(entry.get<int>());
  }
  if (!is_valid_route(route, instance.n()))
    throw ValidationError(where + ": route is not a permutation of 0.." +
                          std::to_string(instance.n() - 1));
  return route;
}

}  // namespace detail

/// One record per line, UTF-8 line-delimited JSON.
///   train: {"id":..,"cities":[[x,y],..],"route":[..],"length":..}
///   test:  {"id":..,"cities":[[x,y],..]}
inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  using detail::ordered_json;
  if (ds.kind == DatasetKind::train) {
    for (const TrainingRecord& rec : ds.train) {
      ordered_json j;
      j["id"] = rec.id;
      j["cities"] = detail::cities_to_json(rec.instance);
      j["route"] = rec.route.order;
      j["length"] = rec.length;
      out << j.dump() << '\n';
    }
  } else {
    for (const TestRecord& rec : ds.test) {
      ordered_json j;
      j["id"] = rec.id;
      j["cities"] = detail::cities_to_json(rec.instance);
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(const std::string& path, DatasetKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  using detail::ordered_json;
  Dataset ds;
  ds.kind = kind;
  std::string line;
  std::int64_t line_no = 0;
  std::int64_t prev_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ": line " + std::to_string(line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");

    if (kind == DatasetKind::train)
      detail::expect_keys(j, {"id", "cities", "route", "length"}, where);
    else
      detail::expect_keys(j, {"id", "cities"}, where);

    if (!j["id"].is_number_integer()) throw ParseError(where + ": \"id\" must be an integer");
    const std::int64_t id = j["id"].get<std::int64_t>();
    if (id <= prev_id)
      throw ValidationError(where + ": ids must be unique and strictly increasing");
    prev_id = id;

    ProblemInstance instance = detail::parse_instance(j["cities"], id, where);

    if (kind == DatasetKind::train) {
      TrainingRecord rec;
      rec.id = id;
      rec.route = detail::parse_route(j["route"], instance, where);
      if (!j["length"].is_number()) throw ParseError(where + ": \"length\" must be a number");
      rec.length = j["length"].get<double>();
      rec.instance = std::move(instance);
      const double oracle = tour_length(rec.instance, rec.route);
      if (!(std::abs(rec.length - oracle) <= 1e-9))
        throw ValidationError(where + ": recorded length " + std::to_string(rec.length) +
                              " does not match the tour length " + std::to_string(oracle));
      ds.train.push_back(std::move(rec));
    } else {
      TestRecord rec;
      rec.id = id;
      rec.instance = std::move(instance);
      ds.test.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace offopt
