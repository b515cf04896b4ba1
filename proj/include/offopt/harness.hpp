#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "offopt/anneal.hpp"
#include "offopt/csv.hpp"
#include "offopt/dataset.hpp"
#include "offopt/error.hpp"
#include "offopt/ood.hpp"
#include "offopt/surrogate.hpp"
#include "offopt/tsp.hpp"

namespace offopt {

struct PairResult {
  OptResult baseline;  // annealed against -score alone
  OptResult proposed;  // annealed against the distribution-regularized cost
};

struct InstanceResult {
  std::int64_t instance_id = 0;
  int n_cities = 0;
  double baseline_length = 0.0;  // true length of the baseline arm's route
  double proposed_length = 0.0;  // true length of the proposed arm's route
  double ratio = 0.0;            // proposed / baseline
  double baseline_rebound = 0.0;
  double proposed_rebound = 0.0;
};

struct BucketSummary {
  std::string label;
  std::int64_t count = 0;
  double mean_reduction = 0.0;  // 1 - mean(ratio) over the bucket
};

struct EvalReport {
  std::vector<InstanceResult> results;
  std::vector<BucketSummary> buckets;
  double overall_mean_reduction = 0.0;
};

struct ReboundStats {
  double min_length = 0.0;
  double final_length = 0.0;
  double rebound = 0.0;  // (final - min) / min
};

/// How far the final incumbent's true quality fell back from the best point
/// the search ever logged.
inline ReboundStats rebound_metric(const std::vector<double>& true_lengths) {
  if (true_lengths.empty()) throw InvalidArgument("rebound_metric: empty sequence");
  for (double v : true_lengths)
    if (!(v > 0.0)) throw InvalidArgument("rebound_metric: lengths must be positive");
  ReboundStats stats;
  stats.min_length = *std::min_element(true_lengths.begin(), true_lengths.end());
  stats.final_length = true_lengths.back();
  stats.rebound = (stats.final_length - stats.min_length) / stats.min_length;
  return stats;
}

inline std::vector<double> true_length_column(const Trajectory& trajectory) {
  std::vector<double> lengths;
  lengths.reserve(trajectory.samples.size());
  for (const auto& s : trajectory.samples)
    if (s.true_length) lengths.push_back(*s.true_length);
  return lengths;
}

/// Fits the feature Gaussian over every training record and calibrates the
/// trusted-region threshold at the given training-distance quantile.
inline void calibrate_model(RankingModel& model, const Dataset& training_set,
                            double ridge_scale = 1e-6, double alpha_quantile = 0.95,
                            double lambda = 1e6) {
  if (training_set.kind != DatasetKind::train)
    throw InvalidArgument("calibrate_model: dataset must be a training set");
  if (training_set.train.size() < 2)
    throw InvalidArgument("calibrate_model: need at least 2 training records");
  std::vector<FeatureVector> features;
  features.reserve(training_set.train.size());
  for (const TrainingRecord& rec : training_set.train)
    features.push_back(forward(model, rec.instance, rec.route).feature);
  GaussianStats stats = fit_gaussian(features, ridge_scale);
  CostParams params;
  params.alpha = calibrate_alpha(stats, features, alpha_quantile);
  params.lambda = lambda;
  params.alpha_quantile = alpha_quantile;
  model.gaussian = std::move(stats);
  model.cost_params = params;
}

inline CostFn make_baseline_cost(const RankingModel& model, const EdgeEncoderCache& cache) {
  const GaussianStats* stats = model.gaussian ? &*model.gaussian : nullptr;
  return [&model, &cache, stats](const ProblemInstance&, const Route& route) {
    const ForwardResult fwd = forward_cached(model, cache, route);
    CostEval eval;
    eval.score = fwd.score;
    eval.md = stats ? mahalanobis(*stats, fwd.feature) : 0.0;  // diagnostic only
    eval.cost = -fwd.score;
    return eval;
  };
}

inline CostFn make_regularized_cost(const RankingModel& model, const EdgeEncoderCache& cache) {
  if (!model.calibrated())
    throw ValidationError("regularized cost requires a calibrated model "
                          "(gaussian stats and cost params)");
  const GaussianStats* stats = &*model.gaussian;
  const CostParams params = *model.cost_params;
  return [&model, &cache, stats, params](const ProblemInstance&, const Route& route) {
    const ForwardResult fwd = forward_cached(model, cache, route);
    CostEval eval;
    eval.score = fwd.score;
    eval.md = mahalanobis(*stats, fwd.feature);
    eval.cost = regularized_cost(fwd.score, eval.md, params);
    return eval;
  };
}

/// Both arms run with identical SA parameters and an identical random stream
/// (derived as seed + instance id), so they traverse the same proposal
/// sequence until their costs diverge. Oracle logging is on in both.
inline PairResult run_pair(const RankingModel& model, const ProblemInstance& instance,
                           const SAConfig& config) {
  if (!model.calibrated())
    throw ValidationError("run_pair: model is not calibrated (missing gaussian stats "
                          "or cost params)");
  const EdgeEncoderCache cache(model, instance);
  const CostFn baseline_cost = make_baseline_cost(model, cache);
  const CostFn proposed_cost = make_regularized_cost(model, cache);

  const std::uint64_t stream = config.seed + static_cast<std::uint64_t>(instance.id);
  PairResult pair;
  {
    Rng rng(stream);
    pair.baseline = anneal(baseline_cost, instance, config, rng, /*oracle_logging=*/true);
  }
  {
    Rng rng(stream);
    pair.proposed = anneal(proposed_cost, instance, config, rng, /*oracle_logging=*/true);
  }
  return pair;
}

struct EvalOptions {
  int n_min = 40;
  int n_max = 120;
  int jobs = 1;
  std::string trajectory_dir;  // when non-empty, per-instance trajectory CSVs land here
};

namespace detail {

inline InstanceResult summarize_pair(const ProblemInstance& instance, const PairResult& pair) {
  InstanceResult res;
  res.instance_id = instance.id;
  res.n_cities = instance.n();
  res.baseline_length = tour_length(instance, pair.baseline.best_route);
  res.proposed_length = tour_length(instance, pair.proposed.best_route);
  res.ratio = res.proposed_length / res.baseline_length;
  res.baseline_rebound = rebound_metric(true_length_column(pair.baseline.trajectory)).rebound;
  res.proposed_rebound = rebound_metric(true_length_column(pair.proposed.trajectory)).rebound;
  return res;
}

}  // namespace detail

/// Runs the paired comparison over the whole test set. Instances are
/// independent and may be processed in parallel; the report is assembled in
/// instance order, so the output does not depend on scheduling.
inline EvalReport evaluate(const RankingModel& model, const Dataset& test_set,
                           const SAConfig& config, const EvalOptions& options = {}) {
  if (test_set.kind != DatasetKind::test)
    throw InvalidArgument("evaluate: dataset must be a test set");
  if (test_set.test.empty()) throw ValidationError("evaluate: empty test set");
  if (!model.calibrated())
    throw ValidationError("evaluate: model is not calibrated");
  for (const TestRecord& rec : test_set.test)
    if (rec.instance.n() < options.n_min || rec.instance.n() > options.n_max)
      throw ValidationError("evaluate: instance " + std::to_string(rec.id) + " has " +
                            std::to_string(rec.instance.n()) + " cities, outside [" +
                            std::to_string(options.n_min) + "," + std::to_string(options.n_max) +
                            "]");
  if (!options.trajectory_dir.empty())
    std::filesystem::create_directories(options.trajectory_dir);

  const std::size_t count = test_set.test.size();
  std::vector<InstanceResult> results(count);
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure) return;
      }
      const TestRecord& rec = test_set.test[i];
      try {
        const PairResult pair = run_pair(model, rec.instance, config);
        results[i] = detail::summarize_pair(rec.instance, pair);
        if (!options.trajectory_dir.empty()) {
          const std::filesystem::path dir(options.trajectory_dir);
          write_trajectory_csv(pair.baseline.trajectory,
                               (dir / ("traj_" + std::to_string(rec.id) + "_baseline.csv")).string());
          write_trajectory_csv(pair.proposed.trajectory,
                               (dir / ("traj_" + std::to_string(rec.id) + "_proposed.csv")).string());
        }
      } catch (...) {
        // Re-raise under the same category so exit codes survive, with the
        // failing instance id prepended.
        const std::string prefix = "evaluate: instance " + std::to_string(rec.id) + ": ";
        std::exception_ptr wrapped;
        try {
          throw;
        } catch (const InvalidArgument& e) {
          wrapped = std::make_exception_ptr(InvalidArgument(prefix + e.what()));
        } catch (const IoError& e) {
          wrapped = std::make_exception_ptr(IoError(prefix + e.what()));
        } catch (const ParseError& e) {
          wrapped = std::make_exception_ptr(ParseError(prefix + e.what()));
        } catch (const NumericalFailure& e) {
          wrapped = std::make_exception_ptr(NumericalFailure(prefix + e.what()));
        } catch (const std::exception& e) {
          wrapped = std::make_exception_ptr(ValidationError(prefix + e.what()));
        } catch (...) {
          wrapped = std::make_exception_ptr(ValidationError(prefix + "unknown error"));
        }
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = wrapped;
        return;
      }
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.results = std::move(results);

  // Bucket edges follow the reference protocol; the top bucket includes n_max.
  struct Bucket {
    std::string label;
    int lo, hi;  // [lo, hi)
  };
  const std::vector<Bucket> edges = {
      {"N<60", options.n_min, 60},
      {"60<=N<80", 60, 80},
      {"80<=N<100", 80, 100},
      {"100<=N<120", 100, options.n_max + 1},
  };
  double ratio_sum = 0.0;
  for (const auto& res : report.results) ratio_sum += res.ratio;
  report.overall_mean_reduction =
      1.0 - ratio_sum / static_cast<double>(report.results.size());

  for (const Bucket& bucket : edges) {
    BucketSummary summary;
    summary.label = bucket.label;
    double bucket_ratio_sum = 0.0;
    for (const auto& res : report.results) {
      if (res.n_cities >= bucket.lo && res.n_cities < bucket.hi) {
        ++summary.count;
        bucket_ratio_sum += res.ratio;
      }
    }
    summary.mean_reduction =
        summary.count > 0
            ? 1.0 - bucket_ratio_sum / static_cast<double>(summary.count)
            : std::numeric_limits<double>::quiet_NaN();
    report.buckets.push_back(std::move(summary));
  }
  return report;
}

inline void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "instance_id,n_cities,baseline_length,proposed_length,ratio,"
         "baseline_rebound,proposed_rebound\n";
  for (const auto& res : report.results) {
    out << res.instance_id << ',' << res.n_cities << ',' << fixed6(res.baseline_length) << ','
        << fixed6(res.proposed_length) << ',' << fixed6(res.ratio) << ','
        << fixed6(res.baseline_rebound) << ',' << fixed6(res.proposed_rebound) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_summary_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "bucket,count,mean_reduction\n";
  for (const auto& bucket : report.buckets)
    out << bucket.label << ',' << bucket.count << ',' << fixed6(bucket.mean_reduction) << '\n';
  out << "overall," << report.results.size() << ','
      << fixed6(report.overall_mean_reduction) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

/// Percentile bootstrap confidence interval for the mean.
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& values,
                                                   int resamples, double confidence,
                                                   std::uint64_t seed) {
  if (values.empty()) throw InvalidArgument("bootstrap_mean_ci: empty sample");
  if (resamples < 1) throw InvalidArgument("bootstrap_mean_ci: resamples must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw InvalidArgument("bootstrap_mean_ci: confidence must be in (0,1)");

  Rng rng(seed);
  const int n = static_cast<int>(values.size());
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += values[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
    means[static_cast<std::size_t>(b)] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - confidence) / 2.0;
  auto lo_idx = static_cast<std::int64_t>(std::floor(tail * resamples));
  auto hi_idx = static_cast<std::int64_t>(std::ceil((1.0 - tail) * resamples)) - 1;
  lo_idx = std::clamp<std::int64_t>(lo_idx, 0, resamples - 1);
  hi_idx = std::clamp<std::int64_t>(hi_idx, 0, resamples - 1);
  return {means[static_cast<std::size_t>(lo_idx)], means[static_cast<std::size_t>(hi_idx)]};
}

}  // namespace offopt
