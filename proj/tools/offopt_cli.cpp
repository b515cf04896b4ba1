// offopt command-line tool: dataset generation, surrogate training,
// regularized annealing runs, paired evaluation, trajectory plots, and the
// Lipschitz-spread diagnostic.
//
// Exit codes: 0 success, 2 argument error, 3 I/O error, 4 data validation
// error, 5 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "offopt/anneal.hpp"
#include "offopt/csv.hpp"
#include "offopt/dataset.hpp"
#include "offopt/error.hpp"
#include "offopt/harness.hpp"
#include "offopt/ood.hpp"
#include "offopt/plot.hpp"
#include "offopt/surrogate.hpp"
#include "offopt/tsp.hpp"
#include "offopt/version.hpp"

namespace {

using offopt::fixed6;
using ordered_json = nlohmann::ordered_json;

// Every command that produces files drops a manifest next to its primary
// output so the run can be reproduced from the artifact alone.
void write_manifest(const std::string& primary_output, const std::string& subcommand,
                    const ordered_json& flags, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  ordered_json manifest;
  manifest["tool"] = "offopt";
  manifest["version"] = offopt::kVersion;
  manifest["subcommand"] = subcommand;
  manifest["flags"] = flags;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  const std::string path = primary_output + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw offopt::IoError("cannot open for writing: " + path);
  out << manifest.dump(2) << '\n';
  if (!out) throw offopt::IoError("write failed: " + path);
}

struct GenTrainOpts {
  std::string out;
  std::int64_t count = 1000;
  int cities = 100;
  std::uint64_t seed = 1;
};

void cmd_gen_train(const GenTrainOpts& o) {
  offopt::Rng rng(o.seed);
  const offopt::Dataset ds = offopt::generate_training_set(o.count, o.cities, rng);
  offopt::write_dataset(ds, o.out);
  write_manifest(o.out, "gen-train",
                 {{"out", o.out}, {"count", o.count}, {"cities", o.cities}, {"seed", o.seed}},
                 {}, {o.out});
  std::cout << "wrote " << ds.size() << " training records to " << o.out << "\n";
}

struct GenTestOpts {
  std::string out;
  std::int64_t count = 200;
  int min_cities = 40;
  int max_cities = 120;
  std::uint64_t seed = 2;
};

void cmd_gen_test(const GenTestOpts& o) {
  offopt::Rng rng(o.seed);
  const offopt::Dataset ds =
      offopt::generate_test_set(o.count, o.min_cities, o.max_cities, rng);
  offopt::write_dataset(ds, o.out);
  write_manifest(o.out, "gen-test",
                 {{"out", o.out},
                  {"count", o.count},
                  {"min_cities", o.min_cities},
                  {"max_cities", o.max_cities},
                  {"seed", o.seed}},
                 {}, {o.out});
  std::cout << "wrote " << ds.size() << " test instances to " << o.out << "\n";
}

struct TrainOpts {
  std::string data;
  std::string out;
  std::string report;  // defaults to <out>.report.csv
  int epochs = offopt::TrainConfig{}.epochs;
  std::int64_t pairs_per_epoch = offopt::TrainConfig{}.pairs_per_epoch;
  double learning_rate = offopt::TrainConfig{}.learning_rate;
  double holdout = offopt::TrainConfig{}.holdout_fraction;
  std::uint64_t seed = offopt::TrainConfig{}.seed;
  int hidden_dim = offopt::EncoderConfig{}.hidden_dim;
  int feature_dim = offopt::EncoderConfig{}.feature_dim;
  double ridge_scale = 1e-6;
  double alpha_quantile = 0.95;
  double lambda = 1e6;
};

void write_train_report_csv(const offopt::TrainReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw offopt::IoError("cannot open for writing: " + path);
  out << "epoch,mean_loss,holdout_accuracy\n";
  for (const auto& e : report.epochs)
    out << e.epoch << ',' << fixed6(e.mean_loss) << ',' << fixed6(e.holdout_accuracy) << '\n';
  if (!out) throw offopt::IoError("write failed: " + path);
}

void cmd_train(const TrainOpts& o) {
  const offopt::Dataset ds = offopt::read_dataset(o.data, offopt::DatasetKind::train);

  offopt::EncoderConfig encoder;
  encoder.hidden_dim = o.hidden_dim;
  encoder.feature_dim = o.feature_dim;
  offopt::TrainConfig config;
  config.epochs = o.epochs;
  config.pairs_per_epoch = o.pairs_per_epoch;
  config.learning_rate = o.learning_rate;
  config.holdout_fraction = o.holdout;
  config.seed = o.seed;

  auto [model, report] = offopt::train(ds, encoder, config);
  offopt::calibrate_model(model, ds, o.ridge_scale, o.alpha_quantile, o.lambda);
  offopt::save_model(model, o.out);

  const std::string report_path = o.report.empty() ? o.out + ".report.csv" : o.report;
  write_train_report_csv(report, report_path);
  write_manifest(o.out, "train",
                 {{"data", o.data},
                  {"out", o.out},
                  {"report", report_path},
                  {"epochs", o.epochs},
                  {"pairs_per_epoch", o.pairs_per_epoch},
                  {"lr", o.learning_rate},
                  {"holdout", o.holdout},
                  {"seed", o.seed},
                  {"hidden", o.hidden_dim},
                  {"feature_dim", o.feature_dim},
                  {"ridge_scale", o.ridge_scale},
                  {"alpha_quantile", o.alpha_quantile},
                  {"lambda", o.lambda}},
                 {o.data}, {o.out, report_path});

  const auto& last = report.epochs.back();
  std::cout << "trained on " << ds.size() << " records; final mean loss "
            << fixed6(last.mean_loss) << ", holdout accuracy "
            << fixed6(last.holdout_accuracy) << "\n"
            << "calibrated alpha=" << fixed6(model.cost_params->alpha)
            << " (quantile " << fixed6(o.alpha_quantile) << "), lambda="
            << fixed6(o.lambda) << "\n";
}

struct OptimizeOpts {
  std::string model;
  std::string data;
  std::int64_t id = 0;
  std::string mode = "proposed";
  std::string out;
  std::int64_t iters = offopt::SAConfig{}.iterations;
  int t0_samples = offopt::SAConfig{}.t0_samples;
  double final_temp_ratio = offopt::SAConfig{}.final_temp_ratio;
  std::int64_t log_every = offopt::SAConfig{}.log_every;
  std::uint64_t seed = 0;
  double lambda = -1.0;  // < 0: use the model's stored value
  bool no_oracle_log = false;
};

const offopt::TestRecord& find_test_record(const offopt::Dataset& ds, std::int64_t id) {
  for (const auto& rec : ds.test)
    if (rec.id == id) return rec;
  throw offopt::ValidationError("unknown instance id " + std::to_string(id));
}

void cmd_optimize(const OptimizeOpts& o) {
  offopt::RankingModel model = offopt::load_model(o.model);
  if (o.lambda >= 0.0) {
    if (!model.cost_params)
      throw offopt::ValidationError("--lambda override requires a calibrated model");
    model.cost_params->lambda = o.lambda;
  }
  const offopt::Dataset ds = offopt::read_dataset(o.data, offopt::DatasetKind::test);
  const offopt::TestRecord& rec = find_test_record(ds, o.id);

  offopt::SAConfig config;
  config.iterations = o.iters;
  config.t0_samples = o.t0_samples;
  config.final_temp_ratio = o.final_temp_ratio;
  config.log_every = o.log_every;
  config.seed = o.seed;

  const offopt::EdgeEncoderCache cache(model, rec.instance);
  const offopt::CostFn cost = o.mode == "baseline"
                                  ? offopt::make_baseline_cost(model, cache)
                                  : offopt::make_regularized_cost(model, cache);

  offopt::Rng rng(config.seed + static_cast<std::uint64_t>(rec.id));
  const offopt::OptResult result =
      offopt::anneal(cost, rec.instance, config, rng, /*oracle_logging=*/!o.no_oracle_log);
  offopt::write_trajectory_csv(result.trajectory, o.out);

  write_manifest(o.out, "optimize",
                 {{"model", o.model},
                  {"data", o.data},
                  {"id", o.id},
                  {"mode", o.mode},
                  {"out", o.out},
                  {"iters", o.iters},
                  {"t0_samples", o.t0_samples},
                  {"final_temp_ratio", o.final_temp_ratio},
                  {"log_every", o.log_every},
                  {"seed", o.seed},
                  {"lambda", o.lambda >= 0.0 ? ordered_json(o.lambda) : ordered_json(nullptr)},
                  {"oracle_log", !o.no_oracle_log}},
                 {o.model, o.data}, {o.out});

  const double true_length = offopt::tour_length(rec.instance, result.best_route);
  std::cout << "instance " << rec.id << " n=" << rec.instance.n() << " mode=" << o.mode
            << " true_length=" << fixed6(true_length)
            << " best_cost=" << fixed6(result.best_cost) << "\n";
}

struct EvalOpts {
  std::string model;
  std::string data;
  std::string out_report;
  std::string out_summary;
  std::int64_t iters = offopt::SAConfig{}.iterations;
  int t0_samples = offopt::SAConfig{}.t0_samples;
  double final_temp_ratio = offopt::SAConfig{}.final_temp_ratio;
  std::int64_t log_every = offopt::SAConfig{}.log_every;
  std::uint64_t seed = 0;
  int jobs = 1;
  int min_cities = 40;
  int max_cities = 120;
  std::string trajectories;
};

void cmd_eval(const EvalOpts& o) {
  const offopt::RankingModel model = offopt::load_model(o.model);
  const offopt::Dataset ds = offopt::read_dataset(o.data, offopt::DatasetKind::test);

  offopt::SAConfig config;
  config.iterations = o.iters;
  config.t0_samples = o.t0_samples;
  config.final_temp_ratio = o.final_temp_ratio;
  config.log_every = o.log_every;
  config.seed = o.seed;

  offopt::EvalOptions options;
  options.n_min = o.min_cities;
  options.n_max = o.max_cities;
  options.jobs = o.jobs;
  options.trajectory_dir = o.trajectories;

  const offopt::EvalReport report = offopt::evaluate(model, ds, config, options);
  offopt::write_report_csv(report, o.out_report);
  offopt::write_summary_csv(report, o.out_summary);

  std::vector<std::string> outputs = {o.out_report, o.out_summary};
  if (!o.trajectories.empty()) outputs.push_back(o.trajectories);
  write_manifest(o.out_report, "eval",
                 {{"model", o.model},
                  {"data", o.data},
                  {"out_report", o.out_report},
                  {"out_summary", o.out_summary},
                  {"iters", o.iters},
                  {"t0_samples", o.t0_samples},
                  {"final_temp_ratio", o.final_temp_ratio},
                  {"log_every", o.log_every},
                  {"seed", o.seed},
                  {"jobs", o.jobs},
                  {"min_cities", o.min_cities},
                  {"max_cities", o.max_cities},
                  {"trajectories", o.trajectories}},
                 {o.model, o.data}, outputs);

  for (const auto& bucket : report.buckets)
    std::cout << bucket.label << ": count=" << bucket.count
              << " mean_reduction=" << fixed6(bucket.mean_reduction) << "\n";
  std::cout << "overall: count=" << report.results.size()
            << " mean_reduction=" << fixed6(report.overall_mean_reduction) << "\n";
}

struct PlotOpts {
  std::vector<std::string> inputs;
  std::string out;
  std::vector<std::string> labels;
};

void cmd_plot(const PlotOpts& o) {
  std::vector<offopt::PlotSeries> series;
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    const offopt::Trajectory traj = offopt::read_trajectory_csv(o.inputs[i]);
    offopt::PlotSeries s;
    s.label = i < o.labels.size() ? o.labels[i]
                                  : std::filesystem::path(o.inputs[i]).stem().string();
    for (std::size_t r = 0; r < traj.samples.size(); ++r) {
      const auto& sample = traj.samples[r];
      if (!sample.true_length)
        throw offopt::ParseError(o.inputs[i] + ": row " + std::to_string(r + 1) +
                                 ", column 'true_length': empty (run with oracle logging)");
      s.points.emplace_back(static_cast<double>(sample.iteration), *sample.true_length);
    }
    if (s.points.empty())
      throw offopt::ValidationError(o.inputs[i] + ": trajectory has no samples");
    series.push_back(std::move(s));
  }

  const std::string svg = offopt::render_line_svg(series, "iteration", "true route length");
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw offopt::IoError("cannot open for writing: " + o.out);
  out << svg;
  if (!out) throw offopt::IoError("write failed: " + o.out);

  ordered_json flags = {{"out", o.out}, {"inputs", o.inputs}, {"labels", o.labels}};
  write_manifest(o.out, "plot", flags, o.inputs, {o.out});
  std::cout << "wrote " << o.out << " (" << series.size() << " series)\n";
}

struct LipschitzOpts {
  std::string data;
  std::int64_t id = 0;
  std::int64_t samples = 1000;
  std::uint64_t seed = 7;
  bool exhaustive = false;
};

void cmd_lipschitz(const LipschitzOpts& o) {
  const offopt::Dataset ds = offopt::read_dataset(o.data, offopt::DatasetKind::test);
  const offopt::TestRecord& rec = find_test_record(ds, o.id);
  offopt::LipschitzEstimate est;
  if (o.exhaustive) {
    est = offopt::estimate_lipschitz_exhaustive(rec.instance);
  } else {
    offopt::Rng rng(o.seed);
    est = offopt::estimate_lipschitz(rec.instance, o.samples, rng);
  }
  std::cout << "instance " << rec.id << " n=" << rec.instance.n()
            << " k_hat=" << fixed6(est.k_hat) << " pairs=" << est.sample_pairs << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline surrogate-based tour optimization toolkit"};
  app.set_version_flag("--version", offopt::kVersion);
  app.require_subcommand(1);

  GenTrainOpts gen_train;
  auto* c_gen_train = app.add_subcommand(
      "gen-train", "Generate a historical training set (random routes with recorded lengths)");
  c_gen_train->add_option("--out", gen_train.out, "Output dataset path (JSON lines)")->required();
  c_gen_train->add_option("--count", gen_train.count, "Number of records");
  c_gen_train->add_option("--cities", gen_train.cities, "Cities per instance");
  c_gen_train->add_option("--seed", gen_train.seed, "Random seed");

  GenTestOpts gen_test;
  auto* c_gen_test =
      app.add_subcommand("gen-test", "Generate a test set of unsolved instances");
  c_gen_test->add_option("--out", gen_test.out, "Output dataset path (JSON lines)")->required();
  c_gen_test->add_option("--count", gen_test.count, "Number of instances");
  c_gen_test->add_option("--min-cities", gen_test.min_cities, "Smallest city count");
  c_gen_test->add_option("--max-cities", gen_test.max_cities, "Largest city count");
  c_gen_test->add_option("--seed", gen_test.seed, "Random seed");

  TrainOpts train_opts;
  auto* c_train = app.add_subcommand(
      "train", "Train the pairwise-ranking estimator and calibrate the trust region");
  c_train->add_option("--data", train_opts.data, "Training dataset")->required();
  c_train->add_option("--out", train_opts.out, "Output model path (JSON)")->required();
  c_train->add_option("--report", train_opts.report,
                      "Training report CSV (default <out>.report.csv)");
  c_train->add_option("--epochs", train_opts.epochs, "Training epochs");
  c_train->add_option("--pairs-per-epoch", train_opts.pairs_per_epoch, "SGD pairs per epoch");
  c_train->add_option("--lr", train_opts.learning_rate, "Learning rate");
  c_train->add_option("--holdout", train_opts.holdout, "Holdout fraction");
  c_train->add_option("--seed", train_opts.seed, "Training seed");
  c_train->add_option("--hidden", train_opts.hidden_dim, "Encoder hidden width");
  c_train->add_option("--feature-dim", train_opts.feature_dim, "Feature (last hidden) width");
  c_train->add_option("--ridge-scale", train_opts.ridge_scale, "Covariance ridge scale");
  c_train->add_option("--alpha-quantile", train_opts.alpha_quantile,
                      "Training-distance quantile for alpha");
  c_train->add_option("--lambda", train_opts.lambda, "Out-of-distribution penalty weight");

  OptimizeOpts opt_opts;
  auto* c_opt = app.add_subcommand("optimize", "Anneal one instance and write its trajectory");
  c_opt->add_option("--model", opt_opts.model, "Model path")->required();
  c_opt->add_option("--data", opt_opts.data, "Test dataset")->required();
  c_opt->add_option("--id", opt_opts.id, "Instance id")->required();
  c_opt->add_option("--mode", opt_opts.mode, "Cost function arm")
      ->check(CLI::IsMember({"proposed", "baseline"}));
  c_opt->add_option("--out", opt_opts.out, "Trajectory CSV path")->required();
  c_opt->add_option("--iters", opt_opts.iters, "Annealing iterations");
  c_opt->add_option("--t0-samples", opt_opts.t0_samples, "Samples for initial temperature");
  c_opt->add_option("--final-temp-ratio", opt_opts.final_temp_ratio, "T_final / T0");
  c_opt->add_option("--log-every", opt_opts.log_every, "Trajectory sampling stride");
  c_opt->add_option("--seed", opt_opts.seed, "Base seed (stream = seed + id)");
  c_opt->add_option("--lambda", opt_opts.lambda, "Override the stored penalty weight");
  c_opt->add_flag("--no-oracle-log", opt_opts.no_oracle_log,
                  "Leave the true-length trajectory columns empty");

  EvalOpts eval_opts;
  auto* c_eval = app.add_subcommand(
      "eval", "Paired baseline/proposed evaluation over a test set");
  c_eval->add_option("--model", eval_opts.model, "Model path")->required();
  c_eval->add_option("--data", eval_opts.data, "Test dataset")->required();
  c_eval->add_option("--out-report", eval_opts.out_report, "Per-instance report CSV")->required();
  c_eval->add_option("--out-summary", eval_opts.out_summary, "Bucket summary CSV")->required();
  c_eval->add_option("--iters", eval_opts.iters, "Annealing iterations");
  c_eval->add_option("--t0-samples", eval_opts.t0_samples, "Samples for initial temperature");
  c_eval->add_option("--final-temp-ratio", eval_opts.final_temp_ratio, "T_final / T0");
  c_eval->add_option("--log-every", eval_opts.log_every, "Trajectory sampling stride");
  c_eval->add_option("--seed", eval_opts.seed, "Base seed (per-instance stream = seed + id)");
  c_eval->add_option("--jobs", eval_opts.jobs, "Parallel workers");
  c_eval->add_option("--min-cities", eval_opts.min_cities, "Reject instances below this");
  c_eval->add_option("--max-cities", eval_opts.max_cities, "Reject instances above this");
  c_eval->add_option("--trajectories", eval_opts.trajectories,
                     "Directory for per-instance trajectory CSVs");

  PlotOpts plot_opts;
  auto* c_plot = app.add_subcommand("plot", "Render trajectories as a static SVG line chart");
  c_plot->add_option("inputs", plot_opts.inputs, "One or two trajectory CSVs")
      ->required()
      ->expected(1, 2);
  c_plot->add_option("--out", plot_opts.out, "Output SVG path")->required();
  c_plot->add_option("--labels", plot_opts.labels, "Legend labels (one per input)");

  LipschitzOpts lips_opts;
  auto* c_lips = app.add_subcommand(
      "lipschitz", "Estimate the length-vs-route-distance spread constant of an instance");
  c_lips->add_option("--data", lips_opts.data, "Test dataset")->required();
  c_lips->add_option("--id", lips_opts.id, "Instance id")->required();
  c_lips->add_option("--samples", lips_opts.samples, "Sampled route pairs");
  c_lips->add_option("--seed", lips_opts.seed, "Random seed");
  c_lips->add_flag("--exhaustive", lips_opts.exhaustive,
                   "Enumerate all permutation pairs (small instances only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(c_gen_train)) cmd_gen_train(gen_train);
    else if (app.got_subcommand(c_gen_test)) cmd_gen_test(gen_test);
    else if (app.got_subcommand(c_train)) cmd_train(train_opts);
    else if (app.got_subcommand(c_opt)) cmd_optimize(opt_opts);
    else if (app.got_subcommand(c_eval)) cmd_eval(eval_opts);
    else if (app.got_subcommand(c_plot)) cmd_plot(plot_opts);
    else if (app.got_subcommand(c_lips)) cmd_lipschitz(lips_opts);
  } catch (const offopt::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const offopt::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const offopt::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const offopt::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const offopt::NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
