#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "offopt/dataset.hpp"
#include "offopt/error.hpp"
#include "offopt/json_util.hpp"
#include "offopt/ood.hpp"
#include "offopt/rng.hpp"
#include "offopt/tsp.hpp"

namespace offopt {

/// Width of one directed-edge input vector:
/// (a.x, a.y, b.x, b.y, b.x - a.x, b.y - a.y).
inline constexpr int kEdgeDim = 6;

struct EncoderConfig {
  int edge_dim = kEdgeDim;
  int hidden_dim = 64;
  int feature_dim = 32;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  std::int64_t pairs_per_epoch = 0;
};

/// The learned performance estimator. An edge-set encoder (two tanh layers
/// applied per directed tour edge, mean-pooled over the edges) feeds a scoring
/// head (tanh layer producing the feature vector, then a linear unit).
/// Higher score means better predicted performance, i.e. a shorter tour.
///
/// Mean pooling over the edge set makes the score independent of where the
/// tour "starts" and lets one model handle any city count.
struct RankingModel {
  EncoderConfig config;
  Eigen::MatrixXd enc1_w, enc2_w;    // hidden x edge_dim, hidden x hidden
  Eigen::VectorXd enc1_b, enc2_b;    // hidden
  Eigen::MatrixXd head1_w, head2_w;  // feature x hidden, 1 x feature
  Eigen::VectorXd head1_b, head2_b;  // feature, 1
  std::optional<GaussianStats> gaussian;
  std::optional<CostParams> cost_params;
  TrainMeta meta;

  bool calibrated() const { return gaussian.has_value() && cost_params.has_value(); }
};

/// Gradient accumulator with the same shapes as the model weights.
struct ModelGrads {
  Eigen::MatrixXd enc1_w, enc2_w, head1_w, head2_w;
  Eigen::VectorXd enc1_b, enc2_b, head1_b, head2_b;

  explicit ModelGrads(const EncoderConfig& cfg)
      : enc1_w(Eigen::MatrixXd::Zero(cfg.hidden_dim, cfg.edge_dim)),
        enc2_w(Eigen::MatrixXd::Zero(cfg.hidden_dim, cfg.hidden_dim)),
        head1_w(Eigen::MatrixXd::Zero(cfg.feature_dim, cfg.hidden_dim)),
        head2_w(Eigen::MatrixXd::Zero(1, cfg.feature_dim)),
        enc1_b(Eigen::VectorXd::Zero(cfg.hidden_dim)),
        enc2_b(Eigen::VectorXd::Zero(cfg.hidden_dim)),
        head1_b(Eigen::VectorXd::Zero(cfg.feature_dim)),
        head2_b(Eigen::VectorXd::Zero(1)) {}
};

/// Flat view over every trainable tensor, in a fixed order. Lets generic
/// code (SGD, finite-difference checks) walk model and gradient in lockstep.
struct ParamView {
  const char* name;
  double* data;
  std::ptrdiff_t size;
};

namespace detail {

template <typename ModelLike>
inline std::vector<ParamView> param_views_impl(ModelLike& m) {
  return {
      {"enc1_w", m.enc1_w.data(), m.enc1_w.size()},
      {"enc1_b", m.enc1_b.data(), m.enc1_b.size()},
      {"enc2_w", m.enc2_w.data(), m.enc2_w.size()},
      {"enc2_b", m.enc2_b.data(), m.enc2_b.size()},
      {"head1_w", m.head1_w.data(), m.head1_w.size()},
      {"head1_b", m.head1_b.data(), m.head1_b.size()},
      {"head2_w", m.head2_w.data(), m.head2_w.size()},
      {"head2_b", m.head2_b.data(), m.head2_b.size()},
  };
}

}  // namespace detail

inline std::vector<ParamView> param_views(RankingModel& m) {
  return detail::param_views_impl(m);
}
inline std::vector<ParamView> param_views(ModelGrads& g) {
  return detail::param_views_impl(g);
}

inline void validate_config(const EncoderConfig& cfg) {
  if (cfg.edge_dim < 1 || cfg.hidden_dim < 1 || cfg.feature_dim < 1)
    throw InvalidArgument("EncoderConfig: all dimensions must be >= 1");
}

/// Fresh model with weights and biases drawn uniformly from
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, in a fixed fill order.
inline RankingModel init_model(const EncoderConfig& cfg, Rng& rng) {
  validate_config(cfg);
  RankingModel m;
  m.config = cfg;

  const auto fill = [&rng](Eigen::MatrixXd& w, Eigen::VectorXd& b, int rows, int cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    w.resize(rows, cols);
    b.resize(rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    for (int r = 0; r < rows; ++r) b(r) = (2.0 * rng.uniform() - 1.0) * bound;
  };

  fill(m.enc1_w, m.enc1_b, cfg.hidden_dim, cfg.edge_dim);
  fill(m.enc2_w, m.enc2_b, cfg.hidden_dim, cfg.hidden_dim);
  fill(m.head1_w, m.head1_b, cfg.feature_dim, cfg.hidden_dim);
  fill(m.head2_w, m.head2_b, 1, cfg.feature_dim);
  return m;
}

/// One row per directed closed-tour edge a->b, in visit order; the last row
/// is the edge from the final visited city back to the first.
inline Eigen::MatrixXd edge_features(const ProblemInstance& instance, const Route& route) {
  validate_route(route, instance.n());
  const int n = instance.n();
  Eigen::MatrixXd features(n, kEdgeDim);
  for (int i = 0; i < n; ++i) {
    const City& a = instance.cities[static_cast<std::size_t>(route.order[static_cast<std::size_t>(i)])];
    const City& b = instance.cities[static_cast<std::size_t>(route.order[static_cast<std::size_t>((i + 1) % n)])];
    features.row(i) << a.x, a.y, b.x, b.y, b.x - a.x, b.y - a.y;
  }
  return features;
}

struct ForwardResult {
  double score = 0.0;
  FeatureVector feature;
};

namespace detail {

/// Intermediate activations kept for backpropagation.
struct ForwardTrace {
  Eigen::MatrixXd edges;  // N x edge_dim
  Eigen::MatrixXd h1;     // N x hidden
  Eigen::MatrixXd h2;     // N x hidden
  Eigen::VectorXd pooled; // hidden
  Eigen::VectorXd feature;
  double score = 0.0;
};

inline void check_model_shapes(const RankingModel& m) {
  const EncoderConfig& c = m.config;
  validate_config(c);
  if (m.enc1_w.rows() != c.hidden_dim || m.enc1_w.cols() != c.edge_dim ||
      m.enc2_w.rows() != c.hidden_dim || m.enc2_w.cols() != c.hidden_dim ||
      m.head1_w.rows() != c.feature_dim || m.head1_w.cols() != c.hidden_dim ||
      m.head2_w.rows() != 1 || m.head2_w.cols() != c.feature_dim ||
      m.enc1_b.size() != c.hidden_dim || m.enc2_b.size() != c.hidden_dim ||
      m.head1_b.size() != c.feature_dim || m.head2_b.size() != 1)
    throw InvalidArgument("RankingModel: weight shapes do not match the config");
}

/// Encoder applied to a batch of edge rows: two affine layers with tanh.
inline Eigen::MatrixXd encode_edges(const RankingModel& m, const Eigen::MatrixXd& edges) {
  const Eigen::MatrixXd h1 =
      ((edges * m.enc1_w.transpose()).rowwise() + m.enc1_b.transpose()).array().tanh();
  return ((h1 * m.enc2_w.transpose()).rowwise() + m.enc2_b.transpose()).array().tanh();
}

/// Sequential row sum; keeps pooling deterministic and identical between the
/// direct and the cached forward path.
inline Eigen::VectorXd mean_rows(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) sum += rows.row(r).transpose();
  return sum / static_cast<double>(rows.rows());
}

inline void head_forward(const RankingModel& m, const Eigen::VectorXd& pooled,
                         Eigen::VectorXd& feature, double& score) {
  feature = (m.head1_w * pooled + m.head1_b).array().tanh();
  score = (m.head2_w * feature)(0) + m.head2_b(0);
}

inline ForwardTrace forward_trace(const RankingModel& m, Eigen::MatrixXd edges) {
  check_model_shapes(m);
  if (edges.cols() != m.config.edge_dim)
    throw InvalidArgument("forward: edge feature width does not match the model");
  ForwardTrace t;
  t.edges = std::move(edges);
  t.h1 = ((t.edges * m.enc1_w.transpose()).rowwise() + m.enc1_b.transpose()).array().tanh();
  t.h2 = ((t.h1 * m.enc2_w.transpose()).rowwise() + m.enc2_b.transpose()).array().tanh();
  t.pooled = mean_rows(t.h2);
  head_forward(m, t.pooled, t.feature, t.score);
  if (!std::isfinite(t.score) || !t.feature.allFinite())
    throw NumericalFailure("forward: non-finite network output");
  return t;
}

/// Accumulates d(loss)/d(weights) for one record given d(loss)/d(score).
inline void backward_trace(const RankingModel& m, const ForwardTrace& t, double dscore,
                           ModelGrads& grads) {
  const double n = static_cast<double>(t.h2.rows());

  // head
  grads.head2_w.noalias() += dscore * t.feature.transpose();
  grads.head2_b(0) += dscore;
  const Eigen::VectorXd dfeature = m.head2_w.transpose() * dscore;
  const Eigen::VectorXd dz3 =
      dfeature.array() * (1.0 - t.feature.array().square());
  grads.head1_w.noalias() += dz3 * t.pooled.transpose();
  grads.head1_b += dz3;
  const Eigen::VectorXd dpooled = m.head1_w.transpose() * dz3;

  // mean pool: every edge row receives dpooled / n
  const Eigen::RowVectorXd dh2_row = (dpooled / n).transpose();
  const Eigen::MatrixXd dz2 =
      (1.0 - t.h2.array().square()).rowwise() * dh2_row.array();
  grads.enc2_w.noalias() += dz2.transpose() * t.h1;
  grads.enc2_b += dz2.colwise().sum().transpose();
  const Eigen::MatrixXd dh1 = dz2 * m.enc2_w;
  const Eigen::MatrixXd dz1 = dh1.array() * (1.0 - t.h1.array().square());
  grads.enc1_w.noalias() += dz1.transpose() * t.edges;
  grads.enc1_b += dz1.colwise().sum().transpose();
}

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Score and last-hidden-layer feature of one (condition, solution) pair.
inline ForwardResult forward(const RankingModel& model, const ProblemInstance& instance,
                             const Route& route) {
  detail::ForwardTrace t = detail::forward_trace(model, edge_features(instance, route));
  return {t.score, std::move(t.feature)};
}

/// Encoder outputs for every directed city pair of one instance, computed
/// once so that repeated forward passes during search cost only the pooling
/// and the head. Valid for a frozen model.
class EdgeEncoderCache {
 public:
  EdgeEncoderCache(const RankingModel& model, const ProblemInstance& instance)
      : n_(instance.n()) {
    detail::check_model_shapes(model);
    Eigen::MatrixXd edges = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(n_) * n_, kEdgeDim);
    for (int a = 0; a < n_; ++a) {
      const City& ca = instance.cities[static_cast<std::size_t>(a)];
      for (int b = 0; b < n_; ++b) {
        if (a == b) continue;
        const City& cb = instance.cities[static_cast<std::size_t>(b)];
        edges.row(static_cast<Eigen::Index>(a) * n_ + b) << ca.x, ca.y, cb.x, cb.y,
            cb.x - ca.x, cb.y - ca.y;
      }
    }
    encoded_ = detail::encode_edges(model, edges);
    if (!encoded_.allFinite())
      throw NumericalFailure("EdgeEncoderCache: non-finite encoder output");
  }

  int n() const { return n_; }
  const Eigen::MatrixXd& encoded() const { return encoded_; }

 private:
  int n_;
  Eigen::MatrixXd encoded_;  // (n*n) x hidden, row a*n+b = encoder(a->b)
};

inline ForwardResult forward_cached(const RankingModel& model, const EdgeEncoderCache& cache,
                                    const Route& route) {
  validate_route(route, cache.n());
  const int n = cache.n();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.config.hidden_dim);
  for (int i = 0; i < n; ++i) {
    const int a = route.order[static_cast<std::size_t>(i)];
    const int b = route.order[static_cast<std::size_t>((i + 1) % n)];
    sum += cache.encoded().row(static_cast<Eigen::Index>(a) * n + b).transpose();
  }
  const Eigen::VectorXd pooled = sum / static_cast<double>(n);
  ForwardResult out;
  detail::head_forward(model, pooled, out.feature, out.score);
  if (!std::isfinite(out.score) || !out.feature.allFinite())
    throw NumericalFailure("forward_cached: non-finite network output");
  return out;
}

/// Probability that pair i outperforms pair j, P = sigmoid(s_i - s_j).
/// Saturates smoothly and is clamped to the open interval (0,1).
inline double pairwise_probability(double s_i, double s_j) {
  if (!std::isfinite(s_i) || !std::isfinite(s_j))
    throw InvalidArgument("pairwise_probability: scores must be finite");
  const double p = detail::sigmoid(s_i - s_j);
  return std::clamp(p, std::numeric_limits<double>::min(),
                    std::nextafter(1.0, 0.0));
}

struct PairLoss {
  double loss = 0.0;
  ModelGrads grads;
};

/// Cross-entropy of the ranking probability against the observed order
/// (shorter recorded tour = better performance; exact ties target 0.5),
/// with the full gradient through both forward passes.
inline PairLoss pair_loss_and_gradient(const RankingModel& model, const TrainingRecord& rec_i,
                                       const TrainingRecord& rec_j) {
  const detail::ForwardTrace trace_i =
      detail::forward_trace(model, edge_features(rec_i.instance, rec_i.route));
  const detail::ForwardTrace trace_j =
      detail::forward_trace(model, edge_features(rec_j.instance, rec_j.route));

  const double target = rec_i.length < rec_j.length   ? 1.0
                        : rec_i.length > rec_j.length ? 0.0
                                                      : 0.5;
  const double delta = trace_i.score - trace_j.score;

  PairLoss result{0.0, ModelGrads(model.config)};
  result.loss = detail::stable_softplus(delta) - target * delta;
  if (!std::isfinite(result.loss))
    throw NumericalFailure("pair_loss_and_gradient: non-finite loss");

  const double ddelta = detail::sigmoid(delta) - target;
  detail::backward_trace(model, trace_i, ddelta, result.grads);
  detail::backward_trace(model, trace_j, -ddelta, result.grads);
  return result;
}

struct TrainConfig {
  int epochs = 30;
  std::int64_t pairs_per_epoch = 4000;
  double learning_rate = 0.01;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double holdout_accuracy = 0.0;  // NaN when the holdout yields no usable pair
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<std::int64_t> holdout_ids;
};

namespace detail {

inline double holdout_pair_accuracy(const std::vector<double>& scores,
                                    const std::vector<double>& lengths) {
  std::int64_t correct = 0, total = 0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    for (std::size_t b = a + 1; b < scores.size(); ++b) {
      if (lengths[a] == lengths[b]) continue;
      ++total;
      const bool a_better = lengths[a] < lengths[b];
      if ((scores[a] > scores[b]) == a_better) ++correct;
    }
  }
  if (total == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace detail

/// Stochastic gradient descent over uniformly sampled ordered record pairs.
/// A fixed fraction of the records is held out of the pair sampling and used
/// to track ranking accuracy per epoch. Deterministic per seed.
inline std::pair<RankingModel, TrainReport> train(const Dataset& dataset,
                                                  const EncoderConfig& encoder_config,
                                                  const TrainConfig& train_config) {
  if (dataset.kind != DatasetKind::train)
    throw InvalidArgument("train: dataset must be a training set");
  if (dataset.train.size() < 2)
    throw InvalidArgument("train: need at least 2 training records");
  if (train_config.epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (train_config.pairs_per_epoch < 1)
    throw InvalidArgument("train: pairs_per_epoch must be >= 1");
  if (!(train_config.learning_rate > 0.0))
    throw InvalidArgument("train: learning_rate must be > 0");
  if (!(train_config.holdout_fraction >= 0.0 && train_config.holdout_fraction < 1.0))
    throw InvalidArgument("train: holdout_fraction must be in [0,1)");
  validate_config(encoder_config);

  const auto& records = dataset.train;
  const std::int64_t n = static_cast<std::int64_t>(records.size());

  Rng rng(train_config.seed);
  RankingModel model = init_model(encoder_config, rng);

  std::vector<std::int64_t> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  rng.shuffle(indices);
  std::int64_t holdout_count =
      static_cast<std::int64_t>(train_config.holdout_fraction * static_cast<double>(n));
  holdout_count = std::min(holdout_count, n - 2);  // keep at least one trainable pair
  const std::vector<std::int64_t> holdout(indices.begin(), indices.begin() + holdout_count);
  const std::vector<std::int64_t> pool(indices.begin() + holdout_count, indices.end());
  const int pool_size = static_cast<int>(pool.size());

  TrainReport report;
  for (std::int64_t idx : holdout) report.holdout_ids.push_back(records[static_cast<std::size_t>(idx)].id);

  std::vector<double> holdout_lengths;
  for (std::int64_t idx : holdout)
    holdout_lengths.push_back(records[static_cast<std::size_t>(idx)].length);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::int64_t p = 0; p < train_config.pairs_per_epoch; ++p) {
      const int a = rng.uniform_int(0, pool_size - 1);
      int b = pool_size > 1 ? rng.uniform_int(0, pool_size - 2) : 0;
      if (b >= a) ++b;
      const PairLoss pair = pair_loss_and_gradient(
          model, records[static_cast<std::size_t>(pool[static_cast<std::size_t>(a)])],
          records[static_cast<std::size_t>(pool[static_cast<std::size_t>(b)])]);
      loss_sum += pair.loss;

      ModelGrads grads = pair.grads;
      auto weights = param_views(model);
      auto gradients = param_views(grads);
      for (std::size_t t = 0; t < weights.size(); ++t)
        for (std::ptrdiff_t k = 0; k < weights[t].size; ++k)
          weights[t].data[k] -= train_config.learning_rate * gradients[t].data[k];
    }

    std::vector<double> holdout_scores;
    holdout_scores.reserve(holdout.size());
    for (std::int64_t idx : holdout) {
      const TrainingRecord& rec = records[static_cast<std::size_t>(idx)];
      holdout_scores.push_back(forward(model, rec.instance, rec.route).score);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(train_config.pairs_per_epoch);
    stats.holdout_accuracy = detail::holdout_pair_accuracy(holdout_scores, holdout_lengths);
    report.epochs.push_back(stats);
  }

  model.meta = {train_config.seed, train_config.epochs, train_config.learning_rate,
                train_config.pairs_per_epoch};
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Model persistence (JSON, schema version 1)

namespace detail {

inline ordered_json matrix_to_json(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  ordered_json layer;
  layer["rows"] = w.rows();
  layer["cols"] = w.cols();
  ordered_json data = ordered_json::array();
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) data.push_back(w(r, c));
  layer["data"] = std::move(data);
  ordered_json bias = ordered_json::array();
  for (Eigen::Index r = 0; r < b.size(); ++r) bias.push_back(b(r));
  layer["bias"] = std::move(bias);
  return layer;
}

inline void matrix_from_json(const ordered_json& layer, int want_rows, int want_cols,
                             Eigen::MatrixXd& w, Eigen::VectorXd& b, const std::string& where) {
  expect_keys(layer, {"rows", "cols", "data", "bias"}, where);
  if (!layer["rows"].is_number_integer() || !layer["cols"].is_number_integer())
    throw ValidationError(where + ": rows/cols must be integers");
  const auto rows = layer["rows"].get<Eigen::Index>();
  const auto cols = layer["cols"].get<Eigen::Index>();
  if (rows != want_rows || cols != want_cols)
    throw ValidationError(where + ": shape " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " does not match the config (" +
                          std::to_string(want_rows) + "x" + std::to_string(want_cols) + ")");
  const auto& data = layer["data"];
  const auto& bias = layer["bias"];
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ValidationError(where + ": data length does not match rows*cols");
  if (!bias.is_array() || static_cast<Eigen::Index>(bias.size()) != rows)
    throw ValidationError(where + ": bias length does not match rows");
  w.resize(rows, cols);
  b.resize(rows);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!data[static_cast<std::size_t>(k)].is_number())
        throw ValidationError(where + ": weight entries must be numbers");
      w(r, c) = data[static_cast<std::size_t>(k)].get<double>();
      ++k;
    }
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!bias[static_cast<std::size_t>(r)].is_number())
      throw ValidationError(where + ": bias entries must be numbers");
    b(r) = bias[static_cast<std::size_t>(r)].get<double>();
  }
  if (!w.allFinite() || !b.allFinite())
    throw ValidationError(where + ": weights must be finite");
}

}  // namespace detail

inline void save_model(const RankingModel& model, const std::string& path) {
  using detail::ordered_json;
  detail::check_model_shapes(model);

  ordered_json j;
  j["version"] = 1;
  j["config"] = {{"edge_dim", model.config.edge_dim},
                 {"hidden_dim", model.config.hidden_dim},
                 {"feature_dim", model.config.feature_dim}};

  ordered_json weights;
  weights["encoder1"] = detail::matrix_to_json(model.enc1_w, model.enc1_b);
  weights["encoder2"] = detail::matrix_to_json(model.enc2_w, model.enc2_b);
  weights["head1"] = detail::matrix_to_json(model.head1_w, model.head1_b);
  weights["head2"] = detail::matrix_to_json(model.head2_w, model.head2_b);
  j["weights"] = std::move(weights);

  if (model.gaussian) {
    const GaussianStats& g = *model.gaussian;
    ordered_json mu = ordered_json::array();
    for (Eigen::Index i = 0; i < g.mu.size(); ++i) mu.push_back(g.mu(i));
    ordered_json sigma_inv = ordered_json::array();
    for (Eigen::Index r = 0; r < g.sigma_inv.rows(); ++r)
      for (Eigen::Index c = 0; c < g.sigma_inv.cols(); ++c) sigma_inv.push_back(g.sigma_inv(r, c));
    j["gaussian"] = {{"mu", std::move(mu)},
                     {"sigma_inv", std::move(sigma_inv)},
                     {"ridge", g.ridge}};
  } else {
    j["gaussian"] = nullptr;
  }

  if (model.cost_params) {
    j["cost_params"] = {{"alpha", model.cost_params->alpha},
                        {"lambda", model.cost_params->lambda},
                        {"alpha_quantile", model.cost_params->alpha_quantile}};
  } else {
    j["cost_params"] = nullptr;
  }

  j["meta"] = {{"seed", model.meta.seed},
               {"epochs", model.meta.epochs},
               {"learning_rate", model.meta.learning_rate},
               {"pairs_per_epoch", model.meta.pairs_per_epoch}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline RankingModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  using detail::ordered_json;
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  const std::string where = path;
  detail::expect_keys(j, {"version", "config", "weights", "gaussian", "cost_params", "meta"},
                      where);
  if (!j["version"].is_number_integer() || j["version"].get<int>() != 1)
    throw ValidationError(where + ": unsupported model version");

  RankingModel model;
  const auto& cfg = j["config"];
  detail::expect_keys(cfg, {"edge_dim", "hidden_dim", "feature_dim"}, where + ": config");
  model.config.edge_dim = cfg["edge_dim"].get<int>();
  model.config.hidden_dim = cfg["hidden_dim"].get<int>();
  model.config.feature_dim = cfg["feature_dim"].get<int>();
  validate_config(model.config);

  const auto& weights = j["weights"];
  detail::expect_keys(weights, {"encoder1", "encoder2", "head1", "head2"}, where + ": weights");
  detail::matrix_from_json(weights["encoder1"], model.config.hidden_dim, model.config.edge_dim,
                           model.enc1_w, model.enc1_b, where + ": encoder1");
  detail::matrix_from_json(weights["encoder2"], model.config.hidden_dim, model.config.hidden_dim,
                           model.enc2_w, model.enc2_b, where + ": encoder2");
  detail::matrix_from_json(weights["head1"], model.config.feature_dim, model.config.hidden_dim,
                           model.head1_w, model.head1_b, where + ": head1");
  detail::matrix_from_json(weights["head2"], 1, model.config.feature_dim, model.head2_w,
                           model.head2_b, where + ": head2");

  if (!j["gaussian"].is_null()) {
    const auto& g = j["gaussian"];
    detail::expect_keys(g, {"mu", "sigma_inv", "ridge"}, where + ": gaussian");
    const int d = model.config.feature_dim;
    if (!g["mu"].is_array() || static_cast<int>(g["mu"].size()) != d)
      throw ValidationError(where + ": gaussian mu length must equal feature_dim");
    if (!g["sigma_inv"].is_array() || static_cast<int>(g["sigma_inv"].size()) != d * d)
      throw ValidationError(where + ": gaussian sigma_inv must be feature_dim^2 long");
    GaussianStats stats;
    stats.mu.resize(d);
    for (int i = 0; i < d; ++i) stats.mu(i) = g["mu"][static_cast<std::size_t>(i)].get<double>();
    stats.sigma_inv.resize(d, d);
    int k = 0;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        stats.sigma_inv(r, c) = g["sigma_inv"][static_cast<std::size_t>(k++)].get<double>();
    stats.ridge = g["ridge"].get<double>();
    stats.n = 0;  // sample count is not persisted
    if (!stats.mu.allFinite() || !stats.sigma_inv.allFinite())
      throw ValidationError(where + ": gaussian stats must be finite");
    model.gaussian = std::move(stats);
  }

  if (!j["cost_params"].is_null()) {
    const auto& cp = j["cost_params"];
    detail::expect_keys(cp, {"alpha", "lambda", "alpha_quantile"}, where + ": cost_params");
    CostParams params;
    params.alpha = cp["alpha"].get<double>();
    params.lambda = cp["lambda"].get<double>();
    params.alpha_quantile = cp["alpha_quantile"].get<double>();
    if (!(params.alpha >= 0.0) || !(params.lambda >= 0.0) ||
        !(params.alpha_quantile >= 0.0 && params.alpha_quantile <= 1.0))
      throw ValidationError(where + ": cost_params out of range");
    model.cost_params = params;
  }

  const auto& meta = j["meta"];
  detail::expect_keys(meta, {"seed", "epochs", "learning_rate", "pairs_per_epoch"},
                      where + ": meta");
  model.meta.seed = meta["seed"].get<std::uint64_t>();
  model.meta.epochs = meta["epochs"].get<int>();
  model.meta.learning_rate = meta["learning_rate"].get<double>();
  model.meta.pairs_per_epoch = meta["pairs_per_epoch"].get<std::int64_t>();

  return model;
}

}  // namespace offopt
