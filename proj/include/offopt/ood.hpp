#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "offopt/error.hpp"

namespace offopt {

/// Last-hidden-layer representation of a (condition, solution) pair.
using FeatureVector = Eigen::VectorXd;

/// Gaussian fit of the training feature distribution. sigma_inv is the
/// ridge-regularized inverse covariance; the squared Mahalanobis distance is
/// measured against it.
struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma_inv;
  double ridge = 0.0;
  std::int64_t n = 0;

  int dim() const { return static_cast<int>(mu.size()); }
};

struct CostParams {
  double alpha = 0.0;            // squared-distance threshold of the trusted region
  double lambda = 1e6;           // hinge penalty weight
  double alpha_quantile = 0.95;  // training-distance quantile alpha was calibrated at
};

/// Sample mean and (1/N)-covariance of the features, with a trace-scaled
/// ridge added to the diagonal before inversion. The ridge keeps the inverse
/// finite even when the sample covariance is singular (e.g. all features
/// identical, where trace is zero and the relative ridge degenerates too —
/// the scale itself is used as an absolute floor in that case).
inline GaussianStats fit_gaussian(const std::vector<FeatureVector>& features,
                                  double ridge_scale = 1e-6) {
  if (features.size() < 2)
    throw InvalidArgument("fit_gaussian: need at least 2 feature vectors");
  const Eigen::Index d = features.front().size();
  for (const auto& f : features) {
    if (f.size() != d) throw InvalidArgument("fit_gaussian: inconsistent feature lengths");
    if (!f.allFinite()) throw InvalidArgument("fit_gaussian: non-finite feature");
  }
  if (!(ridge_scale > 0.0)) throw InvalidArgument("fit_gaussian: ridge_scale must be > 0");

  const double n = static_cast<double>(features.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) mu += f;
  mu /= n;

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : features) {
    const Eigen::VectorXd centered = f - mu;
    sigma.noalias() += centered * centered.transpose();
  }
  sigma /= n;

  // Trace-scaled ridge, with an absolute floor on the scale so a degenerate
  // spread (covariance built from mean-rounding noise alone) cannot
  // self-normalize into spurious O(1) distances.
  double spread_scale = sigma.trace() / static_cast<double>(d);
  if (!(spread_scale > 1e-12)) spread_scale = 1e-12;
  const double ridge = ridge_scale * spread_scale;

  Eigen::MatrixXd regularized = sigma;
  regularized.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
  if (ldlt.info() != Eigen::Success)
    throw NumericalFailure("fit_gaussian: covariance inversion failed");
  Eigen::MatrixXd sigma_inv = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  if (!sigma_inv.allFinite())
    throw NumericalFailure("fit_gaussian: covariance inverse is not finite");
  sigma_inv = 0.5 * (sigma_inv + sigma_inv.transpose()).eval();  // enforce symmetry

  GaussianStats stats;
  stats.mu = std::move(mu);
  stats.sigma_inv = std::move(sigma_inv);
  stats.ridge = ridge;
  stats.n = static_cast<std::int64_t>(features.size());
  return stats;
}

/// Squared Mahalanobis distance (f - mu)^T sigma_inv (f - mu). Kept in
/// squared form; the alpha threshold is calibrated in the same units.
inline double mahalanobis(const GaussianStats& stats, const FeatureVector& f) {
  if (f.size() != stats.mu.size())
    throw InvalidArgument("mahalanobis: feature dimension mismatch");
  const Eigen::VectorXd centered = f - stats.mu;
  const double md = centered.dot(stats.sigma_inv * centered);
  return std::max(md, 0.0);  // clamp round-off on a PD quadratic form
}

/// Nearest-rank (ceiling convention) quantile of the training Mahalanobis
/// distances.
inline double calibrate_alpha(const GaussianStats& stats,
                              const std::vector<FeatureVector>& training_features,
                              double quantile) {
  if (training_features.empty())
    throw InvalidArgument("calibrate_alpha: no training features");
  if (!(quantile >= 0.0 && quantile <= 1.0))
    throw InvalidArgument("calibrate_alpha: quantile must be in [0,1]");
  std::vector<double> distances;
  distances.reserve(training_features.size());
  for (const auto& f : training_features) distances.push_back(mahalanobis(stats, f));
  std::sort(distances.begin(), distances.end());
  const auto count = static_cast<std::int64_t>(distances.size());
  std::int64_t rank = static_cast<std::int64_t>(
      std::ceil(quantile * static_cast<double>(count)));
  rank = std::clamp<std::int64_t>(rank, 1, count);
  return distances[static_cast<std::size_t>(rank - 1)];
}

/// The search objective: negated surrogate score plus a hinge penalty that
/// activates once the feature leaves the trusted region.
inline double regularized_cost(double score, double md, const CostParams& params) {
  return -score + params.lambda * std::max(0.0, md - params.alpha);
}

}  // namespace offopt
