#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bamld/matrix.hpp"
#include "bamld/mlp.hpp"
#include "bamld/rng.hpp"

namespace bamld {

/// Covariates of one task and, once the oracle has been queried, its labels.
struct TaskDataset {
  Matrix x;                              // N × d
  std::optional<std::vector<double>> y;  // length N when present
  int task_id = 0;

  std::size_t size() const noexcept { return x.rows(); }
  bool labeled() const noexcept { return y.has_value(); }
  /// Throws ShapeError on an empty task or a label/covariate length mismatch.
  void validate() const;
};

/// Deep-kernel GP: mean network Φ^μ (output 1) and feature network Φ^k.
/// A hyperparameter vector θ stores the mean-network parameters followed by
/// the feature-network parameters.
struct GpConfig {
  double noise_variance = 0.12;
  MlpSpec mean_spec{1, {32, 32}, 1};
  MlpSpec feature_spec{1, {32, 32}, 2};

  void validate() const;
  std::size_t mean_param_count() const { return mean_spec.param_count(); }
  std::size_t param_count() const {
    return mean_spec.param_count() + feature_spec.param_count();
  }
  std::span<const double> mean_params(std::span<const double> theta) const {
    return theta.first(mean_param_count());
  }
  std::span<const double> feature_params(std::span<const double> theta) const {
    return theta.subspan(mean_param_count());
  }
};

/// Multivariate normal N(mean, cov) with its Cholesky factor.
struct GpPredictive {
  std::vector<double> mean;
  Matrix cov;
  Matrix chol;

  std::size_t dim() const noexcept { return mean.size(); }
  /// Factorizes cov with the jitter policy.
  static GpPredictive from_moments(std::vector<double> mean, Matrix cov);
};

/// k(a, b) = ½·exp(−‖a − b‖²) on precomputed embeddings (one row per point).
Matrix kernel_from_features(const Matrix& f1, const Matrix& f2);

Matrix kernel_matrix(std::span<const double> theta, const Matrix& x1, const Matrix& x2,
                     const GpConfig& cfg);

/// Mean Φ^μ(x) per row and covariance K_θ(x) + σ²I.
GpPredictive marginal_gaussian(std::span<const double> theta, const Matrix& x,
                               const GpConfig& cfg);

double log_marginal_likelihood(std::span<const double> theta, const TaskDataset& task,
                               const GpConfig& cfg);

struct LikelihoodAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Exact gradient with respect to every weight of both networks.
LikelihoodAndGrad log_marginal_likelihood_with_grad(std::span<const double> theta,
                                                    const TaskDataset& task,
                                                    const GpConfig& cfg);

inline std::vector<double> log_marginal_likelihood_grad(std::span<const double> theta,
                                                        const TaskDataset& task,
                                                        const GpConfig& cfg) {
  return log_marginal_likelihood_with_grad(theta, task, cfg).grad;
}

/// ½·log det(2πe·cov).
double gaussian_entropy(const GpPredictive& pred);

double gaussian_log_density(const GpPredictive& pred, std::span<const double> y);

/// mean + L·z with z i.i.d. standard normal drawn from rng.
std::vector<double> sample_gaussian(const GpPredictive& pred, Rng& rng);
/// mean + L·z for a caller-supplied z.
std::vector<double> sample_gaussian(const GpPredictive& pred, std::span<const double> z);

/// Pointwise predictive moments at query inputs.
struct PointPredictions {
  std::vector<double> mean;
  std::vector<double> variance;  // latent variance, without observation noise
};

/// Standard Gaussian conditioning of the joint marginal on (x_ctx, y_ctx):
/// mean m* + K*ᵀK̃⁻¹(y − m), variance k** − K*ᵀK̃⁻¹K*. With no context
/// points the prior moments are returned.
PointPredictions condition_gp(std::span<const double> theta, const Matrix& x_ctx,
                              std::span<const double> y_ctx, const Matrix& x_query,
                              const GpConfig& cfg);

/// Conditioning from precomputed blocks: context prior mean and noisy
/// covariance, query prior mean, cross-covariance (ctx × query) and the
/// query prior variances.
PointPredictions condition_gaussian(std::span<const double> ctx_mean, const Matrix& ctx_cov,
                                    std::span<const double> y_ctx,
                                    std::span<const double> query_mean, const Matrix& cross_cov,
                                    std::span<const double> query_var);

}  // namespace bamld
