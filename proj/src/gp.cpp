#include "bamld/gp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)

void check_theta(std::span<const double> theta, const GpConfig& cfg) {
  if (theta.size() != cfg.param_count()) {
    throw ShapeError("gp: theta has " + std::to_string(theta.size()) + " entries, config needs " +
                     std::to_string(cfg.param_count()));
  }
}

std::vector<double> mean_vector(std::span<const double> theta, const Matrix& x,
                                const GpConfig& cfg) {
  Matrix m = mlp_forward(cfg.mean_spec, cfg.mean_params(theta), x);
  return std::vector<double>(m.data().begin(), m.data().end());
}

Matrix features(std::span<const double> theta, const Matrix& x, const GpConfig& cfg) {
  return mlp_forward(cfg.feature_spec, cfg.feature_params(theta), x);
}

}  // namespace

void TaskDataset::validate() const {
  if (x.rows() == 0) throw ShapeError("TaskDataset: task " + std::to_string(task_id) + " is empty");
  if (y && y->size() != x.rows()) {
    throw ShapeError("TaskDataset: task " + std::to_string(task_id) + " has " +
                     std::to_string(y->size()) + " labels for " + std::to_string(x.rows()) +
                     " covariates");
  }
}

void GpConfig::validate() const {
  if (!(noise_variance > 0.0)) throw ShapeError("GpConfig: noise_variance must be > 0");
  mean_spec.validate();
  feature_spec.validate();
  if (mean_spec.output_dim != 1) throw ShapeError("GpConfig: mean network must have output 1");
  if (mean_spec.input_dim != feature_spec.input_dim)
    throw ShapeError("GpConfig: mean and feature networks disagree on input dim");
}

GpPredictive GpPredictive::from_moments(std::vector<double> mean, Matrix cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ShapeError("GpPredictive: covariance does not match mean length");
  GpPredictive p;
  p.chol = cholesky(cov);
  p.mean = std::move(mean);
  p.cov = std::move(cov);
  return p;
}

Matrix kernel_from_features(const Matrix& f1, const Matrix& f2) {
  if (f1.cols() != f2.cols()) throw ShapeError("kernel: embedding dims differ");
  Matrix k(f1.rows(), f2.rows());
  for (std::size_t i = 0; i < f1.rows(); ++i)
    for (std::size_t j = 0; j < f2.rows(); ++j)
      k(i, j) = 0.5 * std::exp(-squared_distance(f1.row(i), f2.row(j)));
  return k;
}

Matrix kernel_matrix(std::span<const double> theta, const Matrix& x1, const Matrix& x2,
                     const GpConfig& cfg) {
  check_theta(theta, cfg);
  if (x1.cols() != x2.cols()) throw ShapeError("kernel_matrix: inputs differ in dimension");
  return kernel_from_features(features(theta, x1, cfg), features(theta, x2, cfg));
}

GpPredictive marginal_gaussian(std::span<const double> theta, const Matrix& x,
                               const GpConfig& cfg) {
  check_theta(theta, cfg);
  if (x.rows() == 0) throw ShapeError("marginal_gaussian: empty input");
  const Matrix f = features(theta, x, cfg);
  Matrix cov = kernel_from_features(f, f);
  for (std::size_t i = 0; i < cov.rows(); ++i) cov(i, i) += cfg.noise_variance;
  return GpPredictive::from_moments(mean_vector(theta, x, cfg), std::move(cov));
}

double log_marginal_likelihood(std::span<const double> theta, const TaskDataset& task,
                               const GpConfig& cfg) {
  task.validate();
  if (!task.labeled()) throw StateError("log_marginal_likelihood: task is unlabeled");
  return gaussian_log_density(marginal_gaussian(theta, task.x, cfg), *task.y);
}

LikelihoodAndGrad log_marginal_likelihood_with_grad(std::span<const double> theta,
                                                    const TaskDataset& task,
                                                    const GpConfig& cfg) {
  check_theta(theta, cfg);
  task.validate();
  if (!task.labeled()) throw StateError("log_marginal_likelihood_grad: task is unlabeled");
  const std::size_t n = task.size();
  const Matrix& x = task.x;

  const std::vector<double> mu = mean_vector(theta, x, cfg);
  const Matrix f = features(theta, x, cfg);
  const Matrix k = kernel_from_features(f, f);
  Matrix k_noisy = k;
  for (std::size_t i = 0; i < n; ++i) k_noisy(i, i) += cfg.noise_variance;
  const Matrix chol = cholesky(k_noisy);

  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = (*task.y)[i] - mu[i];
  const std::vector<double> alpha = solve_cholesky(chol, std::span<const double>(resid));

  LikelihoodAndGrad out;
  out.value = -0.5 * dot(resid, alpha) - half_log_det(chol) - 0.5 * static_cast<double>(n) * kLog2Pi;

  // dℓ/dμ = α
  const std::vector<double> g_mean =
      mlp_backward(cfg.mean_spec, cfg.mean_params(theta), x, Matrix::column(alpha));

  // dℓ/dK = ½(ααᵀ − K̃⁻¹); chained through k_ij = ½exp(−‖f_i − f_j‖²)
  const Matrix k_inv = cholesky_inverse(chol);
  const std::size_t d = f.cols();
  Matrix g_feat(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double g_ij = 0.5 * (alpha[i] * alpha[j] - k_inv(i, j));
      const double w = -4.0 * g_ij * k(i, j);
      for (std::size_t c = 0; c < d; ++c) g_feat(i, c) += w * (f(i, c) - f(j, c));
    }
  }
  const std::vector<double> g_kernel =
      mlp_backward(cfg.feature_spec, cfg.feature_params(theta), x, g_feat);

  out.grad.reserve(theta.size());
  out.grad.insert(out.grad.end(), g_mean.begin(), g_mean.end());
  out.grad.insert(out.grad.end(), g_kernel.begin(), g_kernel.end());
  return out;
}

double gaussian_entropy(const GpPredictive& pred) {
  const double m = static_cast<double>(pred.dim());
  return half_log_det(pred.chol) + 0.5 * m * (kLog2Pi + 1.0);
}

double gaussian_log_density(const GpPredictive& pred, std::span<const double> y) {
  if (y.size() != pred.dim()) {
    throw ShapeError("gaussian_log_density: y has " + std::to_string(y.size()) +
                     " entries, distribution has dimension " + std::to_string(pred.dim()));
  }
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - pred.mean[i];
  const std::vector<double> z = solve_lower(pred.chol, r);
  return -0.5 * dot(z, z) - half_log_det(pred.chol) -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

std::vector<double> sample_gaussian(const GpPredictive& pred, std::span<const double> z) {
  if (z.size() != pred.dim()) throw ShapeError("sample_gaussian: z length mismatch");
  std::vector<double> out = pred.mean;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* li = &pred.chol(i, 0);
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += li[k] * z[k];
    out[i] += s;
  }
  return out;
}

std::vector<double> sample_gaussian(const GpPredictive& pred, Rng& rng) {
  std::vector<double> z(pred.dim());
  for (double& v : z) v = standard_normal(rng);
  return sample_gaussian(pred, std::span<const double>(z));
}

PointPredictions condition_gaussian(std::span<const double> ctx_mean, const Matrix& ctx_cov,
                                    std::span<const double> y_ctx,
                                    std::span<const double> query_mean, const Matrix& cross_cov,
                                    std::span<const double> query_var) {
  const std::size_t n = ctx_mean.size();
  const std::size_t m = query_mean.size();
  if (y_ctx.size() != n || ctx_cov.rows() != n || ctx_cov.cols() != n ||
      cross_cov.rows() != n || cross_cov.cols() != m || query_var.size() != m) {
    throw ShapeError("condition_gaussian: inconsistent block shapes");
  }
  PointPredictions out{std::vector<double>(query_mean.begin(), query_mean.end()),
                       std::vector<double>(query_var.begin(), query_var.end())};
  if (n == 0) return out;
  const Matrix chol = cholesky(ctx_cov);
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = y_ctx[i] - ctx_mean[i];
  const std::vector<double> alpha = solve_cholesky(chol, std::span<const double>(resid));
  std::vector<double> col(n);
  for (std::size_t q = 0; q < m; ++q) {
    for (std::size_t i = 0; i < n; ++i) col[i] = cross_cov(i, q);
    out.mean[q] += dot(col, alpha);
    const std::vector<double> v = solve_lower(chol, col);
    out.variance[q] = std::max(out.variance[q] - dot(v, v), 0.0);
  }
  return out;
}

PointPredictions condition_gp(std::span<const double> theta, const Matrix& x_ctx,
                              std::span<const double> y_ctx, const Matrix& x_query,
                              const GpConfig& cfg) {
  check_theta(theta, cfg);
  const std::vector<double> m_query = mean_vector(theta, x_query, cfg);
  const std::vector<double> k_diag(x_query.rows(), 0.5);
  if (x_ctx.rows() == 0) {
    return condition_gaussian({}, Matrix(), {}, m_query, Matrix(0, x_query.rows()), k_diag);
  }
  const Matrix f_ctx = features(theta, x_ctx, cfg);
  const Matrix f_query = features(theta, x_query, cfg);
  Matrix k_ctx = kernel_from_features(f_ctx, f_ctx);
  for (std::size_t i = 0; i < k_ctx.rows(); ++i) k_ctx(i, i) += cfg.noise_variance;
  return condition_gaussian(mean_vector(theta, x_ctx, cfg), k_ctx, y_ctx, m_query,
                            kernel_from_features(f_ctx, f_query), k_diag);
}

}  // namespace bamld
