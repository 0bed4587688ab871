#include "bamld/bayes_opt.hpp"

#include <algorithm>
#include <cmath>

#include "bamld/errors.hpp"

namespace bamld {

void BoRunConfig::validate() const {
  if (n_iterations < 1) throw ConfigError("bo_iterations", "must be >= 1");
  if (candidate_grid < 2) throw ConfigError("bo_candidate_grid", "must be >= 2");
  if (!(ucb_beta >= 0.0)) throw ConfigError("ucb_beta", "must be >= 0");
  if (!(observation_noise_var > 0.0)) throw ConfigError("bo_noise_var", "must be > 0");
  if (!(x_lo < x_hi)) throw ConfigError("bo_x_range", "lo must be < hi");
  if (true_max_grid < 2) throw ConfigError("bo_true_max_grid", "must be >= 2");
}

EnsembleSurrogate::EnsembleSurrogate(ParticleEnsemble ensemble,
                                     std::vector<TaskDataset> meta_train,
                                     PosteriorScoreConfig score, SvgdConfig svgd,
                                     std::size_t update_steps, Rng rng)
    : ensemble_(std::move(ensemble)),
      meta_train_(std::move(meta_train)),
      score_(score),
      svgd_(svgd),
      update_steps_(update_steps),
      rng_(rng) {
  ensemble_.validate();
}

PointPredictions EnsembleSurrogate::predict(const Matrix& x_obs, std::span<const double> y_obs,
                                            const Matrix& candidates) const {
  std::vector<PointPredictions> comps;
  comps.reserve(ensemble_.size());
  for (const auto& theta : ensemble_.particles)
    comps.push_back(condition_gp(theta, x_obs, y_obs, candidates, ensemble_.gp));
  return mixture_moments(comps);
}

void EnsembleSurrogate::update(const Matrix& x_obs, std::span<const double> y_obs) {
  if (update_steps_ == 0 || x_obs.rows() == 0) return;
  std::vector<TaskDataset> data = meta_train_;
  data.push_back(TaskDataset{x_obs, std::vector<double>(y_obs.begin(), y_obs.end()), -1});
  SvgdConfig svgd = svgd_;
  svgd.n_steps = update_steps_;
  ensemble_ = fit_posterior(ensemble_, data, score_, svgd, rng_);
}

SquaredExpSurrogate::SquaredExpSurrogate(double signal_variance, double lengthscale,
                                         double noise_variance)
    : s2_(signal_variance), ell_(lengthscale), noise_(noise_variance) {}

PointPredictions SquaredExpSurrogate::predict(const Matrix& x_obs, std::span<const double> y_obs,
                                              const Matrix& candidates) const {
  auto k = [this](std::span<const double> a, std::span<const double> b) {
    return s2_ * std::exp(-squared_distance(a, b) / (2.0 * ell_ * ell_));
  };
  const std::size_t n = x_obs.rows(), m = candidates.rows();
  Matrix k_obs(n, n), k_cross(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k_obs(i, j) = k(x_obs.row(i), x_obs.row(j));
    k_obs(i, i) += noise_;
    for (std::size_t j = 0; j < m; ++j) k_cross(i, j) = k(x_obs.row(i), candidates.row(j));
  }
  const std::vector<double> zeros_obs(n, 0.0), zeros_q(m, 0.0), prior_var(m, s2_);
  return condition_gaussian(zeros_obs, k_obs, y_obs, zeros_q, k_cross, prior_var);
}

PointPredictions mixture_moments(std::span<const PointPredictions> components) {
  if (components.empty()) throw ShapeError("mixture_moments: no components");
  const std::size_t m = components[0].mean.size();
  const double inv = 1.0 / static_cast<double>(components.size());
  PointPredictions out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  for (const auto& c : components)
    for (std::size_t i = 0; i < m; ++i) {
      out.mean[i] += inv * c.mean[i];
      out.variance[i] += inv * (c.variance[i] + c.mean[i] * c.mean[i]);
    }
  for (std::size_t i = 0; i < m; ++i)
    out.variance[i] = std::max(out.variance[i] - out.mean[i] * out.mean[i], 0.0);
  return out;
}

std::size_t ucb_select_index(const PointPredictions& pred, double beta) {
  if (pred.mean.empty()) throw SelectionError("ucb_select: no candidates");
  std::size_t best = 0;
  double best_val = pred.mean[0] + beta * std::sqrt(pred.variance[0]);
  for (std::size_t i = 1; i < pred.mean.size(); ++i) {
    const double v = pred.mean[i] + beta * std::sqrt(pred.variance[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

double ucb_select(const Surrogate& surrogate, const Matrix& x_obs, std::span<const double> y_obs,
                  std::span<const double> candidates, double beta) {
  if (candidates.empty()) throw SelectionError("ucb_select: no candidates");
  const Matrix cand = Matrix::column(candidates);
  return candidates[ucb_select_index(surrogate.predict(x_obs, y_obs, cand), beta)];
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  v[n - 1] = hi;
  return v;
}

double bo_true_max(const BoTaskParams& task, const BoRunConfig& cfg) {
  const auto dense = linspace(cfg.x_lo, cfg.x_hi, cfg.true_max_grid);
  double best_x = dense[0];
  double best = eval_g_bo(task, best_x);
  for (double x : dense) {
    const double g = eval_g_bo(task, x);
    if (g > best) {
      best = g;
      best_x = x;
    }
  }
  for (double x : linspace(cfg.x_lo, cfg.x_hi, cfg.candidate_grid)) best = std::max(best, eval_g_bo(task, x));

  // golden-section refinement inside the bracketing grid cell
  const double h = (cfg.x_hi - cfg.x_lo) / static_cast<double>(cfg.true_max_grid - 1);
  double a = std::max(cfg.x_lo, best_x - h), b = std::min(cfg.x_hi, best_x + h);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (eval_g_bo(task, c) > eval_g_bo(task, d)) b = d; else a = c;
  }
  return std::max(best, eval_g_bo(task, 0.5 * (a + b)));
}

BoTrace run_bo(const BoTaskParams& task, Surrogate& surrogate, const BoRunConfig& cfg, Rng& rng) {
  cfg.validate();
  BoTrace trace;
  trace.true_max = bo_true_max(task, cfg);
  std::vector<double> candidates = linspace(cfg.x_lo, cfg.x_hi, cfg.candidate_grid);
  std::vector<double> xs, ys;
  const double noise_sd = std::sqrt(cfg.observation_noise_var);
  double best = -std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < cfg.n_iterations; ++it) {
    if (candidates.empty()) break;
    const Matrix x_obs = Matrix::column(xs);
    const double x = ucb_select(surrogate, x_obs, ys, candidates, cfg.ucb_beta);
    if (!cfg.allow_requery) candidates.erase(std::find(candidates.begin(), candidates.end(), x));
    const double g = eval_g_bo(task, x);
    const double y = g + noise_sd * standard_normal(rng);
    xs.push_back(x);
    ys.push_back(y);
    best = std::max(best, g);
    trace.queries.emplace_back(x, y);
    trace.best_so_far.push_back(best);
    trace.regret.push_back(trace.true_max - best);
    surrogate.update(Matrix::column(xs), ys);
  }
  return trace;
}

BoTrace vanilla_bo_baseline(const BoTaskParams& task, const BoRunConfig& cfg, Rng& rng) {
  SquaredExpSurrogate surrogate(1.0, 1.0, cfg.observation_noise_var);
  return run_bo(task, surrogate, cfg, rng);
}

}  // namespace bamld
