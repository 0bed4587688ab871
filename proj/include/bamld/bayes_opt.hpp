#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "bamld/environments.hpp"
#include "bamld/gp.hpp"
#include "bamld/hyper_posterior.hpp"

namespace bamld {

struct BoRunConfig {
  std::size_t n_iterations = 20;
  std::size_t candidate_grid = 200;  // evenly spaced on [x_lo, x_hi]
  double ucb_beta = 2.0;
  std::size_t surrogate_update_steps = 100;
  double observation_noise_var = 0.01;
  double x_lo = -10.0;
  double x_hi = 10.0;
  std::size_t true_max_grid = 10001;
  /// When false, already-queried candidates are removed from the grid.
  bool allow_requery = true;

  void validate() const;
};

struct BoTrace {
  std::vector<std::pair<double, double>> queries;  // (x, observed y)
  std::vector<double> best_so_far;                 // running max of g at the queries
  std::vector<double> regret;                      // true_max − best_so_far
  double true_max = 0.0;
};

/// Posterior belief over g given the queries so far.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  /// Predictive mean and latent variance at the candidates.
  virtual PointPredictions predict(const Matrix& x_obs, std::span<const double> y_obs,
                                   const Matrix& candidates) const = 0;
  /// Hook run after every new observation.
  virtual void update(const Matrix& x_obs, std::span<const double> y_obs) {
    (void)x_obs;
    (void)y_obs;
  }
};

/// Particle-mixture surrogate, moment matched: mean of per-particle means and
/// variance = mean of per-particle variances + variance of per-particle means.
/// update() runs SVGD steps on the meta-training tasks plus the query set as
/// one more task.
class EnsembleSurrogate : public Surrogate {
 public:
  EnsembleSurrogate(ParticleEnsemble ensemble, std::vector<TaskDataset> meta_train,
                    PosteriorScoreConfig score, SvgdConfig svgd, std::size_t update_steps,
                    Rng rng);

  PointPredictions predict(const Matrix& x_obs, std::span<const double> y_obs,
                           const Matrix& candidates) const override;
  void update(const Matrix& x_obs, std::span<const double> y_obs) override;

  const ParticleEnsemble& ensemble() const noexcept { return ensemble_; }

 private:
  ParticleEnsemble ensemble_;
  std::vector<TaskDataset> meta_train_;
  PosteriorScoreConfig score_;
  SvgdConfig svgd_;
  std::size_t update_steps_;
  Rng rng_;
};

/// Zero mean, k(x,x') = s²·exp(−(x−x')²/(2ℓ²)), fixed hyperparameters.
class SquaredExpSurrogate : public Surrogate {
 public:
  SquaredExpSurrogate(double signal_variance, double lengthscale, double noise_variance);
  PointPredictions predict(const Matrix& x_obs, std::span<const double> y_obs,
                           const Matrix& candidates) const override;

 private:
  double s2_, ell_, noise_;
};

/// Moments of an equal-weight mixture of pointwise predictions.
PointPredictions mixture_moments(std::span<const PointPredictions> components);

/// Index of max mean + β·sqrt(variance), lowest index on ties.
std::size_t ucb_select_index(const PointPredictions& pred, double beta);
double ucb_select(const Surrogate& surrogate, const Matrix& x_obs, std::span<const double> y_obs,
                  std::span<const double> candidates, double beta);

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Max of g over the dense grid and the candidate grid, refined locally.
double bo_true_max(const BoTaskParams& task, const BoRunConfig& cfg);

BoTrace run_bo(const BoTaskParams& task, Surrogate& surrogate, const BoRunConfig& cfg, Rng& rng);

/// Zero-mean squared-exponential GP with s² = 1, ℓ = 1 and no hyperparameter updates.
BoTrace vanilla_bo_baseline(const BoTaskParams& task, const BoRunConfig& cfg, Rng& rng);

}  // namespace bamld
