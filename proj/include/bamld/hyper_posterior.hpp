#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "bamld/gp.hpp"
#include "bamld/rng.hpp"
#include "json.hpp"

namespace bamld {

using Theta = std::vector<double>;

/// P particles approximating p(θ | selected tasks). All share gp's network specs.
struct ParticleEnsemble {
  std::vector<Theta> particles;
  GpConfig gp;

  std::size_t size() const noexcept { return particles.size(); }
  /// Throws ShapeError on an empty ensemble or a particle of the wrong length,
  /// NumericalError on non-finite entries.
  void validate() const;

  friend bool operator==(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    return a.particles == b.particles && a.gp.noise_variance == b.gp.noise_variance &&
           a.gp.mean_spec == b.gp.mean_spec && a.gp.feature_spec == b.gp.feature_spec;
  }
};

struct PosteriorScoreConfig {
  double prior_variance = 1.0;
  double gamma = 1.0;  // generalized-posterior temperature
  bool per_task_normalize = true;

  void validate() const;
};

enum class SvgdKernel { rbf_median_heuristic };

/// How the SVGD velocity is turned into a parameter update. `plain` moves
/// each particle by step_size·φ; `adam` feeds φ to per-particle Adam moments
/// that persist across the steps of one fit_posterior call.
enum class SvgdOptimizer { plain, adam };

struct SvgdConfig {
  double step_size = 1e-3;
  std::size_t n_steps = 1500;
  SvgdKernel kernel = SvgdKernel::rbf_median_heuristic;
  std::size_t task_minibatch = 2;
  double bandwidth_floor = 1e-6;
  SvgdOptimizer optimizer = SvgdOptimizer::plain;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Isotropic Gaussian log-density N(0, prior_variance·I).
double log_prior(std::span<const double> theta, double prior_variance);

/// log p(θ) + γ·(1/|T|)·Σ_τ ℓ_τ(θ)/N_τ, with ℓ_τ the log marginal likelihood.
/// Empty data gives the log prior alone.
double log_posterior_score(std::span<const double> theta, std::span<const TaskDataset> data,
                           const PosteriorScoreConfig& score, const GpConfig& gp);

/// Full-batch gradient of log_posterior_score.
Theta log_posterior_grad(std::span<const double> theta, std::span<const TaskDataset> data,
                         const PosteriorScoreConfig& score, const GpConfig& gp);

/// Minibatch gradient over data[batch[k]]; the data term is rescaled by
/// |data|/|batch| so its expectation over uniform minibatches is the full gradient.
Theta log_posterior_grad(std::span<const double> theta, std::span<const TaskDataset> data,
                         std::span<const std::size_t> batch, const PosteriorScoreConfig& score,
                         const GpConfig& gp);

/// Score gradient supplied by the caller; used for injected target densities.
using ScoreGradient = std::function<Theta(std::span<const double> theta)>;

/// Median-heuristic RBF bandwidth h with κ(a,b) = exp(−‖a−b‖²/h).
double svgd_bandwidth(std::span<const Theta> particles, double floor);

/// SVGD velocity for every particle given per-particle score gradients:
/// φ(θ_i) = (1/P)Σ_j [κ(θ_j,θ_i)·g_j + ∇_{θ_j}κ(θ_j,θ_i)].
std::vector<Theta> svgd_direction(std::span<const Theta> particles,
                                  std::span<const Theta> grads, double bandwidth_floor);

/// One SVGD update with a task minibatch drawn from rng.
ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, std::span<const TaskDataset> data,
                           const PosteriorScoreConfig& score, const SvgdConfig& svgd, Rng& rng);

ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const ScoreGradient& grad,
                           const SvgdConfig& svgd);

/// n_steps SVGD updates.
ParticleEnsemble fit_posterior(const ParticleEnsemble& ensemble,
                               std::span<const TaskDataset> data,
                               const PosteriorScoreConfig& score, const SvgdConfig& svgd,
                               Rng& rng);

ParticleEnsemble fit_posterior(const ParticleEnsemble& ensemble, const ScoreGradient& grad,
                               const SvgdConfig& svgd);

enum class ParticleInit { prior, fan_in };

/// P particles drawn i.i.d. from the prior N(0, prior_variance·I), or with
/// the MLP fan-in initializer.
ParticleEnsemble sample_initial_ensemble(const GpConfig& gp, std::size_t particles,
                                         double prior_variance, ParticleInit init, Rng& rng);

nlohmann::json ensemble_to_json(const ParticleEnsemble& ensemble);
ParticleEnsemble ensemble_from_json(const nlohmann::json& j);
void save_ensemble(const ParticleEnsemble& ensemble, const std::filesystem::path& path);
ParticleEnsemble load_ensemble(const std::filesystem::path& path);

nlohmann::json mlp_spec_to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

}  // namespace bamld
