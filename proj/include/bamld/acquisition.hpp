#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bamld/gp.hpp"
#include "bamld/hyper_posterior.hpp"
#include "json.hpp"

namespace bamld {

enum class AcquisitionMethod { bamld, uncertainty, diversity, uniform };

std::string to_string(AcquisitionMethod m);
/// Throws ConfigError("method", ...) for unknown names.
AcquisitionMethod acquisition_method_from_string(const std::string& name);

enum class DiversitySeedRule { random_first };
enum class TieBreak { lowest_task_id };

struct AcquisitionConfig {
  std::optional<std::size_t> subset_size;  // absent: all covariates of the task
  std::size_t mc_samples = 512;
  DiversitySeedRule diversity_seed_rule = DiversitySeedRule::random_first;
  TieBreak tie_break = TieBreak::lowest_task_id;

  void validate() const;
};

struct EntropyEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Particle average of ½·log det(2πe·K̃_θp(x̃)).
double aleatoric_term(const ParticleEnsemble& ensemble, const Matrix& x_tilde);

/// Monte Carlo estimate of the entropy of the equal-weight Gaussian mixture.
EntropyEstimate mixture_entropy(std::span<const GpPredictive> components,
                                std::size_t mc_samples, Rng& rng);
EntropyEstimate mixture_entropy(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                                std::size_t mc_samples, Rng& rng);

/// Score of one candidate task with both entropy terms.
struct ScoreTerms {
  double score = 0.0;
  double total_entropy = 0.0;  // mixture entropy estimate
  double aleatoric = 0.0;
  double std_error = 0.0;
};

/// Mixture entropy minus aleatoric term: the mutual information between the
/// task's labels and the hyperparameters.
ScoreTerms bamld_score(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                       const AcquisitionConfig& cfg, Rng& rng);
/// Mixture entropy alone.
ScoreTerms uncertainty_score(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                             const AcquisitionConfig& cfg, Rng& rng);

/// Column mean of the covariates.
std::vector<double> covariate_mean(const Matrix& x);

/// Min distance from each pool task's covariate mean to the selected tasks'
/// covariate means; all zero when nothing is selected yet.
std::map<int, double> diversity_scores(std::span<const TaskDataset> pool,
                                       std::span<const TaskDataset> selected);

struct AcquisitionReport {
  AcquisitionMethod method = AcquisitionMethod::uniform;
  std::map<int, double> scores;
  int chosen = -1;
  std::size_t mc_samples_used = 0;
  std::map<int, ScoreTerms> terms;  // bamld / uncertainty only
  std::string aleatoric_form = "half_logdet_2pie";

  nlohmann::json to_json() const;
};

/// Highest score, ties to the lowest task id. SelectionError on empty input.
int argmax_lowest_id(const std::map<int, double>& scores);

/// Scores every pool task with the chosen method and returns the arg max.
/// Each task's Monte Carlo stream is derived from a base seed drawn from rng
/// and the task id.
AcquisitionReport select_task(std::span<const TaskDataset> pool,
                              std::span<const TaskDataset> selected,
                              const ParticleEnsemble& ensemble, AcquisitionMethod method,
                              const AcquisitionConfig& cfg, Rng& rng);

/// x̃ for one task: all rows when subset_size is absent or ≥ N, else a uniform
/// random subset drawn from rng.
Matrix candidate_inputs(const TaskDataset& task, const AcquisitionConfig& cfg, Rng& rng);

}  // namespace bamld
