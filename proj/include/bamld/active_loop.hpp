#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "bamld/acquisition.hpp"
#include "bamld/environments.hpp"
#include "bamld/hyper_posterior.hpp"

namespace bamld {

struct LoopConfig {
  PosteriorScoreConfig score;
  SvgdConfig svgd;
  AcquisitionConfig acquisition;
  std::size_t particles = 5;
  ParticleInit init = ParticleInit::prior;
  bool warm_start = true;
  /// SVGD steps for refits after the first round; 0 means n_steps / 4.
  std::size_t refit_steps = 0;

  std::size_t refit_step_count() const {
    return refit_steps > 0 ? refit_steps : std::max<std::size_t>(svgd.n_steps / 4, 1);
  }
};

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  AcquisitionReport report;
  std::optional<double> rmse;
};

struct RunState {
  TaskPool pool;
  std::vector<int> selected_ids;
  ParticleEnsemble ensemble;
  std::size_t round = 0;
  std::vector<RoundRecord> history;

  /// Labeled datasets of the selected tasks, in selection order.
  std::vector<TaskDataset> selected_data() const;
};

/// Called after every refit; may fill in the record's rmse.
using RoundCallback = std::function<void(const RunState&, RoundRecord&)>;

/// select → label → refit, `budget` times. The ensemble starts from
/// sample_initial_ensemble; every later refit warm-starts from the previous
/// ensemble unless cfg.warm_start is false.
RunState run_active_loop(TaskPool pool, AcquisitionMethod method, std::size_t budget,
                         const GpConfig& gp, const LoopConfig& cfg, Rng& rng,
                         const RoundCallback& on_round = {});

struct MetaTestConfig {
  std::size_t n_test_tasks = 20;
  std::size_t n_adapt = 5;
  std::size_t n_eval = 35;
  std::uint64_t seed = 0;
};

/// Fixed meta-test tasks: adaptation points with noisy labels, evaluation
/// points with noiseless target values.
struct MetaTestSet {
  struct Task {
    TaskParams params;
    Matrix x_adapt;
    std::vector<double> y_adapt;
    Matrix x_eval;
    std::vector<double> y_eval;
  };
  std::vector<Task> tasks;
};

/// Adapt/eval split drawn uniformly without replacement from each task's samples.
/// Requires n_adapt + n_eval ≤ samples per task.
MetaTestSet make_meta_test_set(const EnvConfig& env, const MetaTestConfig& cfg);

struct RmseResult {
  double rmse = 0.0;
  std::vector<double> per_task;
};

/// Point predictor: (x_adapt, y_adapt, x_eval) → predicted means at x_eval.
using Predictor =
    std::function<std::vector<double>(const Matrix&, std::span<const double>, const Matrix&)>;

RmseResult rmse_of_predictor(const MetaTestSet& tests, const Predictor& predict);

/// Equal-weight average over particles of the per-particle conditional GP mean.
std::vector<double> mixture_predictive_mean(const ParticleEnsemble& ensemble,
                                            const Matrix& x_ctx, std::span<const double> y_ctx,
                                            const Matrix& x_query);

RmseResult meta_test_rmse(const ParticleEnsemble& ensemble, const MetaTestSet& tests);
RmseResult meta_test_rmse(const ParticleEnsemble& ensemble, const EnvConfig& env,
                          const MetaTestConfig& cfg);

/// (round, RMSE) after every acquisition; the test set is shared by construction.
std::vector<std::pair<std::size_t, double>> rmse_curve(TaskPool pool, AcquisitionMethod method,
                                                       std::size_t budget, const GpConfig& gp,
                                                       const LoopConfig& cfg,
                                                       const MetaTestSet& tests, Rng& rng,
                                                       RunState* final_state = nullptr);

}  // namespace bamld
