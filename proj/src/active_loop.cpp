#include "bamld/active_loop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bamld/errors.hpp"

namespace bamld {

std::vector<TaskDataset> RunState::selected_data() const {
  std::vector<TaskDataset> out;
  out.reserve(selected_ids.size());
  for (int id : selected_ids) out.push_back(pool.labeled_dataset(id));
  return out;
}

RunState run_active_loop(TaskPool pool, AcquisitionMethod method, std::size_t budget,
                         const GpConfig& gp, const LoopConfig& cfg, Rng& rng,
                         const RoundCallback& on_round) {
  if (budget > pool.size()) {
    throw ConfigError("budget", "budget " + std::to_string(budget) + " exceeds pool size " +
                                    std::to_string(pool.size()));
  }
  cfg.score.validate();
  cfg.svgd.validate();
  cfg.acquisition.validate();

  Rng init_rng = make_rng(rng());
  Rng select_rng = make_rng(rng());
  Rng svgd_rng = make_rng(rng());

  RunState state;
  state.pool = std::move(pool);
  const ParticleEnsemble initial =
      sample_initial_ensemble(gp, cfg.particles, cfg.score.prior_variance, cfg.init, init_rng);
  state.ensemble = initial;

  std::vector<TaskDataset> selected;
  for (std::size_t round = 1; round <= budget; ++round) {
    const auto remaining = state.pool.unlabeled_ids();
    if (remaining.empty()) throw SelectionError("active loop: pool exhausted before budget");
    std::vector<TaskDataset> candidates;
    candidates.reserve(remaining.size());
    for (int id : remaining) candidates.push_back(state.pool.unlabeled_dataset(id));

    RoundRecord record;
    record.round = round;
    record.report =
        select_task(candidates, selected, state.ensemble, method, cfg.acquisition, select_rng);
    const int chosen = record.report.chosen;
    state.pool.oracle_label(chosen);
    state.selected_ids.push_back(chosen);
    selected.push_back(state.pool.labeled_dataset(chosen));

    SvgdConfig svgd = cfg.svgd;
    ParticleEnsemble start = state.ensemble;
    if (round > 1 && cfg.warm_start) {
      svgd.n_steps = cfg.refit_step_count();
    } else if (!cfg.warm_start) {
      start = initial;
    }
    state.ensemble = fit_posterior(start, selected, cfg.score, svgd, svgd_rng);
    state.round = round;
    if (on_round) on_round(state, record);
    state.history.push_back(std::move(record));
  }
  return state;
}

MetaTestSet make_meta_test_set(const EnvConfig& env, const MetaTestConfig& cfg) {
  Rng rng = make_rng(derive_seed(cfg.seed, "meta-test"));
  const TaskPool pool = sample_pool(env, cfg.n_test_tasks, rng);
  MetaTestSet set;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const PoolTask& t = pool.task(static_cast<int>(i));
    const std::size_t n = t.x.rows();
    if (cfg.n_adapt + cfg.n_eval > n) {
      throw ConfigError("n_adapt", "n_adapt + n_eval exceeds " + std::to_string(n) +
                                       " samples per task");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> adapt(idx.begin(), idx.begin() + static_cast<long>(cfg.n_adapt));
    std::vector<std::size_t> eval(idx.begin() + static_cast<long>(cfg.n_adapt),
                                  idx.begin() + static_cast<long>(cfg.n_adapt + cfg.n_eval));
    MetaTestSet::Task task;
    task.params = t.params;
    task.x_adapt = t.x.select_rows(adapt);
    for (auto a : adapt) task.y_adapt.push_back(t.hidden[a]);
    task.x_eval = t.x.select_rows(eval);
    for (auto e : eval) task.y_eval.push_back(eval_task_mean(t.params, t.x(e, 0)));
    set.tasks.push_back(std::move(task));
  }
  return set;
}

RmseResult rmse_of_predictor(const MetaTestSet& tests, const Predictor& predict) {
  RmseResult r;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : tests.tasks) {
    const auto pred = predict(t.x_adapt, t.y_adapt, t.x_eval);
    if (pred.size() != t.y_eval.size()) throw ShapeError("rmse: predictor returned wrong length");
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - t.y_eval[i];
      sq += e * e;
    }
    total += sq;
    count += pred.size();
    r.per_task.push_back(std::sqrt(sq / static_cast<double>(pred.size())));
  }
  r.rmse = count == 0 ? 0.0 : std::sqrt(total / static_cast<double>(count));
  return r;
}

std::vector<double> mixture_predictive_mean(const ParticleEnsemble& ensemble,
                                            const Matrix& x_ctx, std::span<const double> y_ctx,
                                            const Matrix& x_query) {
  std::vector<double> mean(x_query.rows(), 0.0);
  for (const auto& theta : ensemble.particles) {
    const auto p = condition_gp(theta, x_ctx, y_ctx, x_query, ensemble.gp);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p.mean[i];
  }
  for (double& m : mean) m /= static_cast<double>(ensemble.size());
  return mean;
}

RmseResult meta_test_rmse(const ParticleEnsemble& ensemble, const MetaTestSet& tests) {
  return rmse_of_predictor(tests, [&](const Matrix& xa, std::span<const double> ya,
                                      const Matrix& xe) {
    return mixture_predictive_mean(ensemble, xa, ya, xe);
  });
}

RmseResult meta_test_rmse(const ParticleEnsemble& ensemble, const EnvConfig& env,
                          const MetaTestConfig& cfg) {
  return meta_test_rmse(ensemble, make_meta_test_set(env, cfg));
}

std::vector<std::pair<std::size_t, double>> rmse_curve(TaskPool pool, AcquisitionMethod method,
                                                       std::size_t budget, const GpConfig& gp,
                                                       const LoopConfig& cfg,
                                                       const MetaTestSet& tests, Rng& rng,
                                                       RunState* final_state) {
  std::vector<std::pair<std::size_t, double>> curve;
  RunState state = run_active_loop(std::move(pool), method, budget, gp, cfg, rng,
                                   [&](const RunState& s, RoundRecord& rec) {
                                     rec.rmse = meta_test_rmse(s.ensemble, tests).rmse;
                                     curve.emplace_back(rec.round, *rec.rmse);
                                   });
  if (final_state) *final_state = std::move(state);
  return curve;
}

}  // namespace bamld
