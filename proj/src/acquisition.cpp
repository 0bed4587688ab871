#include "bamld/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

std::vector<GpPredictive> component_predictives(const ParticleEnsemble& ensemble,
                                                const Matrix& x_tilde) {
  if (x_tilde.rows() == 0) throw ShapeError("acquisition: empty candidate inputs");
  std::vector<GpPredictive> comps;
  comps.reserve(ensemble.size());
  for (const auto& theta : ensemble.particles)
    comps.push_back(marginal_gaussian(theta, x_tilde, ensemble.gp));
  return comps;
}

double mean_entropy(std::span<const GpPredictive> comps) {
  double s = 0.0;
  for (const auto& c : comps) s += gaussian_entropy(c);
  return s / static_cast<double>(comps.size());
}

ScoreTerms entropy_terms(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                         const AcquisitionConfig& cfg, Rng& rng) {
  const auto comps = component_predictives(ensemble, x_tilde);
  const EntropyEstimate total = mixture_entropy(comps, cfg.mc_samples, rng);
  ScoreTerms t;
  t.total_entropy = total.value;
  t.std_error = total.std_error;
  t.aleatoric = mean_entropy(comps);
  return t;
}

}  // namespace

std::string to_string(AcquisitionMethod m) {
  switch (m) {
    case AcquisitionMethod::bamld:
      return "bamld";
    case AcquisitionMethod::uncertainty:
      return "uncertainty";
    case AcquisitionMethod::diversity:
      return "diversity";
    case AcquisitionMethod::uniform:
      return "uniform";
  }
  return "unknown";
}

AcquisitionMethod acquisition_method_from_string(const std::string& name) {
  for (auto m : {AcquisitionMethod::bamld, AcquisitionMethod::uncertainty,
                 AcquisitionMethod::diversity, AcquisitionMethod::uniform})
    if (to_string(m) == name) return m;
  throw ConfigError("method", "unknown acquisition method '" + name + "'");
}

void AcquisitionConfig::validate() const {
  if (mc_samples < 1) throw ConfigError("mc_samples", "must be >= 1");
  if (subset_size && *subset_size < 1) throw ConfigError("subset_size", "must be >= 1");
}

double aleatoric_term(const ParticleEnsemble& ensemble, const Matrix& x_tilde) {
  return mean_entropy(component_predictives(ensemble, x_tilde));
}

EntropyEstimate mixture_entropy(std::span<const GpPredictive> components,
                                std::size_t mc_samples, Rng& rng) {
  if (components.empty()) throw ShapeError("mixture_entropy: no components");
  if (mc_samples < 1) throw ConfigError("mc_samples", "must be >= 1");
  const std::size_t p = components.size();
  const double log_p = std::log(static_cast<double>(p));
  std::vector<double> logs(p);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    const std::size_t k = uniform_index(rng, p);
    const std::vector<double> y = sample_gaussian(components[k], rng);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < p; ++c) {
      logs[c] = gaussian_log_density(components[c], y);
      mx = std::max(mx, logs[c]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - mx);
    const double neg_log_mix = -(mx + std::log(acc) - log_p);
    sum += neg_log_mix;
    sum_sq += neg_log_mix * neg_log_mix;
  }
  const double m = static_cast<double>(mc_samples);
  EntropyEstimate e;
  e.value = sum / m;
  if (mc_samples > 1) {
    const double var = std::max((sum_sq - m * e.value * e.value) / (m - 1.0), 0.0);
    e.std_error = std::sqrt(var / m);
  }
  return e;
}

EntropyEstimate mixture_entropy(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                                std::size_t mc_samples, Rng& rng) {
  const auto comps = component_predictives(ensemble, x_tilde);
  return mixture_entropy(comps, mc_samples, rng);
}

ScoreTerms bamld_score(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                       const AcquisitionConfig& cfg, Rng& rng) {
  ScoreTerms t = entropy_terms(ensemble, x_tilde, cfg, rng);
  t.score = t.total_entropy - t.aleatoric;
  return t;
}

ScoreTerms uncertainty_score(const ParticleEnsemble& ensemble, const Matrix& x_tilde,
                             const AcquisitionConfig& cfg, Rng& rng) {
  ScoreTerms t = entropy_terms(ensemble, x_tilde, cfg, rng);
  t.score = t.total_entropy;
  return t;
}

std::vector<double> covariate_mean(const Matrix& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m[c] += x(r, c);
  for (double& v : m) v /= static_cast<double>(x.rows());
  return m;
}

std::map<int, double> diversity_scores(std::span<const TaskDataset> pool,
                                       std::span<const TaskDataset> selected) {
  std::vector<std::vector<double>> reps;
  reps.reserve(selected.size());
  for (const auto& s : selected) reps.push_back(covariate_mean(s.x));
  std::map<int, double> scores;
  for (const auto& t : pool) {
    if (reps.empty()) {
      scores[t.task_id] = 0.0;
      continue;
    }
    const auto r = covariate_mean(t.x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : reps) best = std::min(best, std::sqrt(squared_distance(r, s)));
    scores[t.task_id] = best;
  }
  return scores;
}

nlohmann::json AcquisitionReport::to_json() const {
  nlohmann::json scores_j = nlohmann::json::object();
  for (const auto& [id, s] : scores) scores_j[std::to_string(id)] = s;
  nlohmann::json terms_j = nlohmann::json::object();
  for (const auto& [id, t] : terms) {
    terms_j[std::to_string(id)] = {{"total_entropy", t.total_entropy},
                                   {"aleatoric", t.aleatoric},
                                   {"std_error", t.std_error}};
  }
  return {{"method", to_string(method)},   {"chosen", chosen},
          {"scores", std::move(scores_j)}, {"mc_samples_used", mc_samples_used},
          {"terms", std::move(terms_j)},   {"aleatoric_form", aleatoric_form}};
}

int argmax_lowest_id(const std::map<int, double>& scores) {
  if (scores.empty()) throw SelectionError("select_task: no candidate scores");
  int best_id = scores.begin()->first;
  double best = scores.begin()->second;
  for (const auto& [id, s] : scores) {
    if (s > best) {  // strict: earlier (lower) ids win ties
      best = s;
      best_id = id;
    }
  }
  return best_id;
}

Matrix candidate_inputs(const TaskDataset& task, const AcquisitionConfig& cfg, Rng& rng) {
  const std::size_t n = task.size();
  if (!cfg.subset_size || *cfg.subset_size >= n) return task.x;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = *cfg.subset_size;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return task.x.select_rows(idx);
}

AcquisitionReport select_task(std::span<const TaskDataset> pool,
                              std::span<const TaskDataset> selected,
                              const ParticleEnsemble& ensemble, AcquisitionMethod method,
                              const AcquisitionConfig& cfg, Rng& rng) {
  if (pool.empty()) throw SelectionError("select_task: empty pool");
  cfg.validate();
  AcquisitionReport report;
  report.method = method;

  switch (method) {
    case AcquisitionMethod::uniform: {
      const std::size_t k = uniform_index(rng, pool.size());
      for (const auto& t : pool) report.scores[t.task_id] = 0.0;
      report.chosen = pool[k].task_id;
      return report;
    }
    case AcquisitionMethod::diversity: {
      report.scores = diversity_scores(pool, selected);
      if (selected.empty()) {
        report.chosen = pool[uniform_index(rng, pool.size())].task_id;
      } else {
        report.chosen = argmax_lowest_id(report.scores);
      }
      return report;
    }
    case AcquisitionMethod::bamld:
    case AcquisitionMethod::uncertainty:
      break;
  }

  const std::uint64_t base = rng();
  for (const auto& t : pool) {
    Rng task_rng = make_rng(derive_seed(base, {static_cast<std::uint64_t>(t.task_id)}));
    const Matrix x_tilde = candidate_inputs(t, cfg, task_rng);
    const ScoreTerms terms = method == AcquisitionMethod::bamld
                                 ? bamld_score(ensemble, x_tilde, cfg, task_rng)
                                 : uncertainty_score(ensemble, x_tilde, cfg, task_rng);
    report.scores[t.task_id] = terms.score;
    report.terms[t.task_id] = terms;
  }
  report.mc_samples_used = cfg.mc_samples;
  report.chosen = argmax_lowest_id(report.scores);
  return report;
}

}  // namespace bamld
