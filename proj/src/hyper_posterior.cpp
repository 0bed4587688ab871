#include "bamld/hyper_posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kCheckpointVersion = 1;

double task_weight(const TaskDataset& task, const PosteriorScoreConfig& score) {
  return score.per_task_normalize ? 1.0 / static_cast<double>(task.size()) : 1.0;
}

std::vector<std::size_t> draw_minibatch(std::size_t n_tasks, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(n_tasks);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch >= n_tasks) return idx;
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_tasks - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch);
  return idx;
}

void check_finite(const std::vector<Theta>& particles, const char* where) {
  for (std::size_t p = 0; p < particles.size(); ++p) {
    for (std::size_t i = 0; i < particles[p].size(); ++i) {
      if (!std::isfinite(particles[p][i])) {
        std::ostringstream msg;
        msg << where << ": particle " << p << " coordinate " << i << " is " << particles[p][i];
        throw NumericalError(msg.str());
      }
    }
  }
}

// Adam moments for every particle coordinate.
struct AdamState {
  std::vector<Theta> m, v;
  std::size_t t = 0;
};

ParticleEnsemble apply_update(const ParticleEnsemble& ensemble, const std::vector<Theta>& grads,
                              const SvgdConfig& svgd, AdamState* adam) {
  ParticleEnsemble next = ensemble;
  if (svgd.step_size == 0.0) return next;
  const auto phi = svgd_direction(ensemble.particles, grads, svgd.bandwidth_floor);
  if (svgd.optimizer == SvgdOptimizer::plain || adam == nullptr) {
    for (std::size_t p = 0; p < next.size(); ++p)
      for (std::size_t i = 0; i < next.particles[p].size(); ++i)
        next.particles[p][i] += svgd.step_size * phi[p][i];
  } else {
    if (adam->m.empty()) {
      adam->m.assign(next.size(), Theta(phi[0].size(), 0.0));
      adam->v = adam->m;
    }
    ++adam->t;
    const double t = static_cast<double>(adam->t);
    const double c1 = 1.0 - std::pow(svgd.adam_beta1, t);
    const double c2 = 1.0 - std::pow(svgd.adam_beta2, t);
    for (std::size_t p = 0; p < next.size(); ++p) {
      for (std::size_t i = 0; i < next.particles[p].size(); ++i) {
        double& m = adam->m[p][i];
        double& v = adam->v[p][i];
        m = svgd.adam_beta1 * m + (1.0 - svgd.adam_beta1) * phi[p][i];
        v = svgd.adam_beta2 * v + (1.0 - svgd.adam_beta2) * phi[p][i] * phi[p][i];
        next.particles[p][i] += svgd.step_size * (m / c1) / (std::sqrt(v / c2) + svgd.adam_epsilon);
      }
    }
  }
  check_finite(next.particles, "svgd_step");
  return next;
}

std::vector<Theta> data_gradients(const ParticleEnsemble& ensemble,
                                  std::span<const TaskDataset> data,
                                  const PosteriorScoreConfig& score, const SvgdConfig& svgd,
                                  Rng& rng) {
  const auto batch = draw_minibatch(data.size(), svgd.task_minibatch, rng);
  std::vector<Theta> grads;
  grads.reserve(ensemble.size());
  for (const auto& p : ensemble.particles)
    grads.push_back(log_posterior_grad(p, data, batch, score, ensemble.gp));
  return grads;
}

std::vector<Theta> injected_gradients(const ParticleEnsemble& ensemble, const ScoreGradient& grad) {
  std::vector<Theta> grads;
  grads.reserve(ensemble.size());
  for (const auto& p : ensemble.particles) grads.push_back(grad(p));
  return grads;
}

}  // namespace

void ParticleEnsemble::validate() const {
  if (particles.empty()) throw ShapeError("ParticleEnsemble: no particles");
  gp.validate();
  const std::size_t n = gp.param_count();
  for (const auto& p : particles)
    if (p.size() != n) throw ShapeError("ParticleEnsemble: particle length mismatch");
  check_finite(particles, "ParticleEnsemble");
}

void PosteriorScoreConfig::validate() const {
  if (!(prior_variance > 0.0)) throw ConfigError("prior_variance", "must be > 0");
  if (!(gamma > 0.0)) throw ConfigError("gamma", "must be > 0");
}

void SvgdConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("step_size", "must be > 0");
  if (n_steps < 1) throw ConfigError("n_steps", "must be >= 1");
  if (task_minibatch < 1) throw ConfigError("task_minibatch", "must be >= 1");
}

double log_prior(std::span<const double> theta, double prior_variance) {
  const double sq = dot(theta, theta);
  return -0.5 * sq / prior_variance -
         0.5 * static_cast<double>(theta.size()) * (kLog2Pi + std::log(prior_variance));
}

double log_posterior_score(std::span<const double> theta, std::span<const TaskDataset> data,
                           const PosteriorScoreConfig& score, const GpConfig& gp) {
  double value = log_prior(theta, score.prior_variance);
  if (data.empty()) return value;
  double data_term = 0.0;
  for (const auto& task : data)
    data_term += task_weight(task, score) * log_marginal_likelihood(theta, task, gp);
  return value + score.gamma * data_term / static_cast<double>(data.size());
}

Theta log_posterior_grad(std::span<const double> theta, std::span<const TaskDataset> data,
                         std::span<const std::size_t> batch, const PosteriorScoreConfig& score,
                         const GpConfig& gp) {
  Theta grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = -theta[i] / score.prior_variance;
  if (data.empty() || batch.empty()) return grad;
  // γ·(1/|T|)·(|T|/|batch|) = γ/|batch|
  const double scale = score.gamma / static_cast<double>(batch.size());
  for (std::size_t b : batch) {
    const TaskDataset& task = data[b];
    const auto g = log_marginal_likelihood_grad(theta, task, gp);
    const double w = scale * task_weight(task, score);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * g[i];
  }
  return grad;
}

Theta log_posterior_grad(std::span<const double> theta, std::span<const TaskDataset> data,
                         const PosteriorScoreConfig& score, const GpConfig& gp) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return log_posterior_grad(theta, data, all, score, gp);
}

double svgd_bandwidth(std::span<const Theta> particles, double floor) {
  const std::size_t n = particles.size();
  if (n < 2) return std::max(floor, 1.0);
  std::vector<double> sq;
  sq.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sq.push_back(squared_distance(particles[i], particles[j]));
  std::sort(sq.begin(), sq.end());
  const std::size_t m = sq.size();
  // median of distances, squared
  const double med = m % 2 == 1 ? std::sqrt(sq[m / 2])
                                : 0.5 * (std::sqrt(sq[m / 2 - 1]) + std::sqrt(sq[m / 2]));
  const double h = med * med / std::log(static_cast<double>(n));
  return h > floor ? h : floor;
}

std::vector<Theta> svgd_direction(std::span<const Theta> particles, std::span<const Theta> grads,
                                  double bandwidth_floor) {
  const std::size_t n = particles.size();
  if (grads.size() != n) throw ShapeError("svgd_direction: one gradient per particle required");
  const std::size_t dim = n == 0 ? 0 : particles[0].size();
  std::vector<Theta> phi(n, Theta(dim, 0.0));
  if (n == 1) {
    phi[0] = grads[0];  // κ(θ,θ) = 1 and ∇κ(θ,θ) = 0
    return phi;
  }
  const double h = svgd_bandwidth(particles, bandwidth_floor);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double k = std::exp(-squared_distance(particles[j], particles[i]) / h);
      const double rep = 2.0 * k / h;
      for (std::size_t c = 0; c < dim; ++c)
        phi[i][c] += inv_n * (k * grads[j][c] + rep * (particles[i][c] - particles[j][c]));
    }
  }
  return phi;
}

// A single step has no optimizer history, so it is always a plain step.
ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, std::span<const TaskDataset> data,
                           const PosteriorScoreConfig& score, const SvgdConfig& svgd, Rng& rng) {
  return apply_update(ensemble, data_gradients(ensemble, data, score, svgd, rng), svgd, nullptr);
}

ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const ScoreGradient& grad,
                           const SvgdConfig& svgd) {
  return apply_update(ensemble, injected_gradients(ensemble, grad), svgd, nullptr);
}

ParticleEnsemble fit_posterior(const ParticleEnsemble& ensemble,
                               std::span<const TaskDataset> data,
                               const PosteriorScoreConfig& score, const SvgdConfig& svgd,
                               Rng& rng) {
  ParticleEnsemble current = ensemble;
  AdamState adam;
  for (std::size_t s = 0; s < svgd.n_steps; ++s)
    current = apply_update(current, data_gradients(current, data, score, svgd, rng), svgd, &adam);
  return current;
}

ParticleEnsemble fit_posterior(const ParticleEnsemble& ensemble, const ScoreGradient& grad,
                               const SvgdConfig& svgd) {
  ParticleEnsemble current = ensemble;
  AdamState adam;
  for (std::size_t s = 0; s < svgd.n_steps; ++s)
    current = apply_update(current, injected_gradients(current, grad), svgd, &adam);
  return current;
}

ParticleEnsemble sample_initial_ensemble(const GpConfig& gp, std::size_t particles,
                                         double prior_variance, ParticleInit init, Rng& rng) {
  gp.validate();
  if (particles == 0) throw ConfigError("particles", "must be >= 1");
  ParticleEnsemble ens;
  ens.gp = gp;
  const double sd = std::sqrt(prior_variance);
  for (std::size_t p = 0; p < particles; ++p) {
    Theta theta;
    if (init == ParticleInit::prior) {
      theta.resize(gp.param_count());
      for (double& v : theta) v = sd * standard_normal(rng);
    } else {
      auto m = FlatParams::initialize(gp.mean_spec, rng);
      auto f = FlatParams::initialize(gp.feature_spec, rng);
      theta = std::move(m.values);
      theta.insert(theta.end(), f.values.begin(), f.values.end());
    }
    ens.particles.push_back(std::move(theta));
  }
  return ens;
}

nlohmann::json mlp_spec_to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", "tanh"}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  if (j.value("activation", std::string("tanh")) != "tanh")
    throw ShapeError("MlpSpec: only tanh activation is supported");
  s.validate();
  return s;
}

nlohmann::json ensemble_to_json(const ParticleEnsemble& ensemble) {
  return {{"format", "bamld-ensemble"},
          {"version", kCheckpointVersion},
          {"noise_variance", ensemble.gp.noise_variance},
          {"mean_spec", mlp_spec_to_json(ensemble.gp.mean_spec)},
          {"feature_spec", mlp_spec_to_json(ensemble.gp.feature_spec)},
          {"particles", ensemble.particles}};
}

ParticleEnsemble ensemble_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "bamld-ensemble")
    throw ParseError("not an ensemble checkpoint", 1);
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + j.at("version").dump(), 1);
  ParticleEnsemble ens;
  ens.gp.noise_variance = j.at("noise_variance").get<double>();
  ens.gp.mean_spec = mlp_spec_from_json(j.at("mean_spec"));
  ens.gp.feature_spec = mlp_spec_from_json(j.at("feature_spec"));
  ens.particles = j.at("particles").get<std::vector<Theta>>();
  ens.validate();
  return ens;
}

void save_ensemble(const ParticleEnsemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << ensemble_to_json(ensemble).dump();
}

ParticleEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return ensemble_from_json(nlohmann::json::parse(in));
}

}  // namespace bamld
