#include "bamld/environments.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "bamld/errors.hpp"

namespace bamld {

namespace {

constexpr int kPoolVersion = 1;

PoolTask make_task(TaskParams params, std::size_t n, double x_lo, double x_hi, double noise_var,
                   Rng& rng) {
  PoolTask t;
  t.params = std::move(params);
  t.x = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) t.x(i, 0) = uniform(rng, x_lo, x_hi);
  const double sd = std::sqrt(noise_var);
  t.hidden.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = standard_normal(rng);
    t.hidden[i] = eval_task_mean(t.params, t.x(i, 0)) + sd * eps;
  }
  return t;
}

SinusoidTaskParams draw_sinusoid(const SinusoidEnvConfig& cfg, Rng& rng) {
  SinusoidTaskParams p;
  p.a = cfg.a_dist.sample(rng);
  p.b = cfg.b_dist.sample(rng);
  p.c = cfg.c_dist.sample(rng);
  p.alpha = cfg.alpha_dist.sample(rng);
  return p;
}

nlohmann::json params_to_json(const TaskParams& params) {
  if (const auto* s = std::get_if<SinusoidTaskParams>(&params))
    return {{"kind", "sinusoid"}, {"a", s->a}, {"b", s->b}, {"c", s->c}, {"alpha", s->alpha}};
  const auto& b = std::get<BoTaskParams>(params);
  return {{"kind", "bo"},          {"w1", b.w1},         {"w2", b.w2},
          {"w3", b.w3},            {"alpha1", b.alpha1}, {"alpha2", b.alpha2},
          {"alpha3", b.alpha3}};
}

TaskParams params_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "sinusoid") {
    return SinusoidTaskParams{j.at("a").get<double>(), j.at("b").get<double>(),
                              j.at("c").get<double>(), j.at("alpha").get<double>()};
  }
  if (kind == "bo") {
    return BoTaskParams{j.at("w1").get<double>(),     j.at("w2").get<double>(),
                        j.at("w3").get<double>(),     j.at("alpha1").get<double>(),
                        j.at("alpha2").get<double>(), j.at("alpha3").get<double>()};
  }
  throw ParseError("unknown task kind '" + kind + "'", 1);
}

}  // namespace

void Distribution::validate(const char* field) const {
  if (!std::isfinite(p1) || !std::isfinite(p2)) throw ConfigError(field, "non-finite parameter");
  if (kind == Kind::uniform && !(p1 <= p2)) throw ConfigError(field, "uniform needs lo <= hi");
  if (kind == Kind::normal && p2 < 0.0) throw ConfigError(field, "normal variance must be >= 0");
}

double Distribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return p1 == p2 ? p1 : bamld::uniform(rng, p1, p2);
    case Kind::normal:
      return p1 + std::sqrt(p2) * standard_normal(rng);
    case Kind::point:
      break;
  }
  return p1;
}

double eval_sinusoid(const SinusoidTaskParams& p, double x) {
  return p.alpha * x + p.a * std::sin(1.5 * (x - p.b)) + p.c;
}

SinusoidEnvConfig SinusoidEnvConfig::narrow() { return SinusoidEnvConfig{}; }

SinusoidEnvConfig SinusoidEnvConfig::wide() {
  SinusoidEnvConfig c;
  c.a_dist = Distribution::uniform(0.7, 1.3);
  c.b_dist = Distribution::normal(0.0, 0.12);
  c.c_dist = Distribution::normal(5.0, 0.12);
  c.alpha_dist = Distribution::normal(0.5, 0.22);
  return c;
}

void SinusoidEnvConfig::validate() const {
  a_dist.validate("a_dist");
  b_dist.validate("b_dist");
  c_dist.validate("c_dist");
  alpha_dist.validate("alpha_dist");
  if (!(x_lo < x_hi)) throw ConfigError("x_range", "lo must be < hi");
  if (noise_var < 0.0) throw ConfigError("noise_var", "must be >= 0");
  if (n_samples < 1) throw ConfigError("samples_per_task", "must be >= 1");
}

double eval_g_bo(const BoTaskParams& p, double x) {
  constexpr double pi = std::numbers::pi;
  const double d1 = x - p.alpha1, d2 = x - p.alpha2, d3 = x - p.alpha3;
  const double p1 = 1.0 / (pi * (1.0 + d1 * d1));
  const double p2 = 1.0 / (2.0 * pi) * std::exp(-d2 * d2 / 8.0);
  const double p3 = 1.0 / (pi * (1.0 + d3 * d3 / 4.0));
  return 2.0 * p.w1 * p1 + 1.5 * p.w2 * p2 + 1.8 * p.w3 * p3 + 1.0;
}

void BoEnvConfig::validate() const {
  w_dist.validate("w_dist");
  alpha1_dist.validate("alpha1_dist");
  alpha2_dist.validate("alpha2_dist");
  alpha3_dist.validate("alpha3_dist");
  if (!(x_lo < x_hi)) throw ConfigError("x_range", "lo must be < hi");
  if (noise_var < 0.0) throw ConfigError("bo_noise_var", "must be >= 0");
  if (n_samples < 1) throw ConfigError("samples_per_task", "must be >= 1");
}

void ClusterEnvConfig::validate() const {
  base.validate();
  if (n_clusters < 1) throw ConfigError("n_clusters", "must be >= 1");
  if (pool_size % n_clusters != 0)
    throw ConfigError("n_clusters", "must divide pool_size " + std::to_string(pool_size));
}

std::pair<double, double> cluster_amplitude_range(std::size_t j) {
  const double jd = static_cast<double>(j);
  return {1.1 + jd * (0.1 + (jd - 1.0) * 0.05), 1.1 + (jd + 1.0) * (0.1 + jd * 0.05)};
}

double eval_task_mean(const TaskParams& params, double x) {
  return std::visit(
      [x](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, SinusoidTaskParams>)
          return eval_sinusoid(p, x);
        else
          return eval_g_bo(p, x);
      },
      params);
}

const PoolTask& TaskPool::task(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tasks_.size())
    throw LookupError("task pool: unknown task id " + std::to_string(id));
  return tasks_[static_cast<std::size_t>(id)];
}

std::vector<double> TaskPool::oracle_label(int id) {
  const PoolTask& t = task(id);
  if (t.labeled) throw StateError("task pool: task " + std::to_string(id) + " already labeled");
  tasks_[static_cast<std::size_t>(id)].labeled = true;
  return t.hidden;
}

std::size_t TaskPool::labeled_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tasks_) n += t.labeled ? 1 : 0;
  return n;
}

std::vector<int> TaskPool::labeled_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    if (tasks_[i].labeled) ids.push_back(static_cast<int>(i));
  return ids;
}

std::vector<int> TaskPool::unlabeled_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    if (!tasks_[i].labeled) ids.push_back(static_cast<int>(i));
  return ids;
}

TaskDataset TaskPool::unlabeled_dataset(int id) const {
  return TaskDataset{task(id).x, std::nullopt, id};
}

TaskDataset TaskPool::labeled_dataset(int id) const {
  const PoolTask& t = task(id);
  if (!t.labeled) throw StateError("task pool: task " + std::to_string(id) + " is not labeled");
  return TaskDataset{t.x, t.hidden, id};
}

TaskDataset TaskPool::full_dataset(int id) const {
  const PoolTask& t = task(id);
  return TaskDataset{t.x, t.hidden, id};
}

nlohmann::json TaskPool::to_json() const {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : tasks_) {
    tasks.push_back({{"params", params_to_json(t.params)},
                     {"x", t.x.values()},
                     {"hidden_labels", t.hidden},
                     {"labeled", t.labeled}});
  }
  return {{"format", "bamld-pool"}, {"version", kPoolVersion}, {"tasks", std::move(tasks)}};
}

TaskPool TaskPool::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "bamld-pool") throw ParseError("not a task pool", 1);
  if (j.at("version").get<int>() != kPoolVersion)
    throw ParseError("unsupported pool version " + j.at("version").dump(), 1);
  std::vector<PoolTask> tasks;
  for (const auto& jt : j.at("tasks")) {
    PoolTask t;
    t.params = params_from_json(jt.at("params"));
    auto xs = jt.at("x").get<std::vector<double>>();
    const std::size_t n = xs.size();
    t.x = Matrix(n, 1, std::move(xs));
    t.hidden = jt.at("hidden_labels").get<std::vector<double>>();
    if (t.hidden.size() != n) throw ParseError("label count does not match covariates", 1);
    t.labeled = jt.at("labeled").get<bool>();
    tasks.push_back(std::move(t));
  }
  return TaskPool(std::move(tasks));
}

void TaskPool::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump();
}

TaskPool TaskPool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return from_json(nlohmann::json::parse(in));
}

TaskPool sample_sinusoid_pool(const SinusoidEnvConfig& cfg, std::size_t pool_size, Rng& rng) {
  cfg.validate();
  std::vector<PoolTask> tasks;
  tasks.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i)
    tasks.push_back(make_task(draw_sinusoid(cfg, rng), cfg.n_samples, cfg.x_lo, cfg.x_hi,
                              cfg.noise_var, rng));
  return TaskPool(std::move(tasks));
}

TaskPool sample_bo_pool(const BoEnvConfig& cfg, std::size_t pool_size, Rng& rng) {
  cfg.validate();
  std::vector<PoolTask> tasks;
  tasks.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    BoTaskParams p;
    p.w1 = cfg.w_dist.sample(rng);
    p.w2 = cfg.w_dist.sample(rng);
    p.w3 = cfg.w_dist.sample(rng);
    p.alpha1 = cfg.alpha1_dist.sample(rng);
    p.alpha2 = cfg.alpha2_dist.sample(rng);
    p.alpha3 = cfg.alpha3_dist.sample(rng);
    tasks.push_back(make_task(p, cfg.n_samples, cfg.x_lo, cfg.x_hi, cfg.noise_var, rng));
  }
  return TaskPool(std::move(tasks));
}

TaskPool sample_bo_pool(std::size_t pool_size, std::size_t n_samples, Rng& rng) {
  BoEnvConfig cfg;
  cfg.n_samples = n_samples;
  return sample_bo_pool(cfg, pool_size, rng);
}

namespace {

TaskPool cluster_pool(const ClusterEnvConfig& cfg, std::size_t pool_size, Rng& rng) {
  cfg.base.validate();
  if (cfg.n_clusters < 1) throw ConfigError("n_clusters", "must be >= 1");
  const bool blocked = pool_size % cfg.n_clusters == 0;
  const std::size_t per_cluster = blocked ? pool_size / cfg.n_clusters : 0;
  std::vector<PoolTask> tasks;
  tasks.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    const std::size_t j = blocked ? i / per_cluster : i % cfg.n_clusters;
    SinusoidEnvConfig env = cfg.base;
    const auto [lo, hi] = cluster_amplitude_range(j);
    env.a_dist = Distribution::uniform(lo, hi);
    tasks.push_back(
        make_task(draw_sinusoid(env, rng), env.n_samples, env.x_lo, env.x_hi, env.noise_var, rng));
  }
  return TaskPool(std::move(tasks));
}

}  // namespace

TaskPool sample_cluster_pool(const ClusterEnvConfig& cfg, Rng& rng) {
  cfg.validate();
  return cluster_pool(cfg, cfg.pool_size, rng);
}

TaskPool sample_pool(const EnvConfig& env, std::size_t pool_size, Rng& rng) {
  if (const auto* s = std::get_if<SinusoidEnvConfig>(&env)) return sample_sinusoid_pool(*s, pool_size, rng);
  if (const auto* b = std::get_if<BoEnvConfig>(&env)) return sample_bo_pool(*b, pool_size, rng);
  return cluster_pool(std::get<ClusterEnvConfig>(env), pool_size, rng);
}

}  // namespace bamld
