#include "bamld/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bamld/checks.hpp"
#include "bamld/errors.hpp"

namespace bamld {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::rmse_fig2:
      return "rmse_fig2";
    case Experiment::rmse_fig3:
      return "rmse_fig3";
    case Experiment::clusters_fig4:
      return "clusters_fig4";
    case Experiment::bo_fig5:
      return "bo_fig5";
    case Experiment::property_suite:
      return "property_suite";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::rmse_fig2, Experiment::rmse_fig3, Experiment::clusters_fig4,
                 Experiment::bo_fig5, Experiment::property_suite})
    if (to_string(e) == name) return e;
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

std::vector<std::string> supported_methods(Experiment e) {
  switch (e) {
    case Experiment::rmse_fig2:
    case Experiment::rmse_fig3:
    case Experiment::clusters_fig4:
      return {"bamld", "uncertainty", "diversity", "uniform"};
    case Experiment::bo_fig5:
      return {"vanilla_bo", "meta_bo", "bamld_meta_bo"};
    case Experiment::property_suite:
      return {"checks"};
  }
  return {};
}

ExperimentConfig ExperimentConfig::for_profile(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  if (profile == "desk") return c;
  if (profile == "paper") {
    c.net_hidden = {32, 32};
    c.svgd_steps = 10000;
    c.svgd_step_size = 1e-3;
    c.mc_samples = 512;
    return c;
  }
  throw ConfigError("profile", "unknown profile '" + profile + "' (expected desk or paper)");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds", "must be non-empty");
  if (pool_size < 1) throw ConfigError("pool_size", "must be >= 1");
  if (samples_per_task < 1) throw ConfigError("samples_per_task", "must be >= 1");
  if (budget < 1) throw ConfigError("budget", "must be >= 1");
  if (budget > pool_size) throw ConfigError("budget", "must not exceed pool_size");
  const auto allowed = supported_methods(experiment);
  for (const auto& m : methods)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
      throw ConfigError("methods", "'" + m + "' is not a method of " + to_string(experiment));
  if (net_hidden.empty()) throw ConfigError("net_hidden", "needs at least one hidden layer");
  for (auto h : net_hidden)
    if (h < 1) throw ConfigError("net_hidden", "layer widths must be >= 1");
  if (feature_dim < 1) throw ConfigError("feature_dim", "must be >= 1");
  if (!(noise_variance > 0.0)) throw ConfigError("noise_variance", "must be > 0");
  if (!(prior_variance > 0.0)) throw ConfigError("prior_variance", "must be > 0");
  if (!(gamma > 0.0)) throw ConfigError("gamma", "must be > 0");
  if (particles < 1) throw ConfigError("particles", "must be >= 1");
  if (particle_init != "prior" && particle_init != "fan_in")
    throw ConfigError("particle_init", "expected prior or fan_in");
  if (svgd_optimizer != "plain" && svgd_optimizer != "adam")
    throw ConfigError("svgd_optimizer", "expected plain or adam");
  if (!(svgd_step_size > 0.0)) throw ConfigError("svgd_step_size", "must be > 0");
  if (svgd_steps < 1) throw ConfigError("svgd_steps", "must be >= 1");
  if (task_minibatch < 1) throw ConfigError("task_minibatch", "must be >= 1");
  if (mc_samples < 1) throw ConfigError("mc_samples", "must be >= 1");
  if (subset_size && *subset_size < 1) throw ConfigError("subset_size", "must be >= 1");
  if (n_test_tasks < 1) throw ConfigError("n_test_tasks", "must be >= 1");
  if (n_adapt < 1 || n_eval < 1) throw ConfigError("n_adapt", "n_adapt and n_eval must be >= 1");
  if (experiment != Experiment::bo_fig5 && experiment != Experiment::property_suite &&
      n_adapt + n_eval > samples_per_task)
    throw ConfigError("n_eval", "n_adapt + n_eval must not exceed samples_per_task");
  if (experiment == Experiment::clusters_fig4) {
    if (clusters.empty()) throw ConfigError("clusters", "must be non-empty");
    for (auto c : clusters)
      if (c < 1 || pool_size % c != 0) throw ConfigError("clusters", "each count must divide pool_size");
  }
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  bo_config().validate();
  if (bo_test_tasks < 1) throw ConfigError("bo_test_tasks", "must be >= 1");
  if (!(vanilla_signal_variance > 0.0))
    throw ConfigError("vanilla_signal_variance", "must be > 0");
  if (!(vanilla_lengthscale > 0.0)) throw ConfigError("vanilla_lengthscale", "must be > 0");
}

std::vector<std::string> ExperimentConfig::resolved_methods() const {
  return methods.empty() ? supported_methods(experiment) : methods;
}

GpConfig ExperimentConfig::gp_config() const {
  GpConfig gp;
  gp.noise_variance = noise_variance;
  gp.mean_spec = MlpSpec{1, net_hidden, 1};
  gp.feature_spec = MlpSpec{1, net_hidden, feature_dim};
  return gp;
}

LoopConfig ExperimentConfig::loop_config() const {
  LoopConfig l;
  l.score.prior_variance = prior_variance;
  l.score.gamma = gamma;
  l.svgd.step_size = svgd_step_size;
  l.svgd.n_steps = svgd_steps;
  l.svgd.task_minibatch = task_minibatch;
  l.svgd.optimizer = svgd_optimizer == "adam" ? SvgdOptimizer::adam : SvgdOptimizer::plain;
  l.acquisition.mc_samples = mc_samples;
  l.acquisition.subset_size = subset_size;
  l.particles = particles;
  l.init = particle_init == "fan_in" ? ParticleInit::fan_in : ParticleInit::prior;
  l.warm_start = warm_start;
  l.refit_steps = refit_steps;
  return l;
}

BoRunConfig ExperimentConfig::bo_config() const {
  BoRunConfig b;
  b.n_iterations = bo_iterations;
  b.candidate_grid = bo_candidate_grid;
  b.ucb_beta = ucb_beta;
  b.surrogate_update_steps = bo_update_steps;
  b.observation_noise_var = bo_noise_var;
  return b;
}

MetaTestConfig ExperimentConfig::meta_test_config(std::uint64_t seed) const {
  return MetaTestConfig{n_test_tasks, n_adapt, n_eval, seed};
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = to_string(experiment);
  j["profile"] = profile;
  j["seeds"] = seeds;
  j["pool_size"] = pool_size;
  j["samples_per_task"] = samples_per_task;
  j["budget"] = budget;
  j["methods"] = resolved_methods();
  j["net_hidden"] = net_hidden;
  j["feature_dim"] = feature_dim;
  j["noise_variance"] = noise_variance;
  j["prior_variance"] = prior_variance;
  j["gamma"] = gamma;
  j["particles"] = particles;
  j["particle_init"] = particle_init;
  j["svgd_steps"] = svgd_steps;
  j["svgd_step_size"] = svgd_step_size;
  j["svgd_optimizer"] = svgd_optimizer;
  j["refit_steps"] = refit_steps;
  j["task_minibatch"] = task_minibatch;
  j["warm_start"] = warm_start;
  j["mc_samples"] = mc_samples;
  j["subset_size"] = subset_size ? json(*subset_size) : json(nullptr);
  j["n_test_tasks"] = n_test_tasks;
  j["n_adapt"] = n_adapt;
  j["n_eval"] = n_eval;
  j["clusters"] = clusters;
  j["bo_iterations"] = bo_iterations;
  j["bo_candidate_grid"] = bo_candidate_grid;
  j["ucb_beta"] = ucb_beta;
  j["bo_update_steps"] = bo_update_steps;
  j["bo_noise_var"] = bo_noise_var;
  j["bo_test_tasks"] = bo_test_tasks;
  j["vanilla_signal_variance"] = vanilla_signal_variance;
  j["vanilla_lengthscale"] = vanilla_lengthscale;
  j["output_dir"] = output_dir.string();
  j["workers"] = workers;
  return j;
}

namespace {

template <class T>
T read_key(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ConfigError(key, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError(key, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(key, "expected a string");
    }
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("invalid value: ") + e.what());
  }
}

template <class T>
std::vector<T> read_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key, "expected a list");
  std::vector<T> out;
  for (const auto& v : j) out.push_back(read_key<T>(v, key));
  return out;
}

std::vector<std::uint64_t> read_seeds(const json& j) {
  if (!j.is_array()) throw ConfigError("seeds", "expected a list of integers");
  std::vector<std::uint64_t> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError("seeds", "expected non-negative integers");
    out.push_back(v.get<std::uint64_t>());
  }
  return out;
}

}  // namespace

ExperimentConfig apply_config_json(ExperimentConfig c, const json& j) {
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") c.experiment = experiment_from_string(read_key<std::string>(v, key));
    else if (key == "profile") c.profile = read_key<std::string>(v, key);
    else if (key == "seeds") c.seeds = read_seeds(v);
    else if (key == "pool_size") c.pool_size = read_key<std::size_t>(v, key);
    else if (key == "samples_per_task") c.samples_per_task = read_key<std::size_t>(v, key);
    else if (key == "budget") c.budget = read_key<std::size_t>(v, key);
    else if (key == "methods") c.methods = read_list<std::string>(v, key);
    else if (key == "net_hidden") c.net_hidden = read_list<std::size_t>(v, key);
    else if (key == "feature_dim") c.feature_dim = read_key<std::size_t>(v, key);
    else if (key == "noise_variance") c.noise_variance = read_key<double>(v, key);
    else if (key == "prior_variance") c.prior_variance = read_key<double>(v, key);
    else if (key == "gamma") c.gamma = read_key<double>(v, key);
    else if (key == "particles") c.particles = read_key<std::size_t>(v, key);
    else if (key == "particle_init") c.particle_init = read_key<std::string>(v, key);
    else if (key == "svgd_steps") c.svgd_steps = read_key<std::size_t>(v, key);
    else if (key == "svgd_step_size") c.svgd_step_size = read_key<double>(v, key);
    else if (key == "svgd_optimizer") c.svgd_optimizer = read_key<std::string>(v, key);
    else if (key == "refit_steps") c.refit_steps = read_key<std::size_t>(v, key);
    else if (key == "task_minibatch") c.task_minibatch = read_key<std::size_t>(v, key);
    else if (key == "warm_start") c.warm_start = read_key<bool>(v, key);
    else if (key == "mc_samples") c.mc_samples = read_key<std::size_t>(v, key);
    else if (key == "subset_size")
      c.subset_size = v.is_null() ? std::nullopt
                                  : std::optional<std::size_t>(read_key<std::size_t>(v, key));
    else if (key == "n_test_tasks") c.n_test_tasks = read_key<std::size_t>(v, key);
    else if (key == "n_adapt") c.n_adapt = read_key<std::size_t>(v, key);
    else if (key == "n_eval") c.n_eval = read_key<std::size_t>(v, key);
    else if (key == "clusters") c.clusters = read_list<std::size_t>(v, key);
    else if (key == "bo_iterations") c.bo_iterations = read_key<std::size_t>(v, key);
    else if (key == "bo_candidate_grid") c.bo_candidate_grid = read_key<std::size_t>(v, key);
    else if (key == "ucb_beta") c.ucb_beta = read_key<double>(v, key);
    else if (key == "bo_update_steps") c.bo_update_steps = read_key<std::size_t>(v, key);
    else if (key == "bo_noise_var") c.bo_noise_var = read_key<double>(v, key);
    else if (key == "bo_test_tasks") c.bo_test_tasks = read_key<std::size_t>(v, key);
    else if (key == "vanilla_signal_variance")
      c.vanilla_signal_variance = read_key<double>(v, key);
    else if (key == "vanilla_lengthscale") c.vanilla_lengthscale = read_key<double>(v, key);
    else if (key == "output_dir") c.output_dir = read_key<std::string>(v, key);
    else if (key == "workers") c.workers = read_key<std::size_t>(v, key);
    else throw ConfigError(key, "unknown configuration key");
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path,
                                        const std::optional<std::string>& profile_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  std::string profile = "desk";
  if (j.contains("profile")) profile = read_key<std::string>(j["profile"], "profile");
  if (profile_override) profile = *profile_override;
  ExperimentConfig c = apply_config_json(ExperimentConfig::for_profile(profile), j);
  c.profile = profile;
  return c;
}

bool canonical_less(const ResultRow& a, const ResultRow& b) {
  return std::tie(a.experiment, a.seed, a.method, a.step, a.metric, a.value) <
         std::tie(b.experiment, b.seed, b.method, b.step, b.metric, b.value);
}

std::string format_results_csv(std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end(), canonical_less);
  std::string out = std::string(kCsvHeader) + "\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += r.experiment + "," + std::to_string(r.seed) + "," + r.method + "," +
           std::to_string(r.step) + "," + r.metric + "," + buf + "\n";
  }
  return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_results_csv(rows);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kCsvHeader)
        throw ParseError("expected header '" + std::string(kCsvHeader) + "'", lineno);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.push_back("");
    if (f.size() != 6)
      throw ParseError("expected 6 fields, found " + std::to_string(f.size()), lineno);
    ResultRow r;
    r.experiment = f[0];
    r.method = f[2];
    r.metric = f[4];
    try {
      std::size_t pos = 0;
      r.seed = std::stoull(f[1], &pos);
      if (pos != f[1].size()) throw std::invalid_argument("seed");
      r.step = std::stoll(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument("step");
      r.value = std::stod(f[5], &pos);
      if (pos != f[5].size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      throw ParseError("malformed seed, step or value", lineno);
    }
    rows.push_back(std::move(r));
  }
  if (lineno == 0) throw ParseError("empty file", 1);
  return rows;
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("csv", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_results_csv(ss.str());
}

namespace {

struct Job {
  std::uint64_t seed = 0;
  std::string method;
  std::size_t clusters = 0;
};

struct JobOutput {
  std::vector<ResultRow> rows;
  json history;
  std::string history_name;
  bool passed = true;
};

ResultRow row(const ExperimentConfig& cfg, const Job& job, std::int64_t step,
              const std::string& metric, double value) {
  return ResultRow{to_string(cfg.experiment), job.seed, job.method, step, metric, value};
}

json round_history(const RunState& state) {
  json rounds = json::array();
  for (const auto& rec : state.history) {
    json r;
    r["round"] = rec.round;
    r["rmse"] = rec.rmse ? json(*rec.rmse) : json(nullptr);
    r["report"] = rec.report.to_json();
    rounds.push_back(r);
  }
  return rounds;
}

SinusoidEnvConfig sinusoid_env(const ExperimentConfig& cfg) {
  SinusoidEnvConfig env =
      cfg.experiment == Experiment::rmse_fig3 ? SinusoidEnvConfig::wide() : SinusoidEnvConfig::narrow();
  env.n_samples = cfg.samples_per_task;
  return env;
}

JobOutput run_rmse_job(const ExperimentConfig& cfg, const Job& job) {
  EnvConfig env;
  if (cfg.experiment == Experiment::clusters_fig4) {
    ClusterEnvConfig c;
    c.n_clusters = job.clusters;
    c.base = sinusoid_env(cfg);
    c.pool_size = cfg.pool_size;
    env = c;
  } else {
    env = sinusoid_env(cfg);
  }
  Rng pool_rng = make_rng(derive_seed(job.seed, "pool"));
  TaskPool pool = sample_pool(env, cfg.pool_size, pool_rng);
  const MetaTestSet tests = make_meta_test_set(env, cfg.meta_test_config(job.seed));
  Rng loop_rng = make_rng(derive_seed(job.seed, "loop"));
  RunState state;
  const auto curve = rmse_curve(std::move(pool), acquisition_method_from_string(job.method),
                                cfg.budget, cfg.gp_config(), cfg.loop_config(), tests, loop_rng,
                                &state);
  JobOutput out;
  if (cfg.experiment == Experiment::clusters_fig4) {
    out.rows.push_back(row(cfg, job, static_cast<std::int64_t>(job.clusters), "rmse_at_budget",
                           curve.back().second));
  } else {
    for (const auto& [round, rmse] : curve)
      out.rows.push_back(row(cfg, job, static_cast<std::int64_t>(round), "rmse", rmse));
  }
  out.history["experiment"] = to_string(cfg.experiment);
  out.history["seed"] = job.seed;
  out.history["method"] = job.method;
  if (job.clusters) out.history["clusters"] = job.clusters;
  out.history["selected"] = state.selected_ids;
  out.history["rounds"] = round_history(state);
  out.history_name = to_string(cfg.experiment) + "_seed" + std::to_string(job.seed) + "_" +
                     job.method +
                     (job.clusters ? "_C" + std::to_string(job.clusters) : std::string()) + ".json";
  return out;
}

JobOutput run_bo_job(const ExperimentConfig& cfg, const Job& job) {
  BoEnvConfig env;
  env.n_samples = cfg.samples_per_task;
  env.noise_var = cfg.bo_noise_var;
  const BoRunConfig bo = cfg.bo_config();
  GpConfig gp = cfg.gp_config();
  gp.noise_variance = cfg.bo_noise_var;
  const LoopConfig loop = cfg.loop_config();

  Rng test_rng = make_rng(derive_seed(job.seed, "bo-test"));
  const TaskPool test_pool = sample_bo_pool(env, cfg.bo_test_tasks, test_rng);

  JobOutput out;
  std::optional<ParticleEnsemble> ensemble;
  std::vector<TaskDataset> meta_train;
  if (job.method != "vanilla_bo") {
    Rng pool_rng = make_rng(derive_seed(job.seed, "pool"));
    TaskPool pool = sample_bo_pool(env, cfg.pool_size, pool_rng);
    Rng loop_rng = make_rng(derive_seed(job.seed, "loop"));
    if (job.method == "meta_bo") {
      for (int id = 0; id < static_cast<int>(pool.size()); ++id) {
        pool.oracle_label(id);
        meta_train.push_back(pool.labeled_dataset(id));
      }
      const ParticleEnsemble init =
          sample_initial_ensemble(gp, loop.particles, loop.score.prior_variance, loop.init, loop_rng);
      ensemble = fit_posterior(init, meta_train, loop.score, loop.svgd, loop_rng);
    } else {
      RunState state = run_active_loop(std::move(pool), AcquisitionMethod::bamld, cfg.budget, gp,
                                       loop, loop_rng);
      meta_train = state.selected_data();
      ensemble = state.ensemble;
      out.history["selected"] = state.selected_ids;
      out.history["rounds"] = round_history(state);
    }
  }

  std::vector<double> mean_regret(bo.n_iterations, 0.0);
  json traces = json::array();
  for (std::size_t k = 0; k < cfg.bo_test_tasks; ++k) {
    const auto& task = std::get<BoTaskParams>(test_pool.task(static_cast<int>(k)).params);
    Rng noise_rng = make_rng(derive_seed(derive_seed(job.seed, "bo-noise"), {k}));
    BoTrace trace;
    if (ensemble) {
      EnsembleSurrogate sur(*ensemble, meta_train, loop.score, loop.svgd, bo.surrogate_update_steps,
                            make_rng(derive_seed(derive_seed(job.seed, "bo-surrogate"), {k})));
      trace = run_bo(task, sur, bo, noise_rng);
    } else {
      SquaredExpSurrogate sur(cfg.vanilla_signal_variance, cfg.vanilla_lengthscale,
                              cfg.bo_noise_var);
      trace = run_bo(task, sur, bo, noise_rng);
    }
    std::string why;
    if (!bo_trace_invariants_hold(trace, &why))
      throw NumericalError("BO trace invariant violated: " + why);
    const std::string suffix = "/task" + std::to_string(k);
    for (std::size_t t = 0; t < trace.regret.size(); ++t) {
      const auto step = static_cast<std::int64_t>(t + 1);
      out.rows.push_back(row(cfg, job, step, "x" + suffix, trace.queries[t].first));
      out.rows.push_back(row(cfg, job, step, "y" + suffix, trace.queries[t].second));
      out.rows.push_back(row(cfg, job, step, "best_so_far" + suffix, trace.best_so_far[t]));
      out.rows.push_back(row(cfg, job, step, "regret" + suffix, trace.regret[t]));
      mean_regret[t] += trace.regret[t] / static_cast<double>(cfg.bo_test_tasks);
    }
    json tj;
    tj["true_max"] = trace.true_max;
    tj["regret"] = trace.regret;
    traces.push_back(tj);
  }
  for (std::size_t t = 0; t < mean_regret.size(); ++t)
    out.rows.push_back(row(cfg, job, static_cast<std::int64_t>(t + 1), "regret", mean_regret[t]));
  out.history["experiment"] = to_string(cfg.experiment);
  out.history["seed"] = job.seed;
  out.history["method"] = job.method;
  out.history["traces"] = traces;
  out.history_name = "bo_fig5_seed" + std::to_string(job.seed) + "_" + job.method + ".json";
  return out;
}

JobOutput run_property_job(const ExperimentConfig& cfg, const Job& job) {
  JobOutput out;
  json checks = json::array();
  for (const auto& c : run_property_suite(job.seed)) {
    out.rows.push_back(row(cfg, job, c.id, "passed", c.passed ? 1.0 : 0.0));
    out.passed = out.passed && c.passed;
    checks.push_back({{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  out.history["checks"] = checks;
  out.history_name = "property_suite_seed" + std::to_string(job.seed) + ".json";
  return out;
}

JobOutput run_job(const ExperimentConfig& cfg, const Job& job) {
  switch (cfg.experiment) {
    case Experiment::bo_fig5:
      return run_bo_job(cfg, job);
    case Experiment::property_suite:
      return run_property_job(cfg, job);
    default:
      return run_rmse_job(cfg, job);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds) {
    if (cfg.experiment == Experiment::property_suite) {
      jobs.push_back({seed, "checks", 0});
      continue;
    }
    for (const auto& m : cfg.resolved_methods()) {
      if (cfg.experiment == Experiment::clusters_fig4) {
        for (auto c : cfg.clusters) jobs.push_back({seed, m, c});
      } else {
        jobs.push_back({seed, m, 0});
      }
    }
  }

  std::error_code ec;
  fs::create_directories(cfg.output_dir / "history", ec);
  if (ec) throw std::runtime_error("cannot create " + (cfg.output_dir / "history").string() + ": " + ec.message());

  std::vector<JobOutput> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex channel;
  std::vector<ResultRow> rows;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        JobOutput o = run_job(cfg, jobs[i]);
        std::lock_guard<std::mutex> lock(channel);
        rows.insert(rows.end(), o.rows.begin(), o.rows.end());
        outputs[i] = std::move(o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.workers, std::max<std::size_t>(jobs.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RunSummary summary;
  std::sort(rows.begin(), rows.end(), canonical_less);
  summary.rows = rows;
  summary.results_csv = cfg.output_dir / "results.csv";
  write_results_csv(rows, summary.results_csv);
  write_text(cfg.output_dir / "config_resolved.json", cfg.to_json().dump(2) + "\n");
  for (const auto& o : outputs) {
    summary.all_passed = summary.all_passed && o.passed;
    if (!o.history_name.empty())
      write_text(cfg.output_dir / "history" / o.history_name, o.history.dump(2) + "\n");
  }
  if (cfg.experiment != Experiment::property_suite) {
    summary.plot_svg = cfg.output_dir / (to_string(cfg.experiment) + ".svg");
    write_text(summary.plot_svg, plot_curves(rows, plot_kind_for(cfg.experiment)));
  }
  return summary;
}

PlotKind plot_kind_from_string(const std::string& name) {
  if (name == "fig2" || name == "fig3" || name == "rmse" || name == "rmse_fig2" ||
      name == "rmse_fig3")
    return PlotKind::rmse;
  if (name == "fig4" || name == "clusters" || name == "clusters_fig4") return PlotKind::clusters;
  if (name == "fig5" || name == "regret" || name == "bo_fig5") return PlotKind::regret;
  throw ConfigError("kind", "unknown figure kind '" + name + "'");
}

PlotKind plot_kind_for(Experiment e) {
  switch (e) {
    case Experiment::clusters_fig4:
      return PlotKind::clusters;
    case Experiment::bo_fig5:
      return PlotKind::regret;
    default:
      return PlotKind::rmse;
  }
}

std::map<std::string, std::vector<CurvePoint>> aggregate_curves(const std::vector<ResultRow>& rows,
                                                               const std::string& metric) {
  std::map<std::string, std::map<std::int64_t, std::vector<double>>> groups;
  for (const auto& r : rows)
    if (r.metric == metric) groups[r.method][r.step].push_back(r.value);
  std::map<std::string, std::vector<CurvePoint>> out;
  for (const auto& [method, steps] : groups) {
    for (const auto& [step, vals] : steps) {
      CurvePoint p;
      p.step = step;
      p.n = vals.size();
      double s = 0.0;
      for (double v : vals) s += v;
      p.mean = s / static_cast<double>(p.n);
      if (p.n > 1) {
        double ss = 0.0;
        for (double v : vals) ss += (v - p.mean) * (v - p.mean);
        p.std_error = std::sqrt(ss / static_cast<double>(p.n - 1) / static_cast<double>(p.n));
      }
      out[method].push_back(p);
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string plot_curves(const std::vector<ResultRow>& rows, PlotKind kind,
                        const std::vector<std::string>& methods) {
  std::string metric, xlabel, ylabel, title;
  switch (kind) {
    case PlotKind::rmse:
      metric = "rmse", xlabel = "acquired tasks", ylabel = "RMSE", title = "Meta-test RMSE";
      break;
    case PlotKind::clusters:
      metric = "rmse_at_budget", xlabel = "clusters", ylabel = "RMSE", title = "RMSE vs clusters";
      break;
    case PlotKind::regret:
      metric = "regret", xlabel = "iterations", ylabel = "regret", title = "BO regret";
      break;
  }
  auto curves = aggregate_curves(rows, metric);
  if (!methods.empty()) {
    std::map<std::string, std::vector<CurvePoint>> kept;
    for (const auto& m : methods)
      if (auto it = curves.find(m); it != curves.end()) kept.insert(*it);
    curves = std::move(kept);
  }
  if (curves.empty())
    throw ConfigError("methods", "no rows with metric '" + metric + "' for the requested methods");

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [m, pts] : curves)
    for (const auto& p : pts) {
      x0 = std::min(x0, static_cast<double>(p.step));
      x1 = std::max(x1, static_cast<double>(p.step));
      y0 = std::min(y0, p.mean - p.std_error);
      y1 = std::max(y1, p.mean + p.std_error);
    }
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;

  const double w = 640, h = 420, left = 70, right = 170, top = 40, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
    << top + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    s << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 18)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << tick_label(xv) << "</text>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(yv) << "</text>\n";
  }
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(h - 16)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  s << "<text x=\"18\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 18 " << num(top + ph / 2) << ")\">" << ylabel << "</text>\n";

  std::size_t ci = 0;
  for (const auto& [method, pts] : curves) {
    const char* color = colors[ci % 8];
    s << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (const auto& p : pts) s << num(sx(p.step)) << "," << num(sy(p.mean + p.std_error)) << " ";
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      s << num(sx(it->step)) << "," << num(sy(it->mean - it->std_error)) << " ";
    s << "\"/>\n";
    s << "<polyline class=\"series\" data-method=\"" << method << "\" fill=\"none\" stroke=\""
      << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      s << (i ? " " : "") << num(sx(pts[i].step)) << "," << num(sy(pts[i].mean));
    s << "\"/>\n";
    const double ly = top + 14 + 20.0 * static_cast<double>(ci);
    s << "<rect x=\"" << num(left + pw + 14) << "\" y=\"" << num(ly - 8) << "\" width=\"14\" height=\"4\" fill=\""
      << color << "\"/>\n";
    s << "<text x=\"" << num(left + pw + 34) << "\" y=\"" << num(ly) << "\" font-size=\"12\">" << method
      << "</text>\n";
    ++ci;
  }
  s << "</svg>\n";
  return s.str();
}

fs::path plot_curves_file(const fs::path& csv, PlotKind kind, const fs::path& out_svg) {
  const auto rows = read_results_csv(csv);
  fs::path out = out_svg;
  if (out.empty()) {
    const char* names[] = {"rmse", "clusters", "regret"};
    out = csv.parent_path() / (std::string("plot_") + names[static_cast<int>(kind)] + ".svg");
  }
  write_text(out, plot_curves(rows, kind));
  return out;
}

}  // namespace bamld
