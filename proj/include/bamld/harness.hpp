#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bamld/active_loop.hpp"
#include "bamld/bayes_opt.hpp"
#include "json.hpp"

namespace bamld {

enum class Experiment { rmse_fig2, rmse_fig3, clusters_fig4, bo_fig5, property_suite };

std::string to_string(Experiment e);
/// Throws ConfigError("experiment", ...) for unknown names.
Experiment experiment_from_string(const std::string& name);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "BAMLD_OUT_DIR";

/// Every knob of one run. Keys in the JSON form are flat and match the field
/// names; a profile supplies the defaults.
struct ExperimentConfig {
  Experiment experiment = Experiment::rmse_fig2;
  std::string profile = "desk";
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t pool_size = 20;
  std::size_t samples_per_task = 40;
  std::size_t budget = 12;
  std::vector<std::string> methods;  // empty: every method the experiment supports

  std::vector<std::size_t> net_hidden{16, 16};
  std::size_t feature_dim = 2;
  double noise_variance = 0.12;
  double prior_variance = 1.0;
  double gamma = 100.0;
  std::size_t particles = 5;
  std::string particle_init = "prior";
  std::size_t svgd_steps = 1500;
  double svgd_step_size = 3e-3;
  std::string svgd_optimizer = "adam";
  std::size_t refit_steps = 0;
  std::size_t task_minibatch = 2;
  bool warm_start = true;

  std::size_t mc_samples = 256;
  std::optional<std::size_t> subset_size;

  std::size_t n_test_tasks = 20;
  std::size_t n_adapt = 5;
  std::size_t n_eval = 35;

  std::vector<std::size_t> clusters{1, 2, 4};

  std::size_t bo_iterations = 20;
  std::size_t bo_candidate_grid = 200;
  double ucb_beta = 2.0;
  std::size_t bo_update_steps = 100;
  double bo_noise_var = 0.01;
  std::size_t bo_test_tasks = 3;
  double vanilla_signal_variance = 1.0;
  double vanilla_lengthscale = 1.0;

  std::filesystem::path output_dir = "results";
  std::size_t workers = 1;

  /// Defaults of a named profile ("desk" or "paper").
  static ExperimentConfig for_profile(const std::string& profile);

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Methods actually run: `methods`, or the experiment's full list.
  std::vector<std::string> resolved_methods() const;

  GpConfig gp_config() const;
  LoopConfig loop_config() const;
  BoRunConfig bo_config() const;
  MetaTestConfig meta_test_config(std::uint64_t seed) const;

  nlohmann::json to_json() const;
};

/// Applies the flat keys of j on top of base. Unknown keys and wrongly typed
/// values throw ConfigError.
ExperimentConfig apply_config_json(ExperimentConfig base, const nlohmann::json& j);

/// Reads a config file; its "profile" key (or profile_override) selects the
/// defaults the remaining keys are applied to.
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::optional<std::string>& profile_override = {});

/// Methods an experiment accepts.
std::vector<std::string> supported_methods(Experiment e);

struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string method;
  std::int64_t step = 0;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Lexicographic by (experiment, seed, method, step, metric, value).
bool canonical_less(const ResultRow& a, const ResultRow& b);

inline constexpr const char* kCsvHeader = "experiment,seed,method,step,metric,value";

std::string format_results_csv(std::vector<ResultRow> rows);
void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
/// Throws ParseError with the 1-based line number of the first bad line.
std::vector<ResultRow> parse_results_csv(const std::string& text);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

struct RunSummary {
  std::vector<ResultRow> rows;
  std::filesystem::path results_csv;
  std::filesystem::path plot_svg;
  bool all_passed = true;  // property_suite only
};

/// Runs every seed × method job, then writes results.csv, config_resolved.json,
/// per-job history JSON and the figure's SVG into cfg.output_dir.
RunSummary run_experiment(const ExperimentConfig& cfg);

enum class PlotKind { rmse, clusters, regret };

/// Accepts fig2/fig3/rmse, fig4/clusters, fig5/regret.
PlotKind plot_kind_from_string(const std::string& name);
PlotKind plot_kind_for(Experiment e);

/// Mean across seeds with a ±1 standard-error band, one polyline per method.
/// Throws ConfigError when no rows carry the figure's metric.
std::string plot_curves(const std::vector<ResultRow>& rows, PlotKind kind,
                        const std::vector<std::string>& methods = {});
std::filesystem::path plot_curves_file(const std::filesystem::path& csv, PlotKind kind,
                                       const std::filesystem::path& out_svg = {});

/// Per (method, step) mean and standard error across seeds of one metric.
struct CurvePoint {
  std::int64_t step = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};
std::map<std::string, std::vector<CurvePoint>> aggregate_curves(const std::vector<ResultRow>& rows,
                                                               const std::string& metric);

}  // namespace bamld
