#pragma once

#include <filesystem>
#include <utility>
#include <variant>
#include <vector>

#include "bamld/gp.hpp"
#include "bamld/rng.hpp"
#include "json.hpp"

namespace bamld {

/// uniform(lo, hi) or normal(mean, variance); normal takes a variance, not a std-dev.
struct Distribution {
  enum class Kind { uniform, normal, point };
  Kind kind = Kind::point;
  double p1 = 0.0;
  double p2 = 0.0;

  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Distribution normal(double mean, double variance) { return {Kind::normal, mean, variance}; }
  static Distribution point(double value) { return {Kind::point, value, 0.0}; }

  void validate(const char* field) const;
  double sample(Rng& rng) const;
};

struct SinusoidTaskParams {
  double a = 1.0, b = 0.0, c = 0.0, alpha = 0.0;
};

/// α·x + a·sin(1.5·(x − b)) + c
double eval_sinusoid(const SinusoidTaskParams& p, double x);

struct SinusoidEnvConfig {
  Distribution a_dist = Distribution::uniform(0.9, 1.1);
  Distribution b_dist = Distribution::normal(0.0, 0.06);
  Distribution c_dist = Distribution::normal(5.0, 0.06);
  Distribution alpha_dist = Distribution::normal(0.5, 0.11);
  double x_lo = -5.0;
  double x_hi = 5.0;
  double noise_var = 0.12;
  std::size_t n_samples = 40;

  /// Narrow task distribution of the first regression experiment.
  static SinusoidEnvConfig narrow();
  /// Wider task distribution of the second regression experiment.
  static SinusoidEnvConfig wide();
  void validate() const;
};

struct BoTaskParams {
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  double alpha1 = -2.0, alpha2 = 3.0, alpha3 = -8.0;
};

/// 2·w1·p1(x) + 1.5·w2·p2(x) + 1.8·w3·p3(x) + 1 with Cauchy p1, p3 and Gaussian p2.
double eval_g_bo(const BoTaskParams& p, double x);

struct BoEnvConfig {
  Distribution w_dist = Distribution::uniform(0.6, 1.4);
  Distribution alpha1_dist = Distribution::normal(-2.0, 0.09);
  Distribution alpha2_dist = Distribution::normal(3.0, 0.09);
  Distribution alpha3_dist = Distribution::normal(-8.0, 0.09);
  double x_lo = -10.0;
  double x_hi = 10.0;
  double noise_var = 0.01;
  std::size_t n_samples = 40;

  void validate() const;
};

/// Heterogeneous sinusoid environment: cluster j ∈ {0..C−1} draws its amplitude
/// from cluster_amplitude_range(j); b, c, α come from base.
struct ClusterEnvConfig {
  std::size_t n_clusters = 1;
  SinusoidEnvConfig base = SinusoidEnvConfig::narrow();
  std::size_t pool_size = 20;

  void validate() const;
};

/// [1.1 + j(0.1 + (j−1)0.05), 1.1 + (j+1)(0.1 + j·0.05)]
std::pair<double, double> cluster_amplitude_range(std::size_t j);

using TaskParams = std::variant<SinusoidTaskParams, BoTaskParams>;
using EnvConfig = std::variant<SinusoidEnvConfig, ClusterEnvConfig, BoEnvConfig>;

double eval_task_mean(const TaskParams& params, double x);

struct PoolTask {
  TaskParams params;
  Matrix x;                    // n_samples × 1
  std::vector<double> hidden;  // labels drawn at creation, revealed by the oracle
  bool labeled = false;
};

/// Task pool with a draw-once labeling oracle. Task ids are pool indices.
class TaskPool {
 public:
  TaskPool() = default;
  explicit TaskPool(std::vector<PoolTask> tasks) : tasks_(std::move(tasks)) {}

  std::size_t size() const noexcept { return tasks_.size(); }
  const PoolTask& task(int id) const;
  const std::vector<PoolTask>& tasks() const noexcept { return tasks_; }

  /// Reveals the labels of an unlabeled task. LookupError for unknown ids,
  /// StateError when the task was already labeled.
  std::vector<double> oracle_label(int id);

  bool is_labeled(int id) const { return task(id).labeled; }
  std::size_t labeled_count() const noexcept;
  std::vector<int> labeled_ids() const;
  std::vector<int> unlabeled_ids() const;

  /// Covariates without labels.
  TaskDataset unlabeled_dataset(int id) const;
  /// Covariates and labels; StateError if not yet labeled.
  TaskDataset labeled_dataset(int id) const;
  /// Covariates with hidden labels, bypassing the oracle (meta-test and audits).
  TaskDataset full_dataset(int id) const;

  nlohmann::json to_json() const;
  static TaskPool from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TaskPool load(const std::filesystem::path& path);

 private:
  std::vector<PoolTask> tasks_;
};

TaskPool sample_sinusoid_pool(const SinusoidEnvConfig& cfg, std::size_t pool_size, Rng& rng);
TaskPool sample_bo_pool(const BoEnvConfig& cfg, std::size_t pool_size, Rng& rng);
/// BO pool with the default task distribution and n_samples points per task.
TaskPool sample_bo_pool(std::size_t pool_size, std::size_t n_samples, Rng& rng);
TaskPool sample_cluster_pool(const ClusterEnvConfig& cfg, Rng& rng);
/// Dispatch on the environment kind; cluster environments assign task i to
/// cluster i·C/pool_size when C divides pool_size, else i mod C.
TaskPool sample_pool(const EnvConfig& env, std::size_t pool_size, Rng& rng);

}  // namespace bamld
