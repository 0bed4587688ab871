#include "doctest.h"

#include <cmath>
#include <numbers>

#include "bamld/acquisition.hpp"
#include "bamld/errors.hpp"
#include "oracles.hpp"

using namespace bamld;

namespace {

GpConfig tiny_gp(double noise = 0.5) {
  GpConfig gp;
  gp.noise_variance = noise;
  gp.mean_spec = MlpSpec{1, {3}, 1};
  gp.feature_spec = MlpSpec{1, {3}, 2};
  return gp;
}

/// Particles whose mean network is the constant `bias` and whose features are zero.
ParticleEnsemble constant_mean_ensemble(std::vector<double> biases, double noise = 0.5) {
  ParticleEnsemble ens;
  ens.gp = tiny_gp(noise);
  for (double b : biases) {
    Theta t(ens.gp.param_count(), 0.0);
    t[ens.gp.mean_param_count() - 1] = b;
    ens.particles.push_back(t);
  }
  return ens;
}

ParticleEnsemble random_ensemble(std::size_t p, Rng& rng) {
  ParticleEnsemble ens;
  ens.gp = tiny_gp(0.12);
  for (std::size_t i = 0; i < p; ++i)
    ens.particles.push_back(oracle::random_vector(ens.gp.param_count(), rng));
  return ens;
}

Matrix column(std::vector<double> v) {
  Matrix x(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) x(i, 0) = v[i];
  return x;
}

/// Entropy of a 1-d Gaussian mixture by trapezoid quadrature.
double mixture_entropy_quadrature(const std::vector<double>& means, double var) {
  const double lo = *std::min_element(means.begin(), means.end()) - 15.0;
  const double hi = *std::max_element(means.begin(), means.end()) + 15.0;
  const int n = 200000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    double p = 0.0;
    for (double m : means)
      p += std::exp(-0.5 * (x - m) * (x - m) / var) / std::sqrt(2.0 * std::numbers::pi * var);
    p /= static_cast<double>(means.size());
    const double f = p > 0.0 ? -p * std::log(p) : 0.0;
    acc += (i == 0 || i == n) ? 0.5 * f : f;
  }
  return acc * h;
}

}  // namespace

TEST_CASE("mixture_entropy of a single component equals the closed form") {
  Rng rng(1);
  const GpPredictive g = GpPredictive::from_moments({0.3, -1.0}, Matrix{{2.0, 0.5}, {0.5, 1.0}});
  const std::vector<GpPredictive> comps{g};
  const auto e = mixture_entropy(comps, 4096, rng);
  CHECK(std::abs(e.value - oracle::gaussian_entropy(g.cov)) < 4.0 * e.std_error + 1e-12);
}

TEST_CASE("mixture_entropy of N(0,1) and N(10,1) against quadrature") {
  const double ref = mixture_entropy_quadrature({0.0, 10.0}, 1.0);
  CHECK(ref == doctest::Approx(0.5 * (oracle::kLog2Pi + 1.0) + std::log(2.0)).epsilon(1e-6));
  Rng rng(2);
  const std::vector<GpPredictive> comps{GpPredictive::from_moments({0.0}, Matrix{{1.0}}),
                                        GpPredictive::from_moments({10.0}, Matrix{{1.0}})};
  const auto e = mixture_entropy(comps, 20000, rng);
  CHECK(e.std_error > 0.0);
  CHECK(std::abs(e.value - ref) < 4.0 * e.std_error);
}

TEST_CASE("mixture_entropy of overlapping components against quadrature") {
  const std::vector<double> means{-0.5, 0.2, 1.0};
  const double ref = mixture_entropy_quadrature(means, 0.8);
  Rng rng(3);
  std::vector<GpPredictive> comps;
  for (double m : means) comps.push_back(GpPredictive::from_moments({m}, Matrix{{0.8}}));
  const auto e = mixture_entropy(comps, 20000, rng);
  CHECK(std::abs(e.value - ref) < 4.0 * e.std_error);
}

TEST_CASE("bamld_score of two separated constant-mean particles is about log 2") {
  const auto ens = constant_mean_ensemble({0.0, 10.0});
  AcquisitionConfig cfg;
  cfg.mc_samples = 20000;
  Rng rng(4);
  const auto s = bamld_score(ens, column({0.7}), cfg, rng);
  CHECK(s.aleatoric == doctest::Approx(0.5 * (oracle::kLog2Pi + 1.0)).epsilon(1e-12));
  CHECK(std::abs(s.score - std::log(2.0)) < 4.0 * s.std_error + 1e-6);
}

TEST_CASE("aleatoric_term is the particle average of Gaussian entropies") {
  Rng rng(5);
  const auto ens = random_ensemble(3, rng);
  const Matrix x = column({-1.0, 0.4, 2.5});
  double ref = 0.0;
  for (const auto& p : ens.particles) {
    Matrix cov = kernel_matrix(p, x, x, ens.gp);
    for (std::size_t i = 0; i < 3; ++i) cov(i, i) += ens.gp.noise_variance;
    ref += oracle::gaussian_entropy(cov) / 3.0;
  }
  CHECK(aleatoric_term(ens, x) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("aleatoric_term is invariant to particle and row permutations") {
  Rng rng(6);
  auto ens = random_ensemble(4, rng);
  const double a = aleatoric_term(ens, column({-2.0, 0.0, 3.0, 1.0}));
  std::reverse(ens.particles.begin(), ens.particles.end());
  CHECK(aleatoric_term(ens, column({1.0, 3.0, -2.0, 0.0})) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("uncertainty minus aleatoric equals bamld under a shared stream") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto ens = random_ensemble(4, rng);
    const Matrix x = column({-3.0, -0.5, 1.5, 4.0});
    AcquisitionConfig cfg;
    cfg.mc_samples = 64;
    Rng r1(seed + 100), r2(seed + 100);
    const auto u = uncertainty_score(ens, x, cfg, r1);
    const auto b = bamld_score(ens, x, cfg, r2);
    CHECK(u.score - aleatoric_term(ens, x) == b.score);
  }
}

TEST_CASE("bamld_score is near zero for a single particle and duplicates") {
  Rng rng(7);
  auto ens = random_ensemble(1, rng);
  const Matrix x = column({-1.0, 0.0, 2.0});
  AcquisitionConfig cfg;
  cfg.mc_samples = 256;
  const auto one = bamld_score(ens, x, cfg, rng);
  CHECK(std::abs(one.score) <= 3.0 * one.std_error + 1e-12);
  ens.particles.push_back(ens.particles[0]);
  ens.particles.push_back(ens.particles[0]);
  const auto dup = bamld_score(ens, x, cfg, rng);
  CHECK(std::abs(dup.score) <= 3.0 * dup.std_error + 1e-12);
}

TEST_CASE("bamld_score is nonnegative up to Monte Carlo error") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto ens = random_ensemble(5, rng);
    AcquisitionConfig cfg;
    cfg.mc_samples = 128;
    const auto s = bamld_score(ens, column({-2.0, 0.5, 3.0}), cfg, rng);
    CHECK(s.score >= -3.0 * s.std_error);
  }
}

TEST_CASE("larger observation noise raises the uncertainty score") {
  const auto low = constant_mean_ensemble({0.0, 1.0}, 0.5);
  const auto high = constant_mean_ensemble({0.0, 1.0}, 2.0);
  AcquisitionConfig cfg;
  cfg.mc_samples = 4096;
  Rng r1(8), r2(9);
  const Matrix x = column({0.0, 1.0});
  const auto a = uncertainty_score(low, x, cfg, r1);
  const auto b = uncertainty_score(high, x, cfg, r2);
  CHECK(b.score - a.score > 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("diversity_scores on covariate means") {
  auto task = [](int id, double v) { return TaskDataset{column({v - 1.0, v + 1.0}), std::nullopt, id}; };
  const std::vector<TaskDataset> selected{task(0, 0.0)};
  const std::vector<TaskDataset> pool{task(1, 1.0), task(3, 3.0)};
  const auto s = diversity_scores(pool, selected);
  CHECK(s.at(1) == doctest::Approx(1.0));
  CHECK(s.at(3) == doctest::Approx(3.0));
  const auto same = diversity_scores(std::vector<TaskDataset>{task(5, 0.0)}, selected);
  CHECK(same.at(5) == 0.0);
  const auto none = diversity_scores(pool, std::vector<TaskDataset>{});
  CHECK(none.at(1) == none.at(3));

  Rng rng(10);
  const auto ens = constant_mean_ensemble({0.0});
  CHECK(select_task(pool, selected, ens, AcquisitionMethod::diversity, AcquisitionConfig{}, rng).chosen == 3);
}

TEST_CASE("argmax_lowest_id breaks ties toward the lowest id") {
  const std::map<int, double> scores{{4, 2.0}, {7, 5.0}, {9, 5.0}};
  CHECK(argmax_lowest_id(scores) == 7);
  std::map<int, double> shifted;
  for (const auto& [id, s] : scores) shifted[id] = s + 123.0;
  CHECK(argmax_lowest_id(shifted) == 7);
  CHECK_THROWS_AS(argmax_lowest_id({}), SelectionError);
}

TEST_CASE("select_task on edge-case pools") {
  const auto ens = constant_mean_ensemble({0.0, 1.0});
  const std::vector<TaskDataset> one{TaskDataset{column({0.5, 1.5}), std::nullopt, 11}};
  AcquisitionConfig cfg;
  cfg.mc_samples = 16;
  for (auto m : {AcquisitionMethod::bamld, AcquisitionMethod::uncertainty,
                 AcquisitionMethod::diversity, AcquisitionMethod::uniform}) {
    Rng rng(11);
    CHECK(select_task(one, {}, ens, m, cfg, rng).chosen == 11);
    CHECK_THROWS_AS(select_task({}, {}, ens, m, cfg, rng), SelectionError);
  }
}

TEST_CASE("identical particles reduce bamld selection to the tie-break") {
  // constant-mean particles give the same mixture for every task of equal size
  const auto ens = constant_mean_ensemble({2.0, 2.0, 2.0});
  std::vector<TaskDataset> pool;
  for (int id : {6, 2, 9}) pool.push_back(TaskDataset{column({0.0, 1.0}), std::nullopt, id});
  AcquisitionConfig cfg;
  cfg.mc_samples = 32;
  Rng rng(12);
  const auto report = select_task(pool, {}, ens, AcquisitionMethod::bamld, cfg, rng);
  for (const auto& [id, t] : report.terms) CHECK(std::abs(t.score) <= 3.0 * t.std_error + 1e-9);
}

TEST_CASE("select_task is deterministic under a fixed seed") {
  Rng ens_rng(13);
  const auto ens = random_ensemble(3, ens_rng);
  std::vector<TaskDataset> pool;
  for (int id = 0; id < 5; ++id)
    pool.push_back(TaskDataset{column({-4.0 + id, 0.5 * id, 2.0}), std::nullopt, id});
  AcquisitionConfig cfg;
  cfg.mc_samples = 64;
  Rng a(99), b(99);
  const auto ra = select_task(pool, {}, ens, AcquisitionMethod::bamld, cfg, a);
  const auto rb = select_task(pool, {}, ens, AcquisitionMethod::bamld, cfg, b);
  CHECK(ra.chosen == rb.chosen);
  CHECK(ra.scores == rb.scores);
  CHECK(ra.to_json() == rb.to_json());
}

TEST_CASE("candidate_inputs subset policy") {
  const TaskDataset t{column({0.0, 1.0, 2.0, 3.0, 4.0}), std::nullopt, 0};
  AcquisitionConfig cfg;
  Rng r1(1), r2(2);
  cfg.subset_size = 5;
  CHECK(candidate_inputs(t, cfg, r1) == candidate_inputs(t, cfg, r2));
  cfg.subset_size = 2;
  const Matrix sub = candidate_inputs(t, cfg, r1);
  CHECK(sub.rows() == 2);
  CHECK(sub(0, 0) < sub(1, 0));
}

TEST_CASE("acquisition method names round trip") {
  for (auto m : {AcquisitionMethod::bamld, AcquisitionMethod::uncertainty,
                 AcquisitionMethod::diversity, AcquisitionMethod::uniform})
    CHECK(acquisition_method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(acquisition_method_from_string("epig"), ConfigError);
  AcquisitionConfig cfg;
  cfg.mc_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
