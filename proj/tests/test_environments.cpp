#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "bamld/environments.hpp"
#include "bamld/errors.hpp"

using namespace bamld;

namespace {

SinusoidEnvConfig point_config(double a, double b, double c, double alpha, double noise) {
  SinusoidEnvConfig cfg;
  cfg.a_dist = Distribution::point(a);
  cfg.b_dist = Distribution::point(b);
  cfg.c_dist = Distribution::point(c);
  cfg.alpha_dist = Distribution::point(alpha);
  cfg.noise_var = noise;
  return cfg;
}

}  // namespace

TEST_CASE("point-mass sinusoid pool has sin(1.5x) as every hidden mean") {
  Rng rng(1);
  const auto pool = sample_sinusoid_pool(point_config(1, 0, 0, 0, 0.0), 3, rng);
  for (const auto& t : pool.tasks())
    for (std::size_t i = 0; i < t.x.rows(); ++i) CHECK(t.hidden[i] == std::sin(1.5 * t.x(i, 0)));
}

TEST_CASE("noiseless linear pool labels equal x exactly") {
  Rng rng(2);
  auto pool = sample_sinusoid_pool(point_config(0, 0, 0, 1, 0.0), 2, rng);
  const auto y = pool.oracle_label(1);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == pool.task(1).x(i, 0));
}

TEST_CASE("eval_sinusoid formula") {
  const SinusoidTaskParams p{2.0, 0.5, 3.0, -0.25};
  const double x = 1.7;
  CHECK(eval_sinusoid(p, x) == -0.25 * x + 2.0 * std::sin(1.5 * (x - 0.5)) + 3.0);
}

TEST_CASE("sinusoid pools are deterministic and stay in range") {
  Rng a(3), b(3);
  const auto pa = sample_sinusoid_pool(SinusoidEnvConfig::wide(), 5, a);
  const auto pb = sample_sinusoid_pool(SinusoidEnvConfig::wide(), 5, b);
  CHECK(pa.to_json() == pb.to_json());
  for (const auto& t : pa.tasks()) {
    CHECK(t.x.rows() == 40);
    for (double v : t.x.data()) {
      CHECK(v >= -5.0);
      CHECK(v <= 5.0);
    }
  }
}

TEST_CASE("narrow environment parameter moments") {
  Rng rng(4);
  const auto pool = sample_sinusoid_pool(SinusoidEnvConfig::narrow(), 4000, rng);
  double sa = 0, sc = 0, sc2 = 0, salpha = 0, salpha2 = 0;
  for (const auto& t : pool.tasks()) {
    const auto& p = std::get<SinusoidTaskParams>(t.params);
    CHECK(p.a >= 0.9);
    CHECK(p.a <= 1.1);
    sa += p.a;
    sc += p.c;
    sc2 += p.c * p.c;
    salpha += p.alpha;
    salpha2 += p.alpha * p.alpha;
  }
  const double n = 4000.0;
  CHECK(sa / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(sc / n == doctest::Approx(5.0).epsilon(0.01));
  CHECK(sc2 / n - (sc / n) * (sc / n) == doctest::Approx(0.06).epsilon(0.1));
  CHECK(salpha2 / n - (salpha / n) * (salpha / n) == doctest::Approx(0.11).epsilon(0.1));
}

TEST_CASE("oracle labeling is draw-once") {
  Rng rng(5);
  auto pool = sample_sinusoid_pool(SinusoidEnvConfig::narrow(), 4, rng);
  CHECK(pool.labeled_count() == 0);
  const auto y = pool.oracle_label(2);
  CHECK(pool.labeled_count() == 1);
  CHECK(y == pool.task(2).hidden);
  CHECK(pool.is_labeled(2));
  CHECK(pool.labeled_ids() == std::vector<int>{2});
  CHECK(pool.unlabeled_ids() == std::vector<int>{0, 1, 3});
  CHECK_THROWS_AS(pool.oracle_label(2), StateError);
  CHECK_THROWS_AS(pool.oracle_label(4), LookupError);
  CHECK_THROWS_AS(pool.oracle_label(-1), LookupError);
  CHECK_THROWS_AS(pool.labeled_dataset(0), StateError);
  CHECK(*pool.labeled_dataset(2).y == y);
  CHECK(!pool.unlabeled_dataset(0).labeled());
  CHECK(*pool.full_dataset(0).y == pool.task(0).hidden);

  Rng again(5);
  auto twin = sample_sinusoid_pool(SinusoidEnvConfig::narrow(), 4, again);
  for (int id = 0; id < 4; ++id) CHECK(twin.oracle_label(id) == pool.task(id).hidden);
}

TEST_CASE("pool JSON round trip") {
  Rng rng(6);
  auto pool = sample_bo_pool(3, 10, rng);
  pool.oracle_label(1);
  const auto back = TaskPool::from_json(pool.to_json());
  CHECK(back.to_json() == pool.to_json());
  CHECK(back.is_labeled(1));
  const auto path = std::filesystem::temp_directory_path() / "bamld_pool_test.json";
  pool.save(path);
  CHECK(TaskPool::load(path).to_json() == pool.to_json());
  std::filesystem::remove(path);
}

TEST_CASE("eval_g_bo at alpha1 with far-away other modes") {
  const BoTaskParams p{1, 1, 1, 0.0, 1e6, -1e6};
  CHECK(eval_g_bo(p, 0.0) == doctest::Approx(2.0 / std::numbers::pi + 1.0).epsilon(1e-9));
  CHECK(eval_g_bo(p, 0.0) == doctest::Approx(1.6366).epsilon(1e-4));
}

TEST_CASE("eval_g_bo with zero weights is constant one") {
  const BoTaskParams p{0, 0, 0, -2, 3, -8};
  for (double x = -10; x <= 10; x += 0.37) CHECK(eval_g_bo(p, x) == 1.0);
}

TEST_CASE("the Gaussian bump is symmetric about alpha2") {
  const BoTaskParams p{0, 1, 0, -2, 3, -8};
  for (double h : {0.1, 1.0, 2.5, 7.0}) CHECK(eval_g_bo(p, 3 + h) == doctest::Approx(eval_g_bo(p, 3 - h)).epsilon(1e-14));
}

TEST_CASE("eval_g_bo stays under the sum of density maxima") {
  Rng rng(7);
  const double pi = std::numbers::pi;
  for (int trial = 0; trial < 20; ++trial) {
    const BoTaskParams p{uniform(rng, 0.6, 1.4), uniform(rng, 0.6, 1.4), uniform(rng, 0.6, 1.4),
                         -2 + 0.3 * standard_normal(rng), 3 + 0.3 * standard_normal(rng),
                         -8 + 0.3 * standard_normal(rng)};
    const double bound = 1 + 2 / pi * p.w1 + 1.5 / (2 * pi) * p.w2 + 1.8 / pi * p.w3;
    double prev = eval_g_bo(p, -10.0);
    for (int i = 1; i <= 20000; ++i) {
      const double x = -10.0 + 20.0 * i / 20000.0;
      const double g = eval_g_bo(p, x);
      CHECK(g <= bound);
      CHECK(std::abs(g - prev) < 0.01);
      prev = g;
    }
  }
}

TEST_CASE("noiseless BO pool labels equal g") {
  BoEnvConfig cfg;
  cfg.noise_var = 0.0;
  Rng rng(8);
  const auto pool = sample_bo_pool(cfg, 3, rng);
  for (const auto& t : pool.tasks()) {
    for (std::size_t i = 0; i < t.x.rows(); ++i) {
      CHECK(t.hidden[i] == eval_task_mean(t.params, t.x(i, 0)));
      CHECK(t.x(i, 0) >= -10.0);
      CHECK(t.x(i, 0) <= 10.0);
    }
  }
}

TEST_CASE("cluster amplitude intervals") {
  CHECK(cluster_amplitude_range(0).first == doctest::Approx(1.1));
  CHECK(cluster_amplitude_range(0).second == doctest::Approx(1.2));
  CHECK(cluster_amplitude_range(1).first == doctest::Approx(1.2));
  CHECK(cluster_amplitude_range(1).second == doctest::Approx(1.4));
}

TEST_CASE("cluster pools assign contiguous blocks of tasks to clusters") {
  ClusterEnvConfig cfg;
  cfg.n_clusters = 4;
  cfg.pool_size = 20;
  Rng rng(9);
  const auto pool = sample_cluster_pool(cfg, rng);
  CHECK(pool.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto [lo, hi] = cluster_amplitude_range(i * 4 / 20);
    const double a = std::get<SinusoidTaskParams>(pool.tasks()[i].params).a;
    CHECK(a >= lo);
    CHECK(a <= hi);
  }
  ClusterEnvConfig one;
  one.n_clusters = 1;
  Rng rng1(10);
  const auto homogeneous = sample_cluster_pool(one, rng1);
  for (const auto& t : homogeneous.tasks()) {
    const double a = std::get<SinusoidTaskParams>(t.params).a;
    CHECK(a >= 1.1);
    CHECK(a <= 1.2);
  }
  ClusterEnvConfig bad;
  bad.n_clusters = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("environment config validation") {
  SinusoidEnvConfig s;
  s.n_samples = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SinusoidEnvConfig{};
  s.a_dist = Distribution::uniform(2.0, 1.0);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SinusoidEnvConfig{};
  s.b_dist = Distribution::normal(0.0, -1.0);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  BoEnvConfig b;
  b.x_lo = 5.0;
  b.x_hi = -5.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
}
