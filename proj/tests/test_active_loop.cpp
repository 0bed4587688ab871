#include "doctest.h"

#include <algorithm>
#include <set>

#include "bamld/active_loop.hpp"
#include "bamld/errors.hpp"
#include "oracles.hpp"

using namespace bamld;

namespace {

GpConfig tiny_gp() {
  GpConfig gp;
  gp.mean_spec = MlpSpec{1, {4}, 1};
  gp.feature_spec = MlpSpec{1, {4}, 2};
  return gp;
}

LoopConfig fast_loop() {
  LoopConfig cfg;
  cfg.particles = 2;
  cfg.svgd.n_steps = 8;
  cfg.acquisition.mc_samples = 16;
  return cfg;
}

TaskPool small_pool(std::size_t n, std::uint64_t seed) {
  SinusoidEnvConfig env = SinusoidEnvConfig::narrow();
  env.n_samples = 8;
  Rng rng(seed);
  return sample_sinusoid_pool(env, n, rng);
}

const AcquisitionMethod kMethods[] = {AcquisitionMethod::bamld, AcquisitionMethod::uncertainty,
                                      AcquisitionMethod::diversity, AcquisitionMethod::uniform};

}  // namespace

TEST_CASE("budget zero reveals nothing and keeps the prior draw") {
  const GpConfig gp = tiny_gp();
  const LoopConfig cfg = fast_loop();
  Rng rng(1);
  const auto state = run_active_loop(small_pool(4, 1), AcquisitionMethod::bamld, 0, gp, cfg, rng);
  CHECK(state.pool.labeled_count() == 0);
  CHECK(state.round == 0);
  CHECK(state.history.empty());

  Rng replay(1);
  Rng init_rng = make_rng(replay());
  CHECK(state.ensemble ==
        sample_initial_ensemble(gp, cfg.particles, cfg.score.prior_variance, cfg.init, init_rng));
}

TEST_CASE("uniform with budget equal to pool size labels a permutation") {
  Rng rng(2);
  const auto state =
      run_active_loop(small_pool(5, 2), AcquisitionMethod::uniform, 5, tiny_gp(), fast_loop(), rng);
  CHECK(state.pool.labeled_count() == 5);
  auto ids = state.selected_ids;
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("a single-task pool is selected by every method") {
  for (auto m : kMethods) {
    Rng rng(3);
    const auto state = run_active_loop(small_pool(1, 3), m, 1, tiny_gp(), fast_loop(), rng);
    CHECK(state.selected_ids == std::vector<int>{0});
  }
}

TEST_CASE("loop invariants hold for every method") {
  for (auto m : kMethods) {
    Rng rng(4);
    const auto state = run_active_loop(small_pool(6, 4), m, 4, tiny_gp(), fast_loop(), rng);
    CHECK(state.round == 4);
    CHECK(state.selected_ids.size() == 4);
    CHECK(std::set<int>(state.selected_ids.begin(), state.selected_ids.end()).size() == 4);
    auto labeled = state.pool.labeled_ids();
    auto sel = state.selected_ids;
    std::sort(sel.begin(), sel.end());
    CHECK(labeled == sel);
    REQUIRE(state.history.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(state.history[r].round == r + 1);
      CHECK(state.history[r].report.chosen == state.selected_ids[r]);
    }
    const auto data = state.selected_data();
    REQUIRE(data.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(data[i].task_id == state.selected_ids[i]);
  }
}

TEST_CASE("revealed labels do not depend on the method") {
  std::map<int, std::vector<double>> seen;
  for (auto m : kMethods) {
    Rng rng(5);
    const auto state = run_active_loop(small_pool(6, 5), m, 3, tiny_gp(), fast_loop(), rng);
    for (int id : state.selected_ids) {
      const auto y = *state.pool.labeled_dataset(id).y;
      if (seen.count(id)) CHECK(seen[id] == y);
      seen[id] = y;
    }
  }
}

TEST_CASE("run_active_loop is deterministic under a fixed seed") {
  Rng a(6), b(6);
  const auto sa = run_active_loop(small_pool(5, 6), AcquisitionMethod::bamld, 3, tiny_gp(), fast_loop(), a);
  const auto sb = run_active_loop(small_pool(5, 6), AcquisitionMethod::bamld, 3, tiny_gp(), fast_loop(), b);
  CHECK(sa.selected_ids == sb.selected_ids);
  CHECK(sa.ensemble == sb.ensemble);
}

TEST_CASE("budget above pool size is a config error") {
  Rng rng(7);
  CHECK_THROWS_AS(
      run_active_loop(small_pool(2, 7), AcquisitionMethod::uniform, 3, tiny_gp(), fast_loop(), rng),
      ConfigError);
}

TEST_CASE("the round callback sees every refit") {
  Rng rng(8);
  std::vector<std::size_t> rounds;
  const auto state = run_active_loop(small_pool(4, 8), AcquisitionMethod::diversity, 3, tiny_gp(),
                                     fast_loop(), rng, [&](const RunState& s, RoundRecord& rec) {
                                       CHECK(s.selected_ids.size() == rec.round);
                                       rec.rmse = static_cast<double>(rec.round);
                                       rounds.push_back(rec.round);
                                     });
  CHECK(rounds == std::vector<std::size_t>{1, 2, 3});
  for (const auto& rec : state.history) CHECK(*rec.rmse == static_cast<double>(rec.round));
}

TEST_CASE("refit step count defaults to a quarter of n_steps") {
  LoopConfig cfg;
  cfg.svgd.n_steps = 1500;
  CHECK(cfg.refit_step_count() == 375);
  cfg.refit_steps = 10;
  CHECK(cfg.refit_step_count() == 10);
}

TEST_CASE("rmse_of_predictor degenerate cases") {
  MetaTestSet tests;
  MetaTestSet::Task t;
  t.x_adapt = Matrix{{0.0}};
  t.y_adapt = {0.0};
  t.x_eval = Matrix{{1.0}, {2.0}, {3.0}};
  t.y_eval = {2.0, 2.0, 2.0};
  tests.tasks = {t, t};
  const auto exact = rmse_of_predictor(tests, [&](const Matrix&, std::span<const double>, const Matrix& xq) {
    return std::vector<double>(xq.rows(), 2.0);
  });
  CHECK(exact.rmse == 0.0);
  const auto zero = rmse_of_predictor(tests, [&](const Matrix&, std::span<const double>, const Matrix& xq) {
    return std::vector<double>(xq.rows(), 0.0);
  });
  CHECK(zero.rmse == doctest::Approx(2.0));
  CHECK(zero.per_task == std::vector<double>{2.0, 2.0});
}

TEST_CASE("single-particle meta-test RMSE matches dense conditioning") {
  const GpConfig gp = tiny_gp();
  Rng rng(9);
  ParticleEnsemble ens;
  ens.gp = gp;
  ens.particles.push_back(oracle::random_vector(gp.param_count(), rng));
  MetaTestSet tests;
  MetaTestSet::Task t;
  t.x_adapt = Matrix{{-1.0}, {0.5}, {2.0}};
  t.y_adapt = {0.3, -0.7, 1.1};
  t.x_eval = Matrix{{0.0}, {1.0}};
  t.y_eval = {0.2, -0.4};
  tests.tasks = {t};

  const auto& th = ens.particles[0];
  auto mean_at = [&](const Matrix& x) {
    std::vector<double> m(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      m[i] = oracle::mlp_scalar(gp.mean_spec, gp.mean_params(th), x.row(i))[0];
    return m;
  };
  Matrix k = kernel_matrix(th, t.x_adapt, t.x_adapt, gp);
  for (std::size_t i = 0; i < 3; ++i) k(i, i) += gp.noise_variance;
  const Matrix kinv = oracle::dense_inverse(k).inverse;
  const Matrix ks = kernel_matrix(th, t.x_adapt, t.x_eval, gp);
  const auto ma = mean_at(t.x_adapt);
  const auto me = mean_at(t.x_eval);
  double se = 0.0;
  for (std::size_t q = 0; q < 2; ++q) {
    double pred = me[q];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) pred += ks(i, q) * kinv(i, j) * (t.y_adapt[j] - ma[j]);
    se += (pred - t.y_eval[q]) * (pred - t.y_eval[q]);
  }
  CHECK(std::abs(meta_test_rmse(ens, tests).rmse - std::sqrt(se / 2.0)) < 1e-8);
}

TEST_CASE("meta-test sets are shared and reproducible") {
  MetaTestConfig cfg;
  cfg.n_test_tasks = 3;
  cfg.seed = 42;
  const EnvConfig env = SinusoidEnvConfig::narrow();
  const auto a = make_meta_test_set(env, cfg);
  const auto b = make_meta_test_set(env, cfg);
  REQUIRE(a.tasks.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.tasks[i].x_adapt == b.tasks[i].x_adapt);
    CHECK(a.tasks[i].y_eval == b.tasks[i].y_eval);
    CHECK(a.tasks[i].x_adapt.rows() == 5);
    CHECK(a.tasks[i].x_eval.rows() == 35);
    for (std::size_t q = 0; q < 35; ++q)
      CHECK(a.tasks[i].y_eval[q] == eval_task_mean(a.tasks[i].params, a.tasks[i].x_eval(q, 0)));
  }
  cfg.n_eval = 36;
  CHECK_THROWS_AS(make_meta_test_set(env, cfg), ConfigError);
}

TEST_CASE("rmse_curve has one point per round and is reproducible") {
  MetaTestConfig mt;
  mt.n_test_tasks = 2;
  SinusoidEnvConfig env = SinusoidEnvConfig::narrow();
  env.n_samples = 8;
  mt.n_adapt = 3;
  mt.n_eval = 5;
  const auto tests = make_meta_test_set(env, mt);
  Rng a(10), b(10);
  const auto ca = rmse_curve(small_pool(4, 10), AcquisitionMethod::uniform, 3, tiny_gp(), fast_loop(), tests, a);
  const auto cb = rmse_curve(small_pool(4, 10), AcquisitionMethod::uniform, 3, tiny_gp(), fast_loop(), tests, b);
  REQUIRE(ca.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ca[i].first == i + 1);
  CHECK(ca == cb);
}
