#include "doctest.h"

#include <cmath>

#include "bamld/errors.hpp"
#include "bamld/matrix.hpp"
#include "bamld/mlp.hpp"
#include "oracles.hpp"

using namespace bamld;

TEST_CASE("mlp_forward: zero weights give zero output") {
  const MlpSpec spec{1, {4, 4}, 2};
  const auto p = FlatParams::zeros(spec);
  const Matrix x{{-3.0}, {0.5}, {7.0}};
  const Matrix y = mlp_forward(p, x);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 2);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("mlp_forward: unit-weight 1-1-1 net at x=0") {
  const MlpSpec spec{1, {1}, 1};
  const std::vector<double> p{1.0, 0.0, 1.0, 0.0};
  CHECK(mlp_forward(spec, p, Matrix{{0.0}})(0, 0) == 0.0);
}

TEST_CASE("mlp_forward matches a scalar reference evaluator") {
  Rng rng(11);
  const MlpSpec spec{2, {5, 3}, 2};
  const auto p = oracle::random_vector(spec.param_count(), rng);
  Matrix x(3, 2);
  for (double& v : x.data()) v = standard_normal(rng);
  const Matrix y = mlp_forward(spec, p, x);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto ref = oracle::mlp_scalar(spec, p, x.row(r));
    for (std::size_t c = 0; c < 2; ++c) CHECK(y(r, c) == doctest::Approx(ref[c]).epsilon(1e-14));
  }
}

TEST_CASE("mlp_forward is batch consistent") {
  Rng rng(12);
  const MlpSpec spec{1, {8, 8}, 3};
  const auto p = oracle::random_vector(spec.param_count(), rng);
  Matrix x(6, 1);
  for (double& v : x.data()) v = 3.0 * standard_normal(rng);
  const Matrix batch = mlp_forward(spec, p, x);
  for (std::size_t r = 0; r < 6; ++r) {
    const Matrix one = mlp_forward(spec, p, Matrix{{x(r, 0)}});
    for (std::size_t c = 0; c < 3; ++c) CHECK(batch(r, c) == one(0, c));
  }
}

TEST_CASE("mlp_forward rejects a wrong input width or parameter length") {
  const MlpSpec spec{1, {2}, 1};
  const auto p = FlatParams::zeros(spec);
  CHECK_THROWS_AS(mlp_forward(spec, p.values, Matrix(2, 3)), ShapeError);
  const std::vector<double> short_params(3, 0.0);
  CHECK_THROWS_AS(mlp_forward(spec, short_params, Matrix(2, 1)), ShapeError);
}

TEST_CASE("mlp_backward: zero upstream gives zero gradient") {
  Rng rng(13);
  const MlpSpec spec{1, {4, 4}, 2};
  const auto p = oracle::random_vector(spec.param_count(), rng);
  const Matrix x{{0.3}, {-1.0}};
  const auto g = mlp_backward(spec, p, x, Matrix(2, 2, 0.0));
  CHECK(g.size() == spec.param_count());
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("mlp_backward: 1-1-1 net against the hand-derived chain rule") {
  const MlpSpec spec{1, {1}, 1};
  const double w1 = 0.7, b1 = -0.2, w2 = 1.3, b2 = 0.4, x = 0.9, u = 2.5;
  const std::vector<double> p{w1, b1, w2, b2};
  const auto g = mlp_backward(spec, p, Matrix{{x}}, Matrix{{u}});
  const double t = std::tanh(w1 * x + b1);
  CHECK(g[0] == doctest::Approx(u * w2 * (1 - t * t) * x).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(u * w2 * (1 - t * t)).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(u * t).epsilon(1e-14));
  CHECK(g[3] == doctest::Approx(u).epsilon(1e-14));
}

TEST_CASE("mlp_backward matches central differences on (4,4) nets over 20 seeds") {
  const MlpSpec spec{1, {4, 4}, 2};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "mlp-fd"));
    const auto p = oracle::random_vector(spec.param_count(), rng);
    Matrix x(3, 1);
    for (double& v : x.data()) v = 2.0 * standard_normal(rng);
    Matrix up(3, 2);
    for (double& v : up.data()) v = standard_normal(rng);
    const auto g = mlp_backward(spec, p, x, up);
    auto f = [&](std::span<const double> q) {
      const Matrix y = mlp_forward(spec, q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * up.data()[i];
      return s;
    };
    for (std::size_t i = 0; i < p.size(); ++i)
      worst = std::max(worst, oracle::rel_error(g[i], oracle::central_diff(f, p, i, 1e-5)));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("FlatParams::initialize uses fan-in scaling and zero biases") {
  Rng rng(14);
  const MlpSpec spec{1, {400}, 1};
  const auto p = FlatParams::initialize(spec, rng);
  CHECK(p.values.size() == spec.param_count());
  // first layer: 400 weights with variance 1/1, then 400 zero biases
  double ss = 0.0;
  for (std::size_t i = 0; i < 400; ++i) ss += p.values[i] * p.values[i];
  CHECK(ss / 400.0 == doctest::Approx(1.0).epsilon(0.25));
  for (std::size_t i = 400; i < 800; ++i) CHECK(p.values[i] == 0.0);
}

TEST_CASE("MlpSpec validation") {
  CHECK_THROWS_AS((MlpSpec{0, {4}, 1}.validate()), ShapeError);
  CHECK_THROWS_AS((MlpSpec{1, {}, 1}.validate()), ShapeError);
  CHECK_THROWS_AS((MlpSpec{1, {4, 0}, 1}.validate()), ShapeError);
  CHECK(MlpSpec{1, {32, 32}, 1}.param_count() == 32 + 32 + 32 * 32 + 32 + 32 + 1);
}

TEST_CASE("cholesky of the identity is the identity") {
  CHECK(cholesky(Matrix::identity(3)) == Matrix::identity(3));
}

TEST_CASE("cholesky of [[4,2],[2,3]]") {
  const Matrix l = cholesky(Matrix{{4, 2}, {2, 3}});
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Matrix a = oracle::random_spd(10, rng);
    const Matrix l = cholesky(a);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = i + 1; j < 10; ++j) CHECK(l(i, j) == 0.0);
    CHECK(frobenius_norm(matmul_transposed(l, l) - a) / frobenius_norm(a) < 1e-10);
  }
}

TEST_CASE("cholesky_jittered recovers a singular PSD matrix and reports the jitter") {
  const Matrix a{{1, 1}, {1, 1}};
  const auto r = cholesky_jittered(a);
  CHECK(r.jitter > 0.0);
  CHECK(frobenius_norm(matmul_transposed(r.lower, r.lower) - a) < 1e-5);
}

TEST_CASE("cholesky of an indefinite matrix throws with the last jitter") {
  const Matrix a{{1, 0}, {0, -1}};
  try {
    (void)cholesky(a);
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    CHECK(e.attempted_jitter() > 0.0);
  }
}

TEST_CASE("cholesky rejects non-square input") {
  CHECK_THROWS_AS(cholesky(Matrix(2, 3)), ShapeError);
}

TEST_CASE("solve_cholesky: identity factor returns b") {
  const std::vector<double> b{1.5, -2.0, 3.25};
  const auto x = solve_cholesky(Matrix::identity(3), std::span<const double>(b));
  CHECK(x == b);
}

TEST_CASE("solve_cholesky: 2x2 hand solve") {
  const Matrix l = cholesky(Matrix{{4, 2}, {2, 3}});
  const std::vector<double> b{1.0, 0.0};
  const auto x = solve_cholesky(l, std::span<const double>(b));
  CHECK(x[0] == doctest::Approx(3.0 / 8.0));
  CHECK(x[1] == doctest::Approx(-0.25));
}

TEST_CASE("solve_cholesky: residual on random SPD systems") {
  Rng rng(21);
  const Matrix a = oracle::random_spd(12, rng);
  const auto b = oracle::random_vector(12, rng);
  const auto x = solve_cholesky(cholesky(a), std::span<const double>(b));
  for (std::size_t i = 0; i < 12; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 12; ++j) s += a(i, j) * x[j];
    CHECK(s == doctest::Approx(b[i]).epsilon(1e-10));
  }
  const Matrix inv = cholesky_inverse(cholesky(a));
  const auto ref = oracle::dense_inverse(a).inverse;
  CHECK(frobenius_norm(inv - ref) / frobenius_norm(ref) < 1e-10);
}

TEST_CASE("solve_cholesky rejects mismatched right-hand sides") {
  const std::vector<double> b{1.0, 2.0};
  CHECK_THROWS_AS(solve_cholesky(Matrix::identity(3), std::span<const double>(b)), ShapeError);
}

TEST_CASE("half_log_det matches the elimination determinant") {
  Rng rng(22);
  const Matrix a = oracle::random_spd(7, rng);
  CHECK(2.0 * half_log_det(cholesky(a)) ==
        doctest::Approx(oracle::dense_inverse(a).log_abs_det).epsilon(1e-12));
}

TEST_CASE("matrix arithmetic shape checks") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2) + Matrix(3, 2), ShapeError);
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0, 1}, {1, 0}};
  CHECK(matmul(a, b) == Matrix{{2, 1}, {4, 3}});
  CHECK(matmul_transposed(a, a) == matmul(a, a.transpose()));
}
