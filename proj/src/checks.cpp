#include "bamld/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bamld/acquisition.hpp"
#include "bamld/active_loop.hpp"
#include "bamld/errors.hpp"
#include "bamld/hyper_posterior.hpp"

namespace bamld {

std::vector<double> jacobi_eigenvalues(Matrix a, double tol, int max_sweeps) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("jacobi_eigenvalues: matrix is not square");
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) off += a(i, j) * a(i, j);
        scale += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * scale) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Matrix gauss_jordan_inverse(Matrix a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("gauss_jordan_inverse: matrix is not square");
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) throw DecompositionError("gauss_jordan_inverse: singular matrix", 0.0);
    if (piv != col)
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(piv, c), a(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    const double d = a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= d;
      inv(col, c) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

Matrix random_spd(std::size_t n, Rng& rng, double ridge) {
  Matrix b(n, n);
  for (double& v : b.data()) v = standard_normal(rng);
  Matrix s = matmul_transposed(b, b);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += ridge * static_cast<double>(n);
  return s;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

GpConfig small_gp(std::size_t hidden) {
  GpConfig gp;
  gp.mean_spec = MlpSpec{1, {hidden, hidden}, 1};
  gp.feature_spec = MlpSpec{1, {hidden, hidden}, 2};
  return gp;
}

TaskDataset random_task(std::size_t n, Rng& rng, int id) {
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = uniform(rng, -5.0, 5.0);
    y[i] = std::sin(x(i, 0)) + 0.3 * standard_normal(rng);
  }
  return TaskDataset{x, y, id};
}

}  // namespace

CheckResult check_entropy_closed_form(std::uint64_t seed, std::size_t n_matrices) {
  CheckResult r{1, "gaussian_entropy vs eigenvalue oracle", true, ""};
  Rng rng = make_rng(derive_seed(seed, "check-entropy"));
  double worst = 0.0;
  for (std::size_t k = 0; k < n_matrices; ++k) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    const Matrix s = random_spd(n, rng);
    const auto pred = GpPredictive::from_moments(std::vector<double>(n, 0.0), s);
    double oracle = 0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi) + 1.0);
    for (double ev : jacobi_eigenvalues(s)) oracle += 0.5 * std::log(ev);
    worst = std::max(worst, std::abs(gaussian_entropy(pred) - oracle));
  }
  r.passed = worst < 1e-9;
  r.detail = "max |diff| " + fmt(worst) + " over " + std::to_string(n_matrices) + " matrices";
  return r;
}

CheckResult check_lml_gradient(std::uint64_t seed, std::size_t n_seeds) {
  CheckResult r{2, "log_marginal_likelihood_grad vs central differences", true, ""};
  const GpConfig gp = small_gp(4);
  double worst = 0.0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    Rng rng = make_rng(derive_seed(seed, {0xfdull, s}));
    const TaskDataset task = random_task(5, rng, 0);
    Theta theta(gp.param_count());
    for (double& v : theta) v = 0.5 * standard_normal(rng);
    const auto grad = log_marginal_likelihood_grad(theta, task, gp);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-3 * std::max(1.0, std::abs(theta[i]));
      auto at = [&](double offset) {
        Theta t = theta;
        t[i] += offset;
        return log_marginal_likelihood(t, task, gp);
      };
      const double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  r.passed = worst < 1e-4;
  r.detail = "max relative error " + fmt(worst) + " over " + std::to_string(n_seeds) + " seeds";
  return r;
}

CheckResult check_conditioning_oracle(std::uint64_t seed) {
  CheckResult r{3, "meta-test conditioning vs dense inverse", true, ""};
  const GpConfig gp = small_gp(8);
  Rng rng = make_rng(derive_seed(seed, "check-conditioning"));
  ParticleEnsemble ens = sample_initial_ensemble(gp, 3, 1.0, ParticleInit::prior, rng);

  MetaTestSet tests;
  for (int t = 0; t < 5; ++t) {
    MetaTestSet::Task task;
    task.params = SinusoidTaskParams{};
    task.x_adapt = Matrix(3, 1);
    task.x_eval = Matrix(4, 1);
    for (std::size_t i = 0; i < 3; ++i) {
      task.x_adapt(i, 0) = uniform(rng, -5.0, 5.0);
      task.y_adapt.push_back(2.0 * standard_normal(rng));
    }
    for (std::size_t i = 0; i < 4; ++i) {
      task.x_eval(i, 0) = uniform(rng, -5.0, 5.0);
      task.y_eval.push_back(standard_normal(rng));
    }
    tests.tasks.push_back(task);
  }

  double worst = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& task : tests.tasks) {
    std::vector<double> oracle(task.x_eval.rows(), 0.0);
    for (const auto& theta : ens.particles) {
      const Matrix mu_c = mlp_forward(gp.mean_spec, gp.mean_params(theta), task.x_adapt);
      const Matrix mu_q = mlp_forward(gp.mean_spec, gp.mean_params(theta), task.x_eval);
      const Matrix f_c = mlp_forward(gp.feature_spec, gp.feature_params(theta), task.x_adapt);
      const Matrix f_q = mlp_forward(gp.feature_spec, gp.feature_params(theta), task.x_eval);
      auto k = [](std::span<const double> a, std::span<const double> b) {
        double d = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
        return 0.5 * std::exp(-d);
      };
      Matrix kc(3, 3);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          kc(i, j) = k(f_c.row(i), f_c.row(j)) + (i == j ? gp.noise_variance : 0.0);
      const Matrix inv = gauss_jordan_inverse(kc);
      for (std::size_t q = 0; q < task.x_eval.rows(); ++q) {
        double m = mu_q(q, 0);
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t j = 0; j < 3; ++j)
            m += k(f_q.row(q), f_c.row(i)) * inv(i, j) * (task.y_adapt[j] - mu_c(j, 0));
        oracle[q] += m / static_cast<double>(ens.size());
      }
    }
    const auto got = mixture_predictive_mean(ens, task.x_adapt, task.y_adapt, task.x_eval);
    for (std::size_t q = 0; q < oracle.size(); ++q) {
      worst = std::max(worst, std::abs(got[q] - oracle[q]));
      sq += (oracle[q] - task.y_eval[q]) * (oracle[q] - task.y_eval[q]);
      ++count;
    }
  }
  const double rmse_oracle = std::sqrt(sq / static_cast<double>(count));
  const double rmse_diff = std::abs(meta_test_rmse(ens, tests).rmse - rmse_oracle);
  worst = std::max(worst, rmse_diff);
  r.passed = worst < 1e-8;
  r.detail = "max |diff| " + fmt(worst) + " (predictions and RMSE)";
  return r;
}

CheckResult check_mi_degeneracy(std::uint64_t seed, std::size_t n_seeds) {
  CheckResult r{4, "bamld_score near zero for one or duplicated particles", true, ""};
  const GpConfig gp = small_gp(8);
  AcquisitionConfig acq;
  acq.mc_samples = 256;
  double worst_z = 0.0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    Rng rng = make_rng(derive_seed(seed, {0x4d49ull, s}));
    const TaskDataset task = random_task(10, rng, 0);
    ParticleEnsemble one = sample_initial_ensemble(gp, 1, 1.0, ParticleInit::prior, rng);
    ParticleEnsemble dup = one;
    const std::size_t p = 2 + s % 5;
    dup.particles.assign(p, one.particles[0]);
    for (const auto* ens : {&one, &dup}) {
      const ScoreTerms t = bamld_score(*ens, task.x, acq, rng);
      const double z = t.std_error > 0 ? std::abs(t.score) / t.std_error
                                       : (t.score == 0.0 ? 0.0 : INFINITY);
      worst_z = std::max(worst_z, z);
    }
  }
  r.passed = worst_z <= 3.0;
  r.detail = "max |score|/SE " + fmt(worst_z) + " over " + std::to_string(n_seeds) + " seeds";
  return r;
}

CheckResult check_estimator_identity(std::uint64_t seed) {
  CheckResult r{5, "uncertainty - aleatoric == bamld under a shared stream", true, ""};
  const GpConfig gp = small_gp(8);
  AcquisitionConfig acq;
  acq.mc_samples = 128;
  std::size_t mismatches = 0, trials = 0;
  for (std::size_t s = 0; s < 10; ++s) {
    Rng rng = make_rng(derive_seed(seed, {0x1d5ull, s}));
    const TaskDataset task = random_task(8, rng, 0);
    const ParticleEnsemble ens = sample_initial_ensemble(gp, 1 + s % 6, 1.0, ParticleInit::prior, rng);
    const std::uint64_t stream = rng();
    Rng r1 = make_rng(stream), r2 = make_rng(stream);
    const double u = uncertainty_score(ens, task.x, acq, r1).score;
    const double b = bamld_score(ens, task.x, acq, r2).score;
    if (u - aleatoric_term(ens, task.x) != b) ++mismatches;
    ++trials;
  }
  r.passed = mismatches == 0;
  r.detail = std::to_string(mismatches) + " of " + std::to_string(trials) + " trials differ";
  return r;
}

CheckResult check_svgd_degeneracy(std::uint64_t seed, std::size_t n_steps) {
  CheckResult r{6, "P=1 SVGD equals gradient ascent", true, ""};
  const GpConfig gp = small_gp(4);
  Rng rng = make_rng(derive_seed(seed, "check-svgd"));
  std::vector<TaskDataset> data;
  for (int t = 0; t < 3; ++t) data.push_back(random_task(6, rng, t));
  const PosteriorScoreConfig score;
  SvgdConfig svgd;
  svgd.step_size = 1e-3;
  svgd.n_steps = n_steps;

  ParticleEnsemble ens = sample_initial_ensemble(gp, 1, 1.0, ParticleInit::prior, rng);
  Theta ascent = ens.particles[0];
  const ScoreGradient grad = [&](std::span<const double> th) {
    return log_posterior_grad(th, data, score, gp);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    ens = svgd_step(ens, grad, svgd);
    const Theta g = grad(ascent);
    for (std::size_t i = 0; i < ascent.size(); ++i) ascent[i] += svgd.step_size * g[i];
    for (std::size_t i = 0; i < ascent.size(); ++i)
      worst = std::max(worst, std::abs(ens.particles[0][i] - ascent[i]) /
                                  std::max(1.0, std::abs(ascent[i])));
  }
  r.passed = worst <= 1e-12;
  r.detail = "max relative deviation " + fmt(worst) + " over " + std::to_string(n_steps) + " steps";
  return r;
}

bool bo_trace_invariants_hold(const BoTrace& trace, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (trace.best_so_far.size() != trace.regret.size() ||
      trace.queries.size() != trace.regret.size())
    return fail("trace lengths differ");
  for (std::size_t t = 0; t < trace.regret.size(); ++t) {
    if (t > 0 && trace.best_so_far[t] < trace.best_so_far[t - 1])
      return fail("best_so_far decreases at " + std::to_string(t));
    if (t > 0 && trace.regret[t] > trace.regret[t - 1])
      return fail("regret increases at " + std::to_string(t));
    if (trace.regret[t] < -1e-9) return fail("negative regret at " + std::to_string(t));
    if (trace.regret[t] != trace.true_max - trace.best_so_far[t])
      return fail("regret differs from true_max - best_so_far at " + std::to_string(t));
  }
  return true;
}

CheckResult check_regret_invariants(const std::vector<BoTrace>& traces) {
  CheckResult r{7, "regret invariants on BO runs", true, ""};
  std::size_t bad = 0;
  std::string first;
  for (const auto& t : traces) {
    std::string why;
    if (!bo_trace_invariants_hold(t, &why)) {
      if (bad++ == 0) first = why;
    }
  }
  r.passed = bad == 0 && !traces.empty();
  r.detail = std::to_string(traces.size() - bad) + " of " + std::to_string(traces.size()) +
             " traces hold" + (first.empty() ? "" : " (" + first + ")");
  return r;
}

CheckResult check_regret_invariants(std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, "check-bo"));
  BoRunConfig cfg;
  cfg.n_iterations = 10;
  cfg.candidate_grid = 50;
  cfg.true_max_grid = 2001;
  cfg.surrogate_update_steps = 5;
  const GpConfig gp = small_gp(4);
  TaskPool pool = sample_bo_pool(4, 10, rng);
  std::vector<TaskDataset> meta;
  for (int i = 0; i < 3; ++i) {
    pool.oracle_label(i);
    meta.push_back(pool.labeled_dataset(i));
  }
  GpConfig bo_gp = gp;
  bo_gp.noise_variance = cfg.observation_noise_var;
  const ParticleEnsemble ens = sample_initial_ensemble(bo_gp, 2, 1.0, ParticleInit::prior, rng);
  std::vector<BoTrace> traces;
  for (int k = 0; k < 3; ++k) {
    const auto& task = std::get<BoTaskParams>(pool.task(3).params);
    traces.push_back(vanilla_bo_baseline(task, cfg, rng));
    EnsembleSurrogate sur(ens, meta, PosteriorScoreConfig{}, SvgdConfig{}, cfg.surrogate_update_steps,
                          make_rng(rng()));
    traces.push_back(run_bo(task, sur, cfg, rng));
  }
  return check_regret_invariants(traces);
}

std::vector<CheckResult> run_property_suite(std::uint64_t seed) {
  return {check_entropy_closed_form(seed), check_lml_gradient(seed),
          check_conditioning_oracle(seed), check_mi_degeneracy(seed),
          check_estimator_identity(seed),  check_svgd_degeneracy(seed),
          check_regret_invariants(seed)};
}

}  // namespace bamld
