#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bamld/acquisition.hpp"
#include "bamld/bayes_opt.hpp"
#include "bamld/checks.hpp"
#include "bamld/environments.hpp"
#include "bamld/errors.hpp"
#include "bamld/gp.hpp"
#include "bamld/harness.hpp"
#include "bamld/hyper_posterior.hpp"

namespace py = pybind11;
using namespace bamld;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// 1-d input becomes a column; 2-d is taken as is.
Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    const auto n = static_cast<std::size_t>(a.shape(0));
    return Matrix(n, 1, std::vector<double>(a.data(), a.data() + n));
  }
  if (a.ndim() != 2) throw ShapeError("expected a 1-d or 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  return std::vector<double>(a.data(), a.data() + a.shape(0));
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

GpConfig make_gp(std::vector<std::size_t> hidden, std::size_t feature_dim, double noise) {
  GpConfig gp;
  gp.noise_variance = noise;
  gp.mean_spec = MlpSpec{1, hidden, 1};
  gp.feature_spec = MlpSpec{1, hidden, feature_dim};
  gp.validate();
  return gp;
}

TaskDataset make_task(const Array& x, const Array& y, int id = 0) {
  TaskDataset t{to_matrix(x), to_vector(y), id};
  t.validate();
  return t;
}

std::vector<TaskDataset> make_tasks(const std::vector<std::pair<Array, Array>>& tasks) {
  std::vector<TaskDataset> out;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    out.push_back(make_task(tasks[i].first, tasks[i].second, static_cast<int>(i)));
  return out;
}

py::dict terms_dict(const ScoreTerms& t) {
  py::dict d;
  d["score"] = t.score;
  d["total_entropy"] = t.total_entropy;
  d["aleatoric"] = t.aleatoric;
  d["std_error"] = t.std_error;
  return d;
}

AcquisitionConfig acq_config(std::size_t mc_samples) {
  AcquisitionConfig cfg;
  cfg.mc_samples = mc_samples;
  cfg.validate();
  return cfg;
}

py::dict trace_dict(const BoTrace& t) {
  py::dict d;
  d["queries"] = t.queries;
  d["best_so_far"] = t.best_so_far;
  d["regret"] = t.regret;
  d["true_max"] = t.true_max;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Deep-kernel GP meta-learning with active task selection";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<ShapeError> shape_error(m, "ShapeError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
  static py::exception<SelectionError> selection_error(m, "SelectionError", PyExc_RuntimeError);
  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ShapeError& e) {
      py::set_error(shape_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    } catch (const SelectionError& e) {
      py::set_error(selection_error, e.what());
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    }
  });

  py::class_<GpConfig>(m, "GpConfig")
      .def(py::init(&make_gp), py::arg("hidden") = std::vector<std::size_t>{16, 16},
           py::arg("feature_dim") = 2, py::arg("noise_variance") = 0.12)
      .def_readwrite("noise_variance", &GpConfig::noise_variance)
      .def_property_readonly("param_count", &GpConfig::param_count)
      .def_property_readonly("mean_param_count", &GpConfig::mean_param_count);

  py::class_<ParticleEnsemble>(m, "ParticleEnsemble")
      .def(py::init([](const std::vector<Array>& particles, const GpConfig& gp) {
             ParticleEnsemble e;
             e.gp = gp;
             for (const auto& p : particles) e.particles.push_back(to_vector(p));
             e.validate();
             return e;
           }),
           py::arg("particles"), py::arg("gp"))
      .def_property_readonly("particles",
                             [](const ParticleEnsemble& e) {
                               std::vector<Array> out;
                               for (const auto& p : e.particles) out.push_back(from_vector(p));
                               return out;
                             })
      .def_readonly("gp", &ParticleEnsemble::gp)
      .def("__len__", &ParticleEnsemble::size);

  m.def("kernel_matrix",
        [](const Array& theta, const Array& x1, const Array& x2, const GpConfig& gp) {
          return from_matrix(kernel_matrix(to_vector(theta), to_matrix(x1), to_matrix(x2), gp));
        },
        py::arg("theta"), py::arg("x1"), py::arg("x2"), py::arg("gp"));

  m.def("log_marginal_likelihood",
        [](const Array& theta, const Array& x, const Array& y, const GpConfig& gp) {
          return log_marginal_likelihood(to_vector(theta), make_task(x, y), gp);
        },
        py::arg("theta"), py::arg("x"), py::arg("y"), py::arg("gp"));

  m.def("log_marginal_likelihood_grad",
        [](const Array& theta, const Array& x, const Array& y, const GpConfig& gp) {
          return from_vector(log_marginal_likelihood_grad(to_vector(theta), make_task(x, y), gp));
        },
        py::arg("theta"), py::arg("x"), py::arg("y"), py::arg("gp"));

  m.def("gaussian_entropy",
        [](const Array& cov) {
          const Matrix c = to_matrix(cov);
          return gaussian_entropy(GpPredictive::from_moments(std::vector<double>(c.rows(), 0.0), c));
        },
        py::arg("cov"));

  m.def("condition_gp",
        [](const Array& theta, const Array& x_ctx, const Array& y_ctx, const Array& x_query,
           const GpConfig& gp) {
          const auto p = condition_gp(to_vector(theta), to_matrix(x_ctx), to_vector(y_ctx),
                                      to_matrix(x_query), gp);
          return py::make_tuple(from_vector(p.mean), from_vector(p.variance));
        },
        py::arg("theta"), py::arg("x_ctx"), py::arg("y_ctx"), py::arg("x_query"), py::arg("gp"));

  m.def("mixture_entropy",
        [](const std::vector<Array>& means, const std::vector<Array>& covs, std::size_t mc_samples,
           std::uint64_t seed) {
          if (means.size() != covs.size()) throw ShapeError("means and covs differ in length");
          std::vector<GpPredictive> comps;
          for (std::size_t i = 0; i < means.size(); ++i)
            comps.push_back(GpPredictive::from_moments(to_vector(means[i]), to_matrix(covs[i])));
          Rng rng(seed);
          const auto e = mixture_entropy(comps, mc_samples, rng);
          return py::make_tuple(e.value, e.std_error);
        },
        py::arg("means"), py::arg("covs"), py::arg("mc_samples") = 512, py::arg("seed") = 0);

  m.def("sample_initial_ensemble",
        [](const GpConfig& gp, std::size_t particles, double prior_variance, std::uint64_t seed) {
          Rng rng(seed);
          return sample_initial_ensemble(gp, particles, prior_variance, ParticleInit::prior, rng);
        },
        py::arg("gp"), py::arg("particles") = 5, py::arg("prior_variance") = 1.0,
        py::arg("seed") = 0);

  m.def("log_posterior_score",
        [](const Array& theta, const std::vector<std::pair<Array, Array>>& tasks,
           const GpConfig& gp, double gamma, double prior_variance) {
          PosteriorScoreConfig s;
          s.gamma = gamma;
          s.prior_variance = prior_variance;
          return log_posterior_score(to_vector(theta), make_tasks(tasks), s, gp);
        },
        py::arg("theta"), py::arg("tasks"), py::arg("gp"), py::arg("gamma") = 1.0,
        py::arg("prior_variance") = 1.0);

  m.def("fit_posterior",
        [](const ParticleEnsemble& ens, const std::vector<std::pair<Array, Array>>& tasks,
           std::size_t n_steps, double step_size, double gamma, const std::string& optimizer,
           std::size_t task_minibatch, std::uint64_t seed) {
          PosteriorScoreConfig s;
          s.gamma = gamma;
          SvgdConfig v;
          v.n_steps = n_steps;
          v.step_size = step_size;
          v.task_minibatch = task_minibatch;
          if (optimizer == "adam") v.optimizer = SvgdOptimizer::adam;
          else if (optimizer != "plain") throw ConfigError("optimizer", "expected plain or adam");
          Rng rng(seed);
          const auto data = make_tasks(tasks);
          py::gil_scoped_release release;
          return fit_posterior(ens, data, s, v, rng);
        },
        py::arg("ensemble"), py::arg("tasks"), py::arg("n_steps") = 1500,
        py::arg("step_size") = 1e-3, py::arg("gamma") = 1.0, py::arg("optimizer") = "plain",
        py::arg("task_minibatch") = 2, py::arg("seed") = 0);

  m.def("aleatoric_term",
        [](const ParticleEnsemble& ens, const Array& x) { return aleatoric_term(ens, to_matrix(x)); },
        py::arg("ensemble"), py::arg("x"));

  m.def("bamld_score",
        [](const ParticleEnsemble& ens, const Array& x, std::size_t mc_samples, std::uint64_t seed) {
          Rng rng(seed);
          return terms_dict(bamld_score(ens, to_matrix(x), acq_config(mc_samples), rng));
        },
        py::arg("ensemble"), py::arg("x"), py::arg("mc_samples") = 512, py::arg("seed") = 0);

  m.def("uncertainty_score",
        [](const ParticleEnsemble& ens, const Array& x, std::size_t mc_samples, std::uint64_t seed) {
          Rng rng(seed);
          return terms_dict(uncertainty_score(ens, to_matrix(x), acq_config(mc_samples), rng));
        },
        py::arg("ensemble"), py::arg("x"), py::arg("mc_samples") = 512, py::arg("seed") = 0);

  m.def("eval_sinusoid",
        [](double a, double b, double c, double alpha, double x) {
          return eval_sinusoid(SinusoidTaskParams{a, b, c, alpha}, x);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("alpha"), py::arg("x"));

  m.def("eval_g_bo",
        [](std::array<double, 3> w, std::array<double, 3> alpha, double x) {
          return eval_g_bo(BoTaskParams{w[0], w[1], w[2], alpha[0], alpha[1], alpha[2]}, x);
        },
        py::arg("w"), py::arg("alpha"), py::arg("x"));

  m.def("cluster_amplitude_range", &cluster_amplitude_range, py::arg("j"));

  m.def("vanilla_bo",
        [](std::array<double, 3> w, std::array<double, 3> alpha, std::size_t n_iterations,
           std::uint64_t seed) {
          BoRunConfig cfg;
          cfg.n_iterations = n_iterations;
          cfg.validate();
          Rng rng(seed);
          return trace_dict(vanilla_bo_baseline(
              BoTaskParams{w[0], w[1], w[2], alpha[0], alpha[1], alpha[2]}, cfg, rng));
        },
        py::arg("w") = std::array<double, 3>{1, 1, 1},
        py::arg("alpha") = std::array<double, 3>{-2, 3, -8}, py::arg("n_iterations") = 20,
        py::arg("seed") = 0);

  m.def("run_property_suite",
        [](std::uint64_t seed) {
          std::vector<py::dict> out;
          for (const auto& c : run_property_suite(seed)) {
            py::dict d;
            d["id"] = c.id;
            d["name"] = c.name;
            d["passed"] = c.passed;
            d["detail"] = c.detail;
            out.push_back(d);
          }
          return out;
        },
        py::arg("seed") = 0);

  m.def("run_experiment",
        [](const std::string& config_json, const std::string& profile) {
          const auto j = nlohmann::json::parse(config_json);
          auto cfg = apply_config_json(ExperimentConfig::for_profile(profile), j);
          cfg.validate();
          RunSummary summary;
          {
            py::gil_scoped_release release;
            summary = run_experiment(cfg);
          }
          return summary.results_csv.string();
        },
        py::arg("config_json"), py::arg("profile") = "desk",
        "Runs an experiment from a JSON config string; returns the results.csv path.");
}
