// Command-line front end: run experiments, plot result CSVs, run the property suite.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bamld/checks.hpp"
#include "bamld/errors.hpp"
#include "bamld/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kRuntime = 2, kAcceptance = 3 };

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      if (item.empty() || item[0] == '-') throw std::invalid_argument(item);
      seeds.push_back(std::stoull(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw bamld::ConfigError("seeds", "'" + item + "' is not a non-negative integer");
    }
  }
  if (seeds.empty()) throw bamld::ConfigError("seeds", "empty seed list");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active meta-learning experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path, experiment, seeds_text, out_dir, profile;
  std::size_t workers = 0;
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--experiment", experiment,
                  "rmse_fig2 | rmse_fig3 | clusters_fig4 | bo_fig5 | property_suite");
  run->add_option("--seeds", seeds_text, "Comma-separated seeds, e.g. 0,1,2");
  run->add_option("--out", out_dir, "Output directory (default: $BAMLD_OUT_DIR or ./results)");
  run->add_option("--profile", profile, "desk | paper");
  run->add_option("--workers", workers, "Worker threads");

  auto* plot = app.add_subcommand("plot", "Render an SVG from a results CSV");
  std::string csv_path, kind, svg_out;
  plot->add_option("--csv", csv_path, "results.csv")->required();
  plot->add_option("--kind", kind, "fig2 | fig3 | fig4 | fig5")->required();
  plot->add_option("--out", svg_out, "SVG path (default: next to the CSV)");

  auto* verify = app.add_subcommand("verify", "Run the property suite");
  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  verify->add_option("--suite", suite, "all")->check(CLI::IsMember({"all"}));
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) {
      const std::optional<std::string> prof =
          profile.empty() ? std::nullopt : std::optional<std::string>(profile);
      bamld::ExperimentConfig cfg = bamld::load_experiment_config(config_path, prof);
      if (!experiment.empty()) cfg.experiment = bamld::experiment_from_string(experiment);
      if (!seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text);
      if (workers > 0) cfg.workers = workers;
      if (!out_dir.empty()) {
        cfg.output_dir = out_dir;
      } else {
        std::ifstream probe(config_path);
        const auto j = nlohmann::json::parse(probe);
        if (!j.contains("output_dir")) {
          if (const char* env = std::getenv(bamld::kOutDirEnv); env && *env) cfg.output_dir = env;
        }
      }
      const auto summary = bamld::run_experiment(cfg);
      std::cout << "wrote " << summary.results_csv.string() << " (" << summary.rows.size()
                << " rows)\n";
      if (!summary.plot_svg.empty()) std::cout << "wrote " << summary.plot_svg.string() << "\n";
      if (cfg.experiment == bamld::Experiment::property_suite && !summary.all_passed) {
        std::cerr << "property suite: failures recorded in " << summary.results_csv.string() << "\n";
        return kAcceptance;
      }
      return kOk;
    }
    if (*plot) {
      const auto path = bamld::plot_curves_file(csv_path, bamld::plot_kind_from_string(kind), svg_out);
      std::cout << "wrote " << path.string() << "\n";
      return kOk;
    }
    if (*verify) {
      bool ok = true;
      for (const auto& c : bamld::run_property_suite(verify_seed)) {
        std::cout << (c.passed ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": "
                  << c.detail << "\n";
        ok = ok && c.passed;
      }
      return ok ? kOk : kAcceptance;
    }
  } catch (const bamld::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const bamld::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
