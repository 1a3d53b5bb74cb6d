/**
 * Command-line front end for the equivariant pruning harness.
 *
 * Verbs:
 *   basis     build a family basis, print its constants, export basis.json
 *   prune     prune every config seed, write results.csv + per-seed reports
 *   ablation  run the seed x C grid, write ablation.csv, print mean/std per C
 *   scaling   probe minimal Subset-Sum widths per epsilon, write scaling.csv
 *
 * Exit codes: 0 success, 2 invalid configuration or usage, 3 resource cap
 * violation, 1 unexpected failure. The default output directory comes from
 * EQUIPRUNE_OUT_DIR when set (the only environment variable consulted).
 */

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "equiprune/experiment.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("EQUIPRUNE_OUT_DIR");
  return env && *env ? env : "out";
}

void print_rows(const std::vector<equiprune::ResultRow>& rows) {
  std::cout << equiprune::csv_line(equiprune::result_csv_header()) << ",wall_time_ms\n";
  for (const auto& r : rows) std::cout << equiprune::result_stdout_line(r) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equivariant network pruning harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  int jobs = 1;
  std::int64_t seed_override = -1;

  const char* names[] = {"basis", "prune", "ablation", "scaling"};
  const char* blurbs[] = {"export an equivariant layer basis",
                          "prune random diamonds onto config seeds",
                          "sweep the overparametrization constant C",
                          "probe minimal widths over an epsilon list"};
  for (int i = 0; i < 4; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: EQUIPRUNE_OUT_DIR or ./out)");
    sub->add_option("--jobs", jobs, "independent worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed_override,
                    "replace the config's seed list with this single seed")
        ->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    equiprune::ExperimentConfig cfg = equiprune::load_experiment_config(config_path);
    if (seed_override >= 0) {
      cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
      cfg.scaling.seed = static_cast<std::uint64_t>(seed_override);
    }

    if (app.got_subcommand("basis")) {
      const auto r = equiprune::cmd_basis(cfg, out_dir);
      std::cout << "cardinality=" << r.cardinality << "\n"
                << "op_norm_bound=" << equiprune::format_double(r.op_norm_bound) << "\n"
                << "identity=" << (r.has_identity ? "yes" : "no") << "\n"
                << "equivariance_residual="
                << equiprune::format_double(r.equivariance_residual) << "\n"
                << "hash=" << r.hash << "\n"
                << "wrote " << (std::filesystem::path(out_dir) / "basis.json").string() << "\n";
    } else if (app.got_subcommand("prune")) {
      const auto r = equiprune::cmd_prune(cfg, out_dir, jobs);
      print_rows(r.rows);
      std::cout << "wrote " << (std::filesystem::path(out_dir) / "results.csv").string() << "\n";
    } else if (app.got_subcommand("ablation")) {
      const auto r = equiprune::cmd_ablation(cfg, out_dir, jobs);
      print_rows(r.rows);
      for (const auto& st : r.stats)
        std::cout << "C=" << equiprune::format_double(st.C)
                  << " mean_sampled_error=" << equiprune::format_double(st.mean)
                  << " std=" << equiprune::format_double(st.stddev) << "\n";
      std::cout << "wrote " << (std::filesystem::path(out_dir) / "ablation.csv").string()
                << "\n";
    } else {
      const auto r = equiprune::cmd_scaling(cfg, out_dir);
      for (const auto& row : r.rows)
        std::cout << "epsilon=" << equiprune::format_double(row.epsilon)
                  << " minimal_n=" << row.minimal_n << "\n";
      if (r.has_fit)
        std::cout << "slope=" << equiprune::format_double(r.fit.slope)
                  << " r2=" << equiprune::format_double(r.fit.r2) << "\n";
      else
        std::cout << "fit undefined (needs two distinct epsilons)\n";
      std::cout << "wrote " << (std::filesystem::path(out_dir) / "scaling.csv").string()
                << "\n";
    }
    return 0;
  } catch (const equiprune::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const equiprune::CapViolationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const equiprune::SizeCapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
