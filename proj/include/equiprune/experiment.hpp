#pragma once

/**
 * Experiment configuration and the four harness commands (basis, prune,
 * ablation, scaling). Configs load from JSON with strict key checking and
 * desk-scale defaults per family; semantic range errors raise ConfigError
 * and resource-cap violations raise CapViolationError, which the CLI maps
 * to distinct exit codes.
 *
 * Every command is deterministic: given the same config, the produced
 * files are byte-identical across runs. Wall-clock timings are therefore
 * reported on stdout only and never written to files.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "equiprune/serialize.hpp"
#include "equiprune/subset_sum.hpp"

namespace equiprune {

enum class Family { Mlp, Cnn, Steerable, Symmetric };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Mlp: return "mlp";
    case Family::Cnn: return "cnn";
    case Family::Steerable: return "steerable";
    case Family::Symmetric: return "symmetric";
  }
  return "?";
}

/// Scaling-curve probe settings (the `scaling` config section).
struct ScalingConfig {
  std::vector<double> epsilons;
  double threshold = 0.95;
  int trials = 200;
  std::uint64_t seed = 2024;
};

struct ExperimentConfig {
  Family family = Family::Mlp;
  GroupKind group_kind = GroupKind::Cyclic;  // steerable point group
  int group_order = 4;                       // steerable rotation order
  int grid_side = 5;                         // cnn / steerable grids
  int degree = 4;                            // symmetric group degree
  int tensor_order = 1;                      // symmetric tensor power
  int depth = 2;
  std::vector<int> multiplicities;           // depth + 1 entries
  double epsilon = 0.01;
  double delta = 0.01;
  std::vector<double> c_values = {5.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  InitMode init = InitMode::Uniform;
  SolverKind solver = SolverKind::Exact;
  int n_samples = 0;  // 0 = family default
  ScalingConfig scaling;
  bool has_scaling = false;
};

// ---------------------------------------------------------------------------
// config parsing

namespace detail {

inline void check_known_keys(const Json& obj, const std::vector<std::string>& known,
                             const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

inline double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("config: '" + path + "' must be a number");
  return v.get<double>();
}

inline int as_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError("config: '" + path + "' must be an integer");
  return v.get<int>();
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("config: '" + path + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline Family parse_family(const std::string& s) {
  if (s == "mlp") return Family::Mlp;
  if (s == "cnn") return Family::Cnn;
  if (s == "steerable") return Family::Steerable;
  if (s == "symmetric") return Family::Symmetric;
  throw ConfigError("config: 'family' must be one of mlp, cnn, steerable, symmetric (got '" +
                    s + "')");
}

/// Point-group names for steerable configs: 'c<order>' or 'd<order>'.
inline std::pair<GroupKind, int> parse_point_group(const std::string& s) {
  if (s.size() < 2 || (s[0] != 'c' && s[0] != 'd' && s[0] != 'C' && s[0] != 'D'))
    throw ConfigError("config: 'group' must look like c4, c8, or d4 (got '" + s + "')");
  int order = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw ConfigError("config: 'group' must look like c4, c8, or d4 (got '" + s + "')");
    order = order * 10 + (s[i] - '0');
  }
  if (order < 1) throw ConfigError("config: point group order must be positive");
  return {(s[0] == 'c' || s[0] == 'C') ? GroupKind::Cyclic : GroupKind::Dihedral, order};
}

inline std::vector<int> default_multiplicities(Family family, int depth) {
  std::vector<int> m(static_cast<std::size_t>(depth) + 1);
  switch (family) {
    case Family::Mlp:
      std::fill(m.begin(), m.end(), 4);
      break;
    case Family::Cnn:
    case Family::Symmetric:
      std::fill(m.begin(), m.end(), 2);
      break;
    case Family::Steerable:
      std::fill(m.begin(), m.end(), 2);
      m.front() = 1;
      m.back() = 1;
      break;
  }
  return m;
}

inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  detail::check_known_keys(
      j,
      {"family", "group", "grid_side", "degree", "tensor_order", "depth", "multiplicities",
       "epsilon", "delta", "C", "seeds", "init", "solver", "n_samples", "scaling"},
      "top level");

  ExperimentConfig cfg;
  if (j.contains("family")) cfg.family = parse_family(detail::as_string(j["family"], "family"));
  else if (!j.contains("scaling"))
    throw ConfigError("config: missing required key 'family'");

  if (j.contains("group")) {
    auto [kind, order] = parse_point_group(detail::as_string(j["group"], "group"));
    cfg.group_kind = kind;
    cfg.group_order = order;
  }
  if (j.contains("grid_side")) cfg.grid_side = detail::as_int(j["grid_side"], "grid_side");
  else if (cfg.family == Family::Steerable) cfg.grid_side = 7;
  if (j.contains("degree")) cfg.degree = detail::as_int(j["degree"], "degree");
  if (j.contains("tensor_order"))
    cfg.tensor_order = detail::as_int(j["tensor_order"], "tensor_order");

  const bool has_depth = j.contains("depth");
  const bool has_mult = j.contains("multiplicities");
  if (has_depth) cfg.depth = detail::as_int(j["depth"], "depth");
  if (has_mult) {
    const Json& m = j["multiplicities"];
    if (!m.is_array() || m.size() < 2)
      throw ConfigError("config: 'multiplicities' must be an array of at least 2 integers");
    cfg.multiplicities.clear();
    for (std::size_t i = 0; i < m.size(); ++i)
      cfg.multiplicities.push_back(
          detail::as_int(m[i], "multiplicities[" + std::to_string(i) + "]"));
    if (!has_depth) cfg.depth = static_cast<int>(m.size()) - 1;
  }
  if (cfg.depth < 1) throw ConfigError("config: 'depth' must be at least 1");
  if (cfg.multiplicities.empty())
    cfg.multiplicities = default_multiplicities(cfg.family, cfg.depth);
  if (static_cast<int>(cfg.multiplicities.size()) != cfg.depth + 1)
    throw ConfigError("config: 'multiplicities' must have depth + 1 entries");
  for (int w : cfg.multiplicities)
    if (w < 1) throw ConfigError("config: multiplicities must be positive");

  if (j.contains("epsilon")) cfg.epsilon = detail::as_number(j["epsilon"], "epsilon");
  if (j.contains("delta")) cfg.delta = detail::as_number(j["delta"], "delta");
  if (cfg.epsilon <= 0.0 || cfg.epsilon > 0.5)
    throw ConfigError("config: 'epsilon' must lie in (0, 0.5]");
  if (cfg.delta <= 0.0 || cfg.delta > 0.5)
    throw ConfigError("config: 'delta' must lie in (0, 0.5]");

  if (j.contains("C")) {
    cfg.c_values.clear();
    const Json& c = j["C"];
    if (c.is_array()) {
      for (std::size_t i = 0; i < c.size(); ++i)
        cfg.c_values.push_back(detail::as_number(c[i], "C[" + std::to_string(i) + "]"));
    } else {
      cfg.c_values.push_back(detail::as_number(c, "C"));
    }
    if (cfg.c_values.empty()) throw ConfigError("config: 'C' must not be an empty list");
    for (double v : cfg.c_values)
      if (!(v > 0.0)) throw ConfigError("config: every C must be positive");
  }

  if (j.contains("seeds")) {
    const Json& s = j["seeds"];
    if (!s.is_array() || s.empty())
      throw ConfigError("config: 'seeds' must be a non-empty array of integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string path = "seeds[" + std::to_string(i) + "]";
      if (!s[i].is_number_integer() || s[i].get<std::int64_t>() < 0)
        throw ConfigError("config: '" + path + "' must be a non-negative integer");
      cfg.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }

  if (j.contains("init")) {
    const std::string v = detail::as_string(j["init"], "init");
    if (v == "uniform") cfg.init = InitMode::Uniform;
    else if (v == "deterministic") cfg.init = InitMode::DeterministicBinary;
    else throw ConfigError("config: 'init' must be 'uniform' or 'deterministic'");
  }
  if (j.contains("solver")) {
    const std::string v = detail::as_string(j["solver"], "solver");
    if (v == "exact") cfg.solver = SolverKind::Exact;
    else if (v == "greedy") cfg.solver = SolverKind::Greedy;
    else throw ConfigError("config: 'solver' must be 'exact' or 'greedy'");
  }
  if (j.contains("n_samples")) {
    cfg.n_samples = detail::as_int(j["n_samples"], "n_samples");
    if (cfg.n_samples < 1) throw ConfigError("config: 'n_samples' must be positive");
  }

  if (j.contains("scaling")) {
    const Json& s = j["scaling"];
    if (!s.is_object()) throw ConfigError("config: 'scaling' must be an object");
    detail::check_known_keys(s, {"epsilons", "threshold", "trials", "seed"}, "'scaling'");
    if (!s.contains("epsilons") || !s["epsilons"].is_array() || s["epsilons"].empty())
      throw ConfigError("config: 'scaling.epsilons' must be a non-empty array");
    for (std::size_t i = 0; i < s["epsilons"].size(); ++i) {
      const double e =
          detail::as_number(s["epsilons"][i], "scaling.epsilons[" + std::to_string(i) + "]");
      if (e <= 0.0 || e > 0.5)
        throw ConfigError("config: every scaling epsilon must lie in (0, 0.5]");
      cfg.scaling.epsilons.push_back(e);
    }
    if (s.contains("threshold")) {
      cfg.scaling.threshold = detail::as_number(s["threshold"], "scaling.threshold");
      if (cfg.scaling.threshold < 0.0 || cfg.scaling.threshold > 1.0)
        throw ConfigError("config: 'scaling.threshold' must lie in [0, 1]");
    }
    if (s.contains("trials")) {
      cfg.scaling.trials = detail::as_int(s["trials"], "scaling.trials");
      if (cfg.scaling.trials < 1) throw ConfigError("config: 'scaling.trials' must be positive");
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_integer() || s["seed"].get<std::int64_t>() < 0)
        throw ConfigError("config: 'scaling.seed' must be a non-negative integer");
      cfg.scaling.seed = s["seed"].get<std::uint64_t>();
    }
    cfg.has_scaling = true;
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open file " + path.string());
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// family factory and caps

struct FamilySetup {
  std::shared_ptr<const EquivariantBasis> layer_basis;
  int default_samples = 10000;
};

/// Desk-scale resource caps, checked before any experiment runs.
constexpr int kMaxDenseDim = 100000;
constexpr int kMaxPointGroup = 16;
constexpr int kMaxSymmetricDegree = 8;
// Per-block group size ceiling. A sign branch holds about half the group;
// beyond the 40-value solver cap the pruner falls back to the largest-
// magnitude values, which stays sound, so the config cap only rejects
// widths where truncation would dominate rather than stay occasional.
constexpr int kMaxWidthRatio = 100;

inline FamilySetup make_family(const ExperimentConfig& cfg) {
  FamilySetup fam;
  switch (cfg.family) {
    case Family::Mlp:
      fam.layer_basis = std::make_shared<const EquivariantBasis>(build_mlp_basis());
      fam.default_samples = 10000;
      break;
    case Family::Cnn:
      if (cfg.grid_side < 3 || cfg.grid_side % 2 == 0)
        throw ConfigError("config: cnn 'grid_side' must be odd and at least 3");
      fam.layer_basis =
          std::make_shared<const EquivariantBasis>(build_translation_basis(cfg.grid_side));
      fam.default_samples = 4000;
      break;
    case Family::Steerable: {
      if (cfg.grid_side < 3 || cfg.grid_side % 2 == 0)
        throw ConfigError("config: steerable 'grid_side' must be odd and at least 3");
      const int gsize =
          cfg.group_kind == GroupKind::Dihedral ? 2 * cfg.group_order : cfg.group_order;
      if (gsize > kMaxPointGroup)
        throw CapViolationError("config: point group order exceeds the cap of " +
                                std::to_string(kMaxPointGroup) + " elements");
      fam.layer_basis = std::make_shared<const EquivariantBasis>(
          build_steerable_basis(GroupSpec{cfg.group_kind, cfg.group_order}, cfg.grid_side,
                                RepKind::Regular, RepKind::Regular));
      fam.default_samples = 1000;
      break;
    }
    case Family::Symmetric:
      if (cfg.degree < 2) throw ConfigError("config: symmetric 'degree' must be at least 2");
      if (cfg.tensor_order < 1)
        throw ConfigError("config: symmetric 'tensor_order' must be at least 1");
      if (cfg.degree > kMaxSymmetricDegree)
        throw CapViolationError("config: symmetric degree exceeds the cap of " +
                                std::to_string(kMaxSymmetricDegree));
      fam.layer_basis = std::make_shared<const EquivariantBasis>(
          build_symmetric_basis(cfg.degree, cfg.tensor_order, cfg.tensor_order));
      fam.default_samples = 10000;
      break;
  }
  return fam;
}

/**
 * Validates the widths the experiment would use against the desk caps:
 * the overparametrized feature dimension stays below kMaxDenseDim and the
 * per-input-block group size stays below kMaxWidthRatio so sign branches
 * fit the exact Subset-Sum solver. Checked for every C in the config.
 */
inline void check_experiment_caps(const ExperimentConfig& cfg, const FamilySetup& fam) {
  const int block = fam.layer_basis->in_space.block_dim;
  for (double C : cfg.c_values) {
    for (int i = 0; i < cfg.depth; ++i) {
      const int n_i = cfg.multiplicities[static_cast<std::size_t>(i)];
      const int n_i1 = cfg.multiplicities[static_cast<std::size_t>(i) + 1];
      const int w = required_width(n_i, n_i1, *fam.layer_basis, cfg.depth, cfg.epsilon,
                                   cfg.delta, C);
      if (static_cast<long long>(w) * block > kMaxDenseDim)
        throw CapViolationError("config: layer " + std::to_string(i) +
                                " would need dense dimension " +
                                std::to_string(static_cast<long long>(w) * block) +
                                ", above the cap of " + std::to_string(kMaxDenseDim));
      if (w / n_i > kMaxWidthRatio)
        throw CapViolationError("config: layer " + std::to_string(i) + " group size " +
                                std::to_string(w / n_i) + " exceeds the cap of " +
                                std::to_string(kMaxWidthRatio));
    }
  }
}

// ---------------------------------------------------------------------------
// result rows

/// One prune run. wall_time_ms is stdout-only: files must be byte-identical
/// across reruns, so timings never reach the CSV or JSON writers.
struct ResultRow {
  std::string family;
  std::uint64_t seed = 0;
  double C = 0.0;
  double epsilon = 0.0;
  double analytic_bound = 0.0;
  double sampled_error = 0.0;  // max absolute output deviation over the sample set
  double equivariance_residual = 0.0;
  double ratio_overparam = 0.0;
  double ratio_pruned = 0.0;
  long long failures = 0;
  double wall_time_ms = 0.0;
};

inline std::vector<std::string> result_csv_header() {
  return {"family",
          "seed",
          "C",
          "epsilon",
          "analytic_bound",
          "sampled_error",
          "equivariance_residual",
          "param_ratio_overparam",
          "param_ratio_pruned",
          "subset_sum_failures"};
}

inline std::vector<std::string> result_csv_cells(const ResultRow& r) {
  return {r.family,
          std::to_string(r.seed),
          format_double(r.C),
          format_double(r.epsilon),
          format_double(r.analytic_bound),
          format_double(r.sampled_error),
          format_double(r.equivariance_residual),
          format_double(r.ratio_overparam),
          format_double(r.ratio_pruned),
          std::to_string(r.failures)};
}

inline std::string result_stdout_line(const ResultRow& r) {
  return csv_line(result_csv_cells(r)) + "," + format_double(r.wall_time_ms);
}

// ---------------------------------------------------------------------------
// single prune run

struct SeedRun {
  ResultRow row;
  PruneOutcome outcome;
};

/**
 * One full pipeline run: sample a target from the family basis (target
 * stream mix_seed(1000, seed)), prune at the given C (diamond stream is the
 * seed itself), certify on held-out inputs (stream mix_seed(2000, seed)),
 * and measure the pruned network's equivariance residual.
 */
inline SeedRun run_single_prune(const FamilySetup& fam, const ExperimentConfig& cfg,
                                std::uint64_t seed, double C, int jobs = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng target_rng(mix_seed(1000, seed));
  EquivariantNetwork target =
      sample_target_network(fam.layer_basis, cfg.multiplicities, target_rng);
  std::vector<std::shared_ptr<const EquivariantBasis>> square(
      static_cast<std::size_t>(cfg.depth), fam.layer_basis);

  SeedRun run;
  run.outcome = prune_network(target, square, cfg.epsilon, cfg.delta, C, cfg.init, seed, jobs,
                              cfg.solver);
  const int samples = cfg.n_samples > 0 ? cfg.n_samples : fam.default_samples;
  const CertificationResult cert =
      certify_error(target, run.outcome, samples, mix_seed(2000, seed));
  const double resid = pruned_equivariance_check(run.outcome.pruned);

  ResultRow& r = run.row;
  r.family = family_name(cfg.family);
  r.seed = seed;
  r.C = C;
  r.epsilon = cfg.epsilon;
  r.analytic_bound = cert.analytic_bound;
  r.sampled_error = cert.max_abs_error;
  r.equivariance_residual = resid;
  r.ratio_overparam = run.outcome.report.ratio_overparam;
  r.ratio_pruned = run.outcome.report.ratio_pruned;
  r.failures = run.outcome.report.total_failures;
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             t0)
                       .count();
  return run;
}

inline Json config_echo_json(const ExperimentConfig& cfg, std::uint64_t seed, double C) {
  Json j;
  j["family"] = family_name(cfg.family);
  if (cfg.family == Family::Steerable) {
    j["group"] = std::string(cfg.group_kind == GroupKind::Dihedral ? "d" : "c") +
                 std::to_string(cfg.group_order);
  }
  if (cfg.family == Family::Cnn || cfg.family == Family::Steerable)
    j["grid_side"] = cfg.grid_side;
  if (cfg.family == Family::Symmetric) {
    j["degree"] = cfg.degree;
    j["tensor_order"] = cfg.tensor_order;
  }
  j["depth"] = cfg.depth;
  j["multiplicities"] = cfg.multiplicities;
  j["epsilon"] = cfg.epsilon;
  j["delta"] = cfg.delta;
  j["C"] = C;
  j["seed"] = seed;
  j["init"] = cfg.init == InitMode::Uniform ? "uniform" : "deterministic";
  j["solver"] = cfg.solver == SolverKind::Exact ? "exact" : "greedy";
  return j;
}

// ---------------------------------------------------------------------------
// commands

struct PruneCommandResult {
  std::vector<ResultRow> rows;
};

/**
 * Prunes every seed in the config at its single C value, writing
 * results.csv plus, per seed, a JSON report and the binary mask blob it
 * references. Seeds run as independent jobs; row order follows the config.
 */
inline PruneCommandResult cmd_prune(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir, int jobs = 1) {
  if (cfg.c_values.size() != 1)
    throw ConfigError("config: the prune command expects a single C; use ablation for C lists");
  const FamilySetup fam = make_family(cfg);
  check_experiment_caps(cfg, fam);
  std::filesystem::create_directories(out_dir);

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedRun> runs(n);
  const int outer = std::min<int>(jobs, static_cast<int>(n));
  const int inner = n > 1 ? 1 : jobs;
  parallel_for(n, outer, [&](std::size_t i) {
    runs[i] = run_single_prune(fam, cfg, cfg.seeds[i], cfg.c_values[0], inner);
  });

  PruneCommandResult out;
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    out.rows.push_back(runs[i].row);
    cells.push_back(result_csv_cells(runs[i].row));

    const std::string mask_name = "masks_seed" + std::to_string(cfg.seeds[i]) + ".bin";
    const Json sidecar = write_mask_blob(out_dir / mask_name, runs[i].outcome.blocks, mask_name);
    Json report;
    report["config"] = config_echo_json(cfg, cfg.seeds[i], cfg.c_values[0]);
    report["basis"] = Json{{"hash", hash_string(basis_hash(*fam.layer_basis))},
                           {"cardinality", fam.layer_basis->cardinality()},
                           {"op_norm_bound", fam.layer_basis->op_norm_bound}};
    report["result"] = report_to_json(runs[i].outcome.report);
    report["result"]["equivariance_residual"] = runs[i].row.equivariance_residual;
    report["masks"] = sidecar;
    write_json_file(out_dir / ("report_seed" + std::to_string(cfg.seeds[i]) + ".json"), report);
  }
  write_csv(out_dir / "results.csv", result_csv_header(), cells);
  return out;
}

struct AblationStat {
  double C = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct AblationCommandResult {
  std::vector<ResultRow> rows;
  std::vector<AblationStat> stats;
};

/**
 * Runs the seed x C grid and writes ablation.csv in (seed, C) order —
 * the same columns as results.csv, one row per grid point. The returned
 * stats hold mean and population standard deviation of the sampled error
 * per C value, in config order.
 */
inline AblationCommandResult cmd_ablation(const ExperimentConfig& cfg,
                                          const std::filesystem::path& out_dir, int jobs = 1) {
  const FamilySetup fam = make_family(cfg);
  check_experiment_caps(cfg, fam);
  std::filesystem::create_directories(out_dir);

  const std::size_t ns = cfg.seeds.size();
  const std::size_t nc = cfg.c_values.size();
  std::vector<ResultRow> rows(ns * nc);
  const int outer = std::min<int>(jobs, static_cast<int>(ns * nc));
  const int inner = ns * nc > 1 ? 1 : jobs;
  parallel_for(ns * nc, outer, [&](std::size_t flat) {
    const std::size_t si = flat / nc;
    const std::size_t ci = flat % nc;
    rows[flat] = run_single_prune(fam, cfg, cfg.seeds[si], cfg.c_values[ci], inner).row;
  });

  AblationCommandResult out;
  out.rows = std::move(rows);
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : out.rows) cells.push_back(result_csv_cells(r));
  write_csv(out_dir / "ablation.csv", result_csv_header(), cells);

  for (std::size_t ci = 0; ci < nc; ++ci) {
    AblationStat st;
    st.C = cfg.c_values[ci];
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t si = 0; si < ns; ++si) {
      const double v = out.rows[si * nc + ci].sampled_error;
      sum += v;
      sum2 += v * v;
    }
    st.mean = sum / static_cast<double>(ns);
    st.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(ns) - st.mean * st.mean));
    out.stats.push_back(st);
  }
  return out;
}

struct ScalingRow {
  double epsilon = 0.0;
  int minimal_n = 0;
};

struct ScalingCommandResult {
  std::vector<ScalingRow> rows;
  bool has_fit = false;
  LineFit fit;
};

/**
 * For each epsilon, binary-searches the smallest width whose Subset-Sum
 * existence rate reaches the threshold (uniform nonzero component, targets
 * on the probe grid), then fits minimal width against ln(1/epsilon).
 * With fewer than two distinct epsilons the fit is undefined and the
 * slope/r2 columns stay empty. An epsilon whose threshold is unreachable
 * below the solver cap raises CapViolationError.
 */
inline ScalingCommandResult cmd_scaling(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir) {
  if (!cfg.has_scaling)
    throw ConfigError("config: the scaling command needs a 'scaling' section");
  std::filesystem::create_directories(out_dir);

  ScalingCommandResult out;
  std::vector<double> xs, ys;
  for (double eps : cfg.scaling.epsilons) {
    const int n = minimal_width_for_rate(eps, cfg.scaling.trials, cfg.scaling.threshold,
                                         cfg.scaling.seed, 0, Half::Positive,
                                         BaseDistribution::Uniform);
    if (n < 0)
      throw CapViolationError("scaling: threshold " + format_double(cfg.scaling.threshold) +
                              " unreachable within the solver cap at epsilon " +
                              format_double(eps));
    out.rows.push_back({eps, n});
    xs.push_back(std::log(1.0 / eps));
    ys.push_back(static_cast<double>(n));
  }
  if (xs.size() >= 2) {
    try {
      out.fit = fit_line(xs, ys);
      out.has_fit = true;
    } catch (const Error&) {
      out.has_fit = false;  // repeated epsilons: no spread in x
    }
  }

  std::vector<std::vector<std::string>> cells;
  for (const auto& r : out.rows) {
    cells.push_back({format_double(r.epsilon), std::to_string(r.minimal_n),
                     out.has_fit ? format_double(out.fit.slope) : "",
                     out.has_fit ? format_double(out.fit.r2) : ""});
  }
  write_csv(out_dir / "scaling.csv", {"epsilon", "minimal_n", "slope", "r2"}, cells);
  return out;
}

struct BasisCommandResult {
  int cardinality = 0;
  double op_norm_bound = 0.0;
  bool has_identity = false;
  double equivariance_residual = 0.0;
  std::string hash;
};

/// Builds the family basis, measures its commutation residual, and writes
/// the full basis export to basis.json.
inline BasisCommandResult cmd_basis(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir) {
  const FamilySetup fam = make_family(cfg);
  std::filesystem::create_directories(out_dir);
  write_json_file(out_dir / "basis.json", basis_to_json(*fam.layer_basis));

  BasisCommandResult out;
  out.cardinality = fam.layer_basis->cardinality();
  out.op_norm_bound = fam.layer_basis->op_norm_bound;
  out.has_identity = fam.layer_basis->identity_index >= 0;
  out.equivariance_residual = verify_basis_equivariance(*fam.layer_basis).max_residual;
  out.hash = hash_string(basis_hash(*fam.layer_basis));
  return out;
}

}  // namespace equiprune
