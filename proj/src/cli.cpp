// Copyright 2026 The mixscale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mixscale/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixscale/dataset.hpp"
#include "mixscale/divergences.hpp"
#include "mixscale/errors.hpp"
#include "mixscale/latent_mixture.hpp"
#include "mixscale/mixed_density.hpp"
#include "mixscale/sampler.hpp"
#include "mixscale/schema.hpp"
#include "mixscale/theory_lab.hpp"

namespace mixscale {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

struct FitOptions {
  std::string schema;
  std::string data;
  std::string out = "fit-out";
  DPConfig dp;
  std::optional<double> niw_kappa;
  std::optional<double> niw_dof;
  double tail_tol = 1e-6;
};

struct DensityOptions {
  std::string schema;
  std::string mixture;
  std::string points;
  std::string out;
  double grid_lo = -3.0;
  double grid_hi = 3.0;
  std::size_t grid_n = 61;
  double tail_tol = 1e-6;
};

struct SampleOptions {
  std::string schema;
  std::string mixture;
  std::size_t n = 1000;
  std::string out;
};

struct DivergenceOptions {
  std::string schema;
  std::string schema_b;
  std::string mixture;
  std::string mixture_b;
  std::string metric = "kl";
  DivergenceConfig cfg;
};

struct LabOptions {
  std::size_t random = 100;
  std::string out;
  double quadrature_tol = 1e-6;
  std::vector<std::size_t> n_grid{100, 400, 1600};
  int replications = 5;
  double log_power = 1.0;
  DPConfig dp;
};

std::string number(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return {buf.data(), r.ptr};
}

MixedDensity load_density(const std::string& schema_path, const std::string& mixture_path) {
  const auto mixtures = read_mixtures(mixture_path);
  if (mixtures.empty()) {
    throw DomainError("no mixture in '" + mixture_path + "'");
  }
  return {load_schema(schema_path), mixtures.size() == 1 ? mixtures.front() : flatten(mixtures)};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  return out;
}

// Writes to the named file, or to `fallback` when the name is empty.
template <typename Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
  } else {
    auto file = open_out(path);
    fn(file);
  }
}

json config_json(const DPConfig& c) {
  return {{"alpha", c.alpha},   {"k_max", c.k_max}, {"truncation_sweeps", c.truncation_sweeps},
          {"iterations", c.iterations}, {"burn_in", c.burn_in}, {"thin", c.thin},
          {"seed", c.seed},     {"chain", c.chain}};
}

json niw_json(const NIWParams& niw) {
  std::vector<double> mean(niw.mean.data(), niw.mean.data() + niw.mean.size());
  std::vector<std::vector<double>> scale;
  for (Eigen::Index i = 0; i < niw.scale.rows(); ++i) {
    scale.emplace_back();
    for (Eigen::Index j = 0; j < niw.scale.cols(); ++j) scale.back().push_back(niw.scale(i, j));
  }
  return {{"mean", mean}, {"kappa", niw.kappa}, {"dof", niw.dof}, {"scale", scale}};
}

void write_marginals(std::ostream& out, const MixedSchema& schema, const std::vector<MixedPoint>& rows,
                     const std::optional<MixedDensity>& predictive, double tail_tol) {
  for (Eigen::Index j = 0; j < schema.p2(); ++j) out << schema.discrete_column(j).name << ',';
  out << "empirical,predictive\n";
  if (schema.p2() == 0) {
    return;
  }
  std::map<Outcome, double> freq;
  for (const auto& y : rows) freq[y.discrete] += 1.0;
  for (auto& [outcome, f] : freq) f /= static_cast<double>(rows.size());
  if (predictive) {
    for (const auto& o : predictive->discrete_support(tail_tol)) freq.try_emplace(o, 0.0);
  }
  for (const auto& [outcome, f] : freq) {
    for (const auto v : outcome) out << v << ',';
    out << number(f) << ',';
    out << (predictive ? number(predictive->discrete_probability(outcome)) : std::string{}) << '\n';
  }
}

int cmd_fit(const FitOptions& o, const Common& common, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const MixedSchema schema = load_schema(o.schema);
  const Dataset data = ingest(o.data, schema);
  const fs::path dir(o.out);
  fs::create_directories(dir);

  DPConfig dp = o.dp;
  dp.seed = common.seed;
  dp.threads = common.threads;
  if (const auto issues = dp.problems(); !issues.empty()) {
    throw DomainError("sampler configuration: " + issues.front());
  }
  if (data.size() == 0) {
    throw DomainError("no usable rows in '" + o.data + "'");
  }
  const AugmentedData aug = augment(data.rows, schema, data.lines);
  NIWParams niw = default_niw(initial_latents(aug, schema));
  if (o.niw_kappa) niw.kappa = *o.niw_kappa;
  if (o.niw_dof) niw.dof = *o.niw_dof;
  if (const auto issues = niw.problems(); !issues.empty()) {
    throw DomainError("base measure: " + issues.front());
  }

  auto trace_file = open_out(dir / "trace.csv");
  trace_file << "iteration,log_joint,occupied\n";
  PosteriorDraws draws;
  try {
    draws = run_sampler(data.rows, schema, niw, dp, data.lines, [&](const SweepDiagnostics& d) {
      trace_file << d.iteration << ',' << number(d.log_joint) << ',' << d.occupied << '\n';
    });
  } catch (const std::exception& e) {
    auto diag = open_out(dir / "diagnostics.txt");
    diag << "sampler failed: " << e.what() << '\n';
    throw;
  }
  draws.data_digest = data.digest;
  write_mixtures((dir / "draws.txt").string(), draws.draws);

  std::optional<MixedDensity> predictive;
  {
    auto file = open_out(dir / "predictive.txt");
    if (!draws.draws.empty()) {
      predictive = predictive_density(draws);
      file << serialize(predictive->latent()) << '\n';
    }
  }
  {
    auto file = open_out(dir / "marginals.csv");
    write_marginals(file, schema, data.rows, predictive, o.tail_tol);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json rejected = json::array();
  for (const auto& r : data.rejected) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
  json meta{{"schema", json::parse(schema_to_json(schema))},
            {"data", o.data},
            {"data_digest", data.digest},
            {"rows", data.size()},
            {"rejected_rows", rejected},
            {"config", config_json(dp)},
            {"niw", niw_json(niw)},
            {"draws", draws.draws.size()},
            {"threads", dp.threads},
            {"seconds", seconds}};
  open_out(dir / "metadata.json") << meta.dump(2) << '\n';
  for (const auto& r : data.rejected) out << "rejected line " << r.line << ": " << r.reason << '\n';
  out << "wrote " << draws.draws.size() << " draws to " << (dir / "draws.txt").string() << '\n';
  return kExitOk;
}

int cmd_density(const DensityOptions& o, std::ostream& out) {
  const MixedDensity density = load_density(o.schema, o.mixture);
  const auto& schema = density.schema();
  emit(o.out, out, [&](std::ostream& sink) {
    if (!o.points.empty()) {
      const Dataset points = ingest(o.points, schema);
      for (const auto& r : points.rejected) {
        throw DomainError("point on line " + std::to_string(r.line) + ": " + r.reason);
      }
      std::vector<Eigen::VectorXd> grid;
      for (const auto& y : points.rows) {
        grid.push_back(y.continuous);
      }
      // One row per input point.
      for (Eigen::Index j = 0; j < schema.p1(); ++j) sink << schema.continuous_column(j).name << ',';
      for (Eigen::Index j = 0; j < schema.p2(); ++j) sink << schema.discrete_column(j).name << ',';
      sink << "log_density,density\n";
      for (const auto& y : points.rows) {
        const double log_f = density.log_density(y);
        for (Eigen::Index j = 0; j < y.continuous.size(); ++j) sink << number(y.continuous[j]) << ',';
        for (const auto v : y.discrete) sink << v << ',';
        sink << number(log_f) << ',' << number(std::exp(log_f)) << '\n';
      }
      return;
    }
    if (o.grid_n < 1 || !(o.grid_lo <= o.grid_hi)) {
      throw DomainError("grid needs lo <= hi and at least one point");
    }
    std::vector<double> axis;
    for (std::size_t i = 0; i < o.grid_n; ++i) {
      axis.push_back(o.grid_n == 1 ? o.grid_lo
                                   : o.grid_lo + (o.grid_hi - o.grid_lo) * static_cast<double>(i) /
                                                     static_cast<double>(o.grid_n - 1));
    }
    std::vector<Eigen::VectorXd> grid{Eigen::VectorXd(0)};
    for (Eigen::Index j = 0; j < schema.p1(); ++j) {
      std::vector<Eigen::VectorXd> next;
      for (const auto& g : grid) {
        for (const double x : axis) {
          Eigen::VectorXd v(g.size() + 1);
          v << g, x;
          next.push_back(std::move(v));
        }
      }
      grid = std::move(next);
    }
    write_density_grid(sink, density, grid, density.discrete_support(o.tail_tol));
  });
  return kExitOk;
}

int cmd_sample(const SampleOptions& o, const Common& common, std::ostream& out) {
  const MixedDensity density = load_density(o.schema, o.mixture);
  Rng rng = substream(common.seed, {0x5a3d1e});
  const auto rows = density.sample(o.n, rng);
  emit(o.out, out, [&](std::ostream& sink) { write_dataset(sink, density.schema(), rows); });
  return kExitOk;
}

int cmd_divergence(const DivergenceOptions& o, const Common& common, std::ostream& out) {
  const MixedDensity f0 = load_density(o.schema, o.mixture);
  const MixedDensity f = load_density(o.schema_b.empty() ? o.schema : o.schema_b, o.mixture_b);
  DivergenceConfig cfg = o.cfg;
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  const DivergenceEstimate e = o.metric == "kl" ? kl_mixed(f0, f, cfg) : l1_mixed(f0, f, cfg);
  json j{{"metric", o.metric},
         {"value", std::isfinite(e.value) ? json(e.value) : json("inf")},
         {"std_error", e.std_error},
         {"method", to_string(e.method)},
         {"tail_mass_tol", e.tail_mass_tol},
         {"diagnostics", e.diagnostics}};
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_lemma(LemmaMetric metric, const LabOptions& o, const Common& common, std::ostream& out) {
  LemmaConfig cfg;
  cfg.quadrature_tol = o.quadrature_tol;
  cfg.divergence.seed = common.seed;
  const auto reports = run_lemma_suite(metric, o.random, common.seed, cfg, common.threads);
  emit(o.out, out, [&](std::ostream& sink) { write_lemma_reports(sink, reports); });
  const auto held = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.holds(); });
  if (!o.out.empty()) {
    out << held << '/' << reports.size() << " checks hold\n";
  }
  return held == static_cast<std::ptrdiff_t>(reports.size()) ? kExitOk : kExitFailure;
}

int cmd_contraction(const LabOptions& o, const Common& common, std::ostream& out) {
  ContractionConfig cfg;
  cfg.n_grid = o.n_grid;
  cfg.replications = o.replications;
  cfg.reference_log_power = o.log_power;
  cfg.sampler = o.dp;
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  const auto report = contraction_experiment(canonical_truth(), cfg);
  if (o.out.empty()) {
    write_contraction_records(out, report);
  } else {
    auto csv = open_out(o.out + ".csv");
    write_contraction_csv(csv, report);
    auto records = open_out(o.out + ".jsonl");
    write_contraction_records(records, report);
    out << "mean L1:";
    for (const double m : report.mean_l1) out << ' ' << m;
    out << "\ninversions: " << report.inversions() << '\n';
  }
  return kExitOk;
}

void add_dp_options(CLI::App* app, DPConfig& dp) {
  app->add_option("--alpha", dp.alpha, "DP concentration")->capture_default_str();
  app->add_option("--k-max", dp.k_max, "Stick-breaking truncation level")->capture_default_str();
  app->add_option("--iterations", dp.iterations, "Sweeps kept after burn-in, before thinning")->capture_default_str();
  app->add_option("--burn-in", dp.burn_in, "Discarded initial sweeps")->capture_default_str();
  app->add_option("--thin", dp.thin, "Keep every n-th sweep")->capture_default_str();
  app->add_option("--truncation-sweeps", dp.truncation_sweeps, "Gibbs sweeps per truncated-normal update")
      ->capture_default_str();
  app->add_option("--chain", dp.chain, "Chain index mixed into the random streams")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian density estimation for mixed-scale data via latent Gaussian mixtures", "mixscale"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random stream")
      ->envname("MIXSCALE_SEED")
      ->capture_default_str();
  app.add_option("--threads", common.threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Run the blocked Gibbs sampler on a CSV data set");
  fit_cmd->add_option("--schema", fit.schema, "Schema JSON file")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--data", fit.data, "CSV data file")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit.out, "Output directory")->capture_default_str();
  add_dp_options(fit_cmd, fit.dp);
  fit_cmd->add_option("--niw-kappa", fit.niw_kappa, "Override the base-measure mean precision factor");
  fit_cmd->add_option("--niw-dof", fit.niw_dof, "Override the base-measure degrees of freedom");
  fit_cmd->add_option("--tail-tol", fit.tail_tol, "Omitted count mass in the marginal table")->capture_default_str();

  DensityOptions dens;
  auto* dens_cmd = app.add_subcommand("density", "Evaluate a mixed density on a grid or at given points");
  dens_cmd->add_option("--schema", dens.schema, "Schema JSON file")->required()->check(CLI::ExistingFile);
  dens_cmd->add_option("--mixture", dens.mixture, "Mixture or draws file")->required()->check(CLI::ExistingFile);
  auto* points_opt = dens_cmd->add_option("--points", dens.points, "CSV of points to evaluate")->check(CLI::ExistingFile);
  dens_cmd->add_option("--out", dens.out, "Output CSV (default stdout)");
  dens_cmd->add_option("--grid-lo", dens.grid_lo, "Grid start on each continuous column")
      ->capture_default_str()->excludes(points_opt);
  dens_cmd->add_option("--grid-hi", dens.grid_hi, "Grid end on each continuous column")
      ->capture_default_str()->excludes(points_opt);
  dens_cmd->add_option("--grid-n", dens.grid_n, "Grid points per continuous column")
      ->capture_default_str()->excludes(points_opt);
  dens_cmd->add_option("--tail-tol", dens.tail_tol, "Omitted count mass on the grid")->capture_default_str();

  SampleOptions samp;
  auto* samp_cmd = app.add_subcommand("sample", "Draw rows from a mixed density");
  samp_cmd->add_option("--schema", samp.schema, "Schema JSON file")->required()->check(CLI::ExistingFile);
  samp_cmd->add_option("--mixture", samp.mixture, "Mixture or draws file")->required()->check(CLI::ExistingFile);
  samp_cmd->add_option("-n,--n", samp.n, "Number of rows")->capture_default_str();
  samp_cmd->add_option("--out", samp.out, "Output CSV (default stdout)");

  DivergenceOptions div;
  auto* div_cmd = app.add_subcommand("divergence", "KL divergence or L1 distance between two mixed densities");
  div_cmd->add_option("--schema", div.schema, "Schema of the first density")->required()->check(CLI::ExistingFile);
  div_cmd->add_option("--schema-b", div.schema_b, "Schema of the second density (default: same)")
      ->check(CLI::ExistingFile);
  div_cmd->add_option("--mixture", div.mixture, "First density (f0)")->required()->check(CLI::ExistingFile);
  div_cmd->add_option("--mixture-b", div.mixture_b, "Second density (f)")->required()->check(CLI::ExistingFile);
  div_cmd->add_option("--metric", div.metric, "kl or l1")->check(CLI::IsMember({"kl", "l1"}))->capture_default_str();
  div_cmd->add_option("--tail-tol", div.cfg.tail_tol, "Omitted count mass")->capture_default_str();
  div_cmd->add_option("--quad-rel-tol", div.cfg.quad_rel_tol, "Relative quadrature tolerance")->capture_default_str();
  div_cmd->add_option("--quad-abs-tol", div.cfg.quad_abs_tol, "Absolute quadrature tolerance")->capture_default_str();
  div_cmd->add_option("--mc-samples", div.cfg.mc_samples, "Monte Carlo draws above the quadrature limit")
      ->capture_default_str();
  div_cmd->add_option("--max-quadrature-dims", div.cfg.max_quadrature_p1, "Largest continuous dimension integrated")
      ->check(CLI::Range(0, 2))
      ->capture_default_str();

  LabOptions lab;
  auto* lab_cmd = app.add_subcommand("lab", "Numerical checks of the rounding map");
  lab_cmd->require_subcommand(1);
  auto* lemma1 = lab_cmd->add_subcommand("lemma1", "KL non-expansion on random instances");
  auto* lemma2 = lab_cmd->add_subcommand("lemma2", "L1 non-expansion on random instances");
  for (auto* sub : {lemma1, lemma2}) {
    sub->add_option("--random", lab.random, "Number of random instances")->capture_default_str();
    sub->add_option("--out", lab.out, "Report file, one JSON record per line (default stdout)");
    sub->add_option("--quadrature-tol", lab.quadrature_tol, "Allowance for quadrature error")->capture_default_str();
  }
  auto* contraction = lab_cmd->add_subcommand("contraction", "Posterior L1 error against sample size");
  contraction->add_option("--n-grid", lab.n_grid, "Sample sizes")->delimiter(',')->capture_default_str();
  contraction->add_option("--replications", lab.replications, "Replications per sample size")->capture_default_str();
  contraction->add_option("--log-power", lab.log_power, "Exponent t of the reference n^-1/2 (log n)^t")
      ->capture_default_str();
  contraction->add_option("--out", lab.out, "Output prefix for .csv and .jsonl (default: records to stdout)");
  lab.dp.k_max = 10;
  lab.dp.burn_in = 200;
  lab.dp.iterations = 200;
  lab.dp.thin = 10;
  add_dp_options(contraction, lab.dp);

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(e.get_name().empty() ? "" : e.get_name());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, common, out);
    if (*dens_cmd) return cmd_density(dens, out);
    if (*samp_cmd) return cmd_sample(samp, common, out);
    if (*div_cmd) return cmd_divergence(div, common, out);
    if (*lemma1) return cmd_lemma(LemmaMetric::kl, lab, common, out);
    if (*lemma2) return cmd_lemma(LemmaMetric::l1, lab, common, out);
    if (*contraction) return cmd_contraction(lab, common, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mixscale
