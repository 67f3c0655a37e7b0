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

#include "mixscale/theory_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mixscale/errors.hpp"
#include "mixscale/parallel.hpp"

namespace mixscale {
namespace {

double mc_variance(const DivergenceEstimate& e) {
  return e.method == DivergenceMethod::monte_carlo ? e.std_error * e.std_error : 0.0;
}

double deterministic_error(const DivergenceEstimate& e) {
  return e.method == DivergenceMethod::exact_sum_quadrature ? e.std_error : 0.0;
}

LemmaCheckReport check(LemmaMetric metric, const LatentMixture& truth, const LatentMixture& other,
                       const MixedSchema& schema, const LemmaConfig& cfg) {
  const MixedSchema latent_schema = identity_schema(truth.dimension());
  const MixedDensity latent0(latent_schema, truth, cfg.box);
  const MixedDensity latent1(latent_schema, other, cfg.box);
  const MixedDensity mixed0(schema, truth, cfg.box);
  const MixedDensity mixed1(schema, other, cfg.box);

  LemmaCheckReport report;
  report.metric = metric;
  if (metric == LemmaMetric::kl) {
    report.latent = kl_mixed(latent0, latent1, cfg.divergence);
    report.mixed = kl_mixed(mixed0, mixed1, cfg.divergence);
  } else {
    report.latent = l1_mixed(latent0, latent1, cfg.divergence);
    report.mixed = l1_mixed(mixed0, mixed1, cfg.divergence);
  }
  report.tolerance = cfg.quadrature_tol + deterministic_error(report.latent) + deterministic_error(report.mixed) +
                     3.0 * std::sqrt(mc_variance(report.latent) + mc_variance(report.mixed));
  return report;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Column random_discrete(Rng& rng, const std::string& name) {
  switch (uniform_int(rng, 0, 2)) {
    case 0:
      return Column::binary(name, uniform(rng, -1.0, 1.0));
    case 1: {
      const double a = uniform(rng, -1.5, 0.5);
      return Column::categorical(name, 3, {a, a + uniform(rng, 0.2, 1.5)});
    }
    default:
      return Column::count(name, uniform(rng, -0.5, 0.5), uniform(rng, 0.5, 1.5));
  }
}

Column random_continuous(Rng& rng, const std::string& name) {
  switch (uniform_int(rng, 0, 2)) {
    case 0:
      return Column::continuous(name);
    case 1: {
      const double scale = uniform(rng, 0.5, 2.0) * (uniform_int(rng, 0, 1) == 0 ? 1.0 : -1.0);
      return Column::continuous(name, MonotoneMap::affine(scale, uniform(rng, -1.0, 1.0)));
    }
    default:
      return Column::continuous(name, MonotoneMap::log_exp());
  }
}

GaussianComponent random_component(Rng& rng, Eigen::Index p) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd mean(p);
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index i = 0; i < p; ++i) mean(i) = z(rng);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = 0.7 * z(rng);
  Eigen::MatrixXd cov = a * a.transpose() / static_cast<double>(p);
  cov.diagonal().array() += 0.3;
  return {mean, 0.5 * (cov + cov.transpose())};
}

std::vector<double> random_weights(Rng& rng, std::size_t k) {
  std::gamma_distribution<double> g(2.0, 1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) total += (x = g(rng));
  for (auto& x : w) x /= total;
  return w;
}

LatentMixture random_mixture(Rng& rng, Eigen::Index p) {
  const auto k = static_cast<std::size_t>(uniform_int(rng, 1, 3));
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < k; ++i) comps.push_back(random_component(rng, p));
  return {random_weights(rng, k), std::move(comps)};
}

LatentMixture perturb(Rng& rng, const LatentMixture& base) {
  std::normal_distribution<double> z(0.0, 0.3);
  std::vector<GaussianComponent> comps;
  for (const auto& c : base.components()) {
    Eigen::VectorXd mean = c.mean();
    for (Eigen::Index i = 0; i < mean.size(); ++i) mean(i) += z(rng);
    comps.emplace_back(mean, c.covariance() * uniform(rng, 0.7, 1.4));
  }
  std::vector<double> w = base.weights();
  double total = 0.0;
  for (auto& x : w) total += (x *= uniform(rng, 0.7, 1.3));
  for (auto& x : w) x /= total;
  return {std::move(w), std::move(comps)};
}

std::string describe(const MixedSchema& schema) {
  std::ostringstream out;
  for (std::size_t j = 0; j < schema.columns().size(); ++j) {
    if (j) out << ',';
    out << to_string(schema.columns()[j].kind);
  }
  return out.str();
}

nlohmann::json estimate_json(const DivergenceEstimate& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"method", to_string(e.method)},
          {"tail_mass_tol", e.tail_mass_tol},
          {"diagnostics", e.diagnostics}};
}

}  // namespace

std::string to_string(LemmaMetric metric) { return metric == LemmaMetric::kl ? "kl" : "l1"; }

LemmaCheckReport check_lemma1(const LatentMixture& truth, const LatentMixture& other, const MixedSchema& schema,
                              const LemmaConfig& cfg) {
  return check(LemmaMetric::kl, truth, other, schema, cfg);
}

LemmaCheckReport check_lemma2_l1(const LatentMixture& truth, const LatentMixture& other, const MixedSchema& schema,
                                 const LemmaConfig& cfg) {
  return check(LemmaMetric::l1, truth, other, schema, cfg);
}

LemmaInstance random_lemma_instance(Rng& rng, int max_p) {
  if (max_p < 1) throw DomainError("random_lemma_instance: max_p must be at least 1");
  const int p = uniform_int(rng, 1, max_p);
  const int p2 = uniform_int(rng, 1, p);
  std::vector<Column> columns;
  for (int j = 0; j < p - p2; ++j) columns.push_back(random_continuous(rng, "x" + std::to_string(j)));
  for (int j = 0; j < p2; ++j) columns.push_back(random_discrete(rng, "y" + std::to_string(j)));
  std::shuffle(columns.begin(), columns.end(), rng);

  LemmaInstance instance{MixedSchema(std::move(columns)), {}, {}, {}};
  instance.truth = random_mixture(rng, p);
  const bool nearby = uniform_int(rng, 0, 1) == 0;
  instance.other = nearby ? perturb(rng, instance.truth) : random_mixture(rng, p);
  instance.description = describe(instance.schema) + (nearby ? " perturbed" : " independent") +
                         " K0=" + std::to_string(instance.truth.size()) +
                         " K1=" + std::to_string(instance.other.size());
  return instance;
}

std::vector<LemmaCheckReport> run_lemma_suite(LemmaMetric metric, std::size_t count, std::uint64_t seed,
                                              const LemmaConfig& cfg, unsigned threads) {
  std::vector<LemmaCheckReport> reports(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng = substream(seed, {0x1e33a, i});
    const LemmaInstance inst = random_lemma_instance(rng);
    LemmaConfig local = cfg;
    local.divergence.seed = substream_seed(cfg.divergence.seed, {seed, i});
    local.divergence.threads = 1;
    reports[i] = check(metric, inst.truth, inst.other, inst.schema, local);
    reports[i].instance = inst.description;
  });
  return reports;
}

void write_lemma_reports(std::ostream& out, const std::vector<LemmaCheckReport>& reports) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    nlohmann::json j{{"index", i},
                     {"metric", to_string(r.metric)},
                     {"instance", r.instance},
                     {"latent", estimate_json(r.latent)},
                     {"mixed", estimate_json(r.mixed)},
                     {"slack", r.slack()},
                     {"tolerance", r.tolerance},
                     {"holds", r.holds()}};
    out << j.dump() << '\n';
  }
}

std::vector<double> ContractionReport::reference_curve() const {
  std::vector<double> curve;
  if (n_grid.empty() || mean_l1.empty()) return curve;
  const auto raw = [&](std::size_t n) {
    const double x = static_cast<double>(n);
    return std::pow(x, -0.5) * std::pow(std::log(x), reference_log_power);
  };
  const double scale = mean_l1.front() / raw(n_grid.front());
  for (std::size_t n : n_grid) curve.push_back(scale * raw(n));
  return curve;
}

int ContractionReport::inversions() const {
  int count = 0;
  for (std::size_t i = 1; i < mean_l1.size(); ++i)
    if (!(mean_l1[i] <= mean_l1[i - 1])) ++count;
  return count;
}

ContractionReport contraction_experiment(const MixedDensity& truth, const ContractionConfig& cfg) {
  if (cfg.n_grid.empty() || cfg.replications < 3)
    throw DomainError("contraction_experiment: need a sample-size grid and at least three replications");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (!(cfg.n_grid[i - 1] < cfg.n_grid[i]))
      throw DomainError("contraction_experiment: sample sizes must be strictly increasing");
  if (cfg.n_grid.front() < 1) throw DomainError("contraction_experiment: sample sizes must be positive");
  if (auto problems = cfg.sampler.problems(); !problems.empty())
    throw DomainError("contraction_experiment: " + problems.front());

  ContractionReport report;
  report.n_grid = cfg.n_grid;
  report.reference_log_power = cfg.reference_log_power;
  const auto reps = static_cast<std::size_t>(cfg.replications);
  report.records.resize(cfg.n_grid.size() * reps);

  parallel_for(report.records.size(), cfg.threads, [&](std::size_t job) {
    ReplicationRecord& rec = report.records[job];
    rec.n = cfg.n_grid[job / reps];
    rec.replication = static_cast<int>(job % reps);
    const auto start = std::chrono::steady_clock::now();
    try {
      Rng rng = substream(cfg.seed, {0xc0417, rec.n, static_cast<std::uint64_t>(rec.replication)});
      const auto data = truth.sample(rec.n, rng);
      DPConfig sampler = cfg.sampler;
      sampler.seed = substream_seed(cfg.seed, {0x5a3b1e, rec.n, static_cast<std::uint64_t>(rec.replication)});
      sampler.threads = 1;
      const PosteriorDraws draws = cfg.niw ? run_sampler(data, truth.schema(), *cfg.niw, sampler)
                                           : run_sampler(data, truth.schema(), sampler);
      rec.draws = draws.draws.size();
      const MixedDensity fitted = predictive_density(draws, truth.box_settings());
      DivergenceConfig div = cfg.divergence;
      div.threads = 1;
      const DivergenceEstimate l1 = l1_mixed(fitted, truth, div);
      rec.l1 = l1.value;
      rec.std_error = l1.std_error;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  std::vector<double> xs, ys;
  for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
    double sum = 0.0, sum_sq = 0.0;
    int ok = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& rec = report.records[g * reps + r];
      if (rec.failed) continue;
      sum += rec.l1;
      sum_sq += rec.l1 * rec.l1;
      ++ok;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double mean = ok ? sum / ok : nan;
    report.mean_l1.push_back(mean);
    report.sd_l1.push_back(ok > 1 ? std::sqrt(std::max(0.0, (sum_sq - ok * mean * mean) / (ok - 1))) : nan);
    if (ok && mean > 0.0) {
      xs.push_back(std::log(static_cast<double>(cfg.n_grid[g])));
      ys.push_back(std::log(mean));
    }
  }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    report.slope = sxy / sxx;
  } else {
    report.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

MixedDensity canonical_truth() {
  MixedSchema schema({Column::continuous("x"), Column::binary("b"), Column::count("c")});
  Eigen::Vector3d mean(0.5, 0.3, 1.2);
  Eigen::Matrix3d cov;
  cov << 1.0, 0.4, 0.3,  //
      0.4, 1.0, 0.2,     //
      0.3, 0.2, 1.0;
  return {std::move(schema), LatentMixture::single(GaussianComponent(mean, cov))};
}

void write_contraction_csv(std::ostream& out, const ContractionReport& report) {
  out << "n,replication,l1,std_error,draws,seconds,status\n";
  for (const auto& r : report.records) {
    out << r.n << ',' << r.replication << ',' << r.l1 << ',' << r.std_error << ',' << r.draws << ',' << r.seconds
        << ',' << (r.failed ? "failed" : "ok") << '\n';
  }
}

void write_contraction_records(std::ostream& out, const ContractionReport& report) {
  for (const auto& r : report.records) {
    nlohmann::json j{{"n", r.n},         {"replication", r.replication}, {"l1", r.l1},
                     {"std_error", r.std_error}, {"draws", r.draws},     {"seconds", r.seconds},
                     {"failed", r.failed}};
    if (r.failed) j["error"] = r.error;
    out << j.dump() << '\n';
  }
  const auto ref = report.reference_curve();
  nlohmann::json summary{{"summary", true},
                         {"n_grid", report.n_grid},
                         {"mean_l1", report.mean_l1},
                         {"sd_l1", report.sd_l1},
                         {"reference", ref},
                         {"reference_log_power", report.reference_log_power},
                         {"slope", report.slope},
                         {"inversions", report.inversions()}};
  out << summary.dump() << '\n';
}

}  // namespace mixscale
