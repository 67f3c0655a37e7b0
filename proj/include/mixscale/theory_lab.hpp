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

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mixscale/divergences.hpp"
#include "mixscale/latent_mixture.hpp"
#include "mixscale/mixed_density.hpp"
#include "mixscale/sampler.hpp"

namespace mixscale {

enum class LemmaMetric { kl, l1 };

[[nodiscard]] std::string to_string(LemmaMetric metric);

struct LemmaConfig {
  DivergenceConfig divergence;
  BoxSettings box;
  /// Flat allowance for quadrature error beyond the integrators' own estimates.
  double quadrature_tol = 1e-6;
};

/// Latent divergence d(f0*, f*) against mixed divergence d(g(f0*), g(f*)).
struct LemmaCheckReport {
  LemmaMetric metric = LemmaMetric::kl;
  DivergenceEstimate latent;
  DivergenceEstimate mixed;
  std::string instance;

  [[nodiscard]] double slack() const { return latent.value - mixed.value; }
  /// quadrature_tol + deterministic error estimates + 3 combined MC standard errors.
  double tolerance = 0.0;
  [[nodiscard]] bool holds() const { return slack() >= -tolerance; }
};

/// g does not expand KL divergence: d_KL(g(f0*), g(f*)) <= d_KL(f0*, f*).
[[nodiscard]] LemmaCheckReport check_lemma1(const LatentMixture& truth, const LatentMixture& other,
                                            const MixedSchema& schema, const LemmaConfig& cfg = {});

/// g does not expand L1 distance.
[[nodiscard]] LemmaCheckReport check_lemma2_l1(const LatentMixture& truth, const LatentMixture& other,
                                               const MixedSchema& schema, const LemmaConfig& cfg = {});

struct LemmaInstance {
  MixedSchema schema;
  LatentMixture truth;
  LatentMixture other;
  std::string description;
};

/// Random mixed schema (p <= max_p, at least one discrete column drawn from
/// binary / 3-level categorical / count) with a pair of random latent
/// mixtures; half of the pairs are perturbations of each other.
[[nodiscard]] LemmaInstance random_lemma_instance(Rng& rng, int max_p = 3);

/// `count` random instances, instance i drawn from substream (seed, i).
[[nodiscard]] std::vector<LemmaCheckReport> run_lemma_suite(LemmaMetric metric, std::size_t count,
                                                            std::uint64_t seed, const LemmaConfig& cfg = {},
                                                            unsigned threads = 1);

/// One JSON object per line.
void write_lemma_reports(std::ostream& out, const std::vector<LemmaCheckReport>& reports);

struct ContractionConfig {
  std::vector<std::size_t> n_grid{100, 400, 1600};
  int replications = 5;
  DPConfig sampler;
  DivergenceConfig divergence;
  /// Base measure; derived from each simulated data set when absent.
  std::optional<NIWParams> niw;
  /// Exponent t of the reference curve n^{-1/2} (log n)^t.
  double reference_log_power = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ReplicationRecord {
  std::size_t n = 0;
  int replication = 0;
  double l1 = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct ContractionReport {
  std::vector<std::size_t> n_grid;
  std::vector<ReplicationRecord> records;
  std::vector<double> mean_l1;
  std::vector<double> sd_l1;
  /// Least-squares slope of log mean L1 against log n.
  double slope = 0.0;
  double reference_log_power = 1.0;

  /// n^{-1/2} (log n)^t at each grid point, scaled to meet mean_l1 at the first.
  [[nodiscard]] std::vector<double> reference_curve() const;
  /// Number of grid steps where the mean L1 error increases.
  [[nodiscard]] int inversions() const;
};

/// Simulate from the truth at each sample size, fit, and measure
/// l1_mixed(predictive, truth). Failed replications are recorded, not thrown.
[[nodiscard]] ContractionReport contraction_experiment(const MixedDensity& truth, const ContractionConfig& cfg);

/// One continuous (identity), one binary and one count coordinate driven by a
/// single correlated Gaussian.
[[nodiscard]] MixedDensity canonical_truth();

/// CSV with one row per replication.
void write_contraction_csv(std::ostream& out, const ContractionReport& report);
/// One JSON object per replication plus a summary record.
void write_contraction_records(std::ostream& out, const ContractionReport& report);

}  // namespace mixscale
