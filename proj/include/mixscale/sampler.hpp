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
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixscale/gaussian.hpp"
#include "mixscale/latent_mixture.hpp"
#include "mixscale/mixed_density.hpp"
#include "mixscale/rng.hpp"
#include "mixscale/schema.hpp"

namespace mixscale {

/// Normal-inverse-Wishart base measure: Sigma ~ IW(dof, scale),
/// mu | Sigma ~ N(mean, Sigma / kappa).
struct NIWParams {
  Eigen::VectorXd mean;
  double kappa = 0.01;
  double dof = 0.0;
  Eigen::MatrixXd scale;

  /// Empty when the parameters define a proper prior.
  [[nodiscard]] std::vector<std::string> problems() const;
};

/// Closed-form conjugate update given the rows of `points` (n x p).
[[nodiscard]] NIWParams niw_posterior(const NIWParams& prior, const Eigen::MatrixXd& points);

/// Draw (mu, Sigma) from an NIW distribution. SPD repair by jitter.
[[nodiscard]] GaussianComponent sample_niw(const NIWParams& niw, Rng& rng);

/// Weakly informative defaults from initial latents (n x p): mean of the
/// latents, kappa 0.01, dof p + 2, diagonal of their covariance.
[[nodiscard]] NIWParams default_niw(const Eigen::MatrixXd& latents);

struct DPConfig {
  double alpha = 1.0;
  int k_max = 30;
  /// Coordinate sweeps inside each truncated-normal update.
  int truncation_sweeps = 4;
  /// Recorded sweeps after burn-in (before thinning).
  int iterations = 1000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  unsigned threads = 1;

  [[nodiscard]] std::vector<std::string> problems() const;
};

/// Observations preprocessed for the sampler: continuous latents, cells and
/// a stable key per row (drives the per-row random substreams).
struct AugmentedData {
  Eigen::MatrixXd continuous_latent;  // n x p1
  std::vector<Cell> cells;
  std::vector<std::uint64_t> keys;
  [[nodiscard]] std::size_t size() const noexcept { return cells.size(); }
};

/// Validates every row (throws DomainError listing bad row indices) and
/// orders rows by key so results do not depend on input order. Keys
/// default to the row index.
[[nodiscard]] AugmentedData augment(const std::vector<MixedPoint>& data, const MixedSchema& schema,
                                    std::vector<std::uint64_t> keys = {});

struct SamplerState {
  Eigen::MatrixXd latents;  // n x p, continuous block first
  std::vector<int> allocation;
  std::vector<double> weights;
  std::vector<GaussianComponent> clusters;
  std::uint64_t iteration = 0;

  [[nodiscard]] LatentMixture mixture() const;
  [[nodiscard]] std::vector<int> occupancy() const;
};

/// Continuous latents exact, discrete latents at capped cell midpoints,
/// allocations by k-means++ seeding plus a few Lloyd steps, sticks from the
/// prior, clusters from their NIW conditional.
[[nodiscard]] SamplerState init_state(const AugmentedData& data, const MixedSchema& schema, const NIWParams& niw,
                                      const DPConfig& cfg);

/// Initial latents only (used to derive default NIW parameters).
[[nodiscard]] Eigen::MatrixXd initial_latents(const AugmentedData& data, const MixedSchema& schema);

/// One blocked-Gibbs sweep: truncated redraw of discrete latents,
/// allocations, stick weights, cluster parameters.
void gibbs_sweep(SamplerState& state, const AugmentedData& data, const MixedSchema& schema, const NIWParams& niw,
                 const DPConfig& cfg);

/// Throws NumericalError if some discrete latent has left its cell or some
/// continuous latent has moved.
void check_state(const SamplerState& state, const AugmentedData& data, const MixedSchema& schema);

struct SweepDiagnostics {
  std::uint64_t iteration = 0;
  double log_joint = 0.0;
  int occupied = 0;
};

struct PosteriorDraws {
  std::vector<LatentMixture> draws;
  MixedSchema schema;
  DPConfig config;
  NIWParams niw;
  std::string data_digest;
  std::vector<SweepDiagnostics> trace;
};

/// Burn-in, then `iterations` sweeps keeping every `thin`-th state.
/// `on_sweep` (optional) sees every diagnostics record as it is produced.
[[nodiscard]] PosteriorDraws run_sampler(const std::vector<MixedPoint>& data, const MixedSchema& schema,
                                         const NIWParams& niw, const DPConfig& cfg,
                                         std::vector<std::uint64_t> row_keys = {},
                                         const std::function<void(const SweepDiagnostics&)>& on_sweep = {});

/// Same, with NIW defaults derived from the initial latents. Needs data.
[[nodiscard]] PosteriorDraws run_sampler(const std::vector<MixedPoint>& data, const MixedSchema& schema,
                                         const DPConfig& cfg);

/// Posterior-mean density: uniform mixture over the draws.
[[nodiscard]] MixedDensity predictive_density(const PosteriorDraws& draws, BoxSettings box = {});

}  // namespace mixscale
