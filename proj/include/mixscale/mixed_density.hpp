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
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mixscale/gaussian.hpp"
#include "mixscale/latent_mixture.hpp"
#include "mixscale/rng.hpp"
#include "mixscale/schema.hpp"

namespace mixscale {

using Outcome = std::vector<std::int64_t>;

/// The mixed-scale density f = g(f*) induced by a latent mixture and a schema.
///
/// For each Gaussian component the integral over the cell A_{y2} factors into
/// the continuous-block marginal density at y1* times the probability that
/// the discrete block, conditioned on y1*, falls in the cell.
class MixedDensity {
 public:
  MixedDensity() = default;
  /// Throws DomainError if the schema is invalid or the latent dimension
  /// differs from p1 + p2.
  MixedDensity(MixedSchema schema, LatentMixture latent, BoxSettings box = {});

  [[nodiscard]] const MixedSchema& schema() const noexcept { return schema_; }
  [[nodiscard]] const LatentMixture& latent() const noexcept { return latent_; }
  [[nodiscard]] const BoxSettings& box_settings() const noexcept { return box_; }

  /// log f(y), Jacobian of h1^{-1} included. Throws DomainError for points
  /// outside the schema; AccuracyError from the box integrator propagates.
  [[nodiscard]] double log_density(const MixedPoint& y) const;

  /// log of the latent-coordinate form: sum_k w_k N_k(u) P_k(A_{y2} | u) with
  /// u = y1* already on the latent scale and no Jacobian. Divergences work in
  /// this form because Jacobians cancel.
  [[nodiscard]] double log_density_latent(const Eigen::VectorXd& u, std::span<const std::int64_t> y2) const;

  /// Marginal probability of a discrete outcome.
  [[nodiscard]] double discrete_probability(std::span<const std::int64_t> y2) const;

  /// Draws y* from the latent mixture and applies h.
  [[nodiscard]] std::vector<MixedPoint> sample(std::size_t n, Rng& rng) const;

  /// Largest level kept for each discrete coordinate so that the discrete
  /// mass above it is below tail_tol / p2 (finite columns: q_j - 1).
  [[nodiscard]] std::vector<std::int64_t> support_bounds(double tail_tol) const;

  /// All discrete outcomes up to support_bounds(tail_tol); the omitted
  /// discrete mass is below tail_tol.
  [[nodiscard]] std::vector<Outcome> discrete_support(double tail_tol) const;

 private:
  [[nodiscard]] BoxSettings box_for(std::span<const std::int64_t> y2, std::size_t component) const;

  MixedSchema schema_;
  LatentMixture latent_;
  BoxSettings box_;
  std::vector<double> log_weights_;
  std::vector<BlockConditional> blocks_;
  std::vector<GaussianComponent> discrete_marginals_;
};

/// Cartesian product of {0..max_levels[j]}, last coordinate fastest.
[[nodiscard]] std::vector<Outcome> enumerate_outcomes(std::span<const std::int64_t> max_levels);

/// Writes "y1 columns, y2 columns, log_density, density" rows, one per
/// (continuous grid point, outcome). Column names come from the schema.
void write_density_grid(std::ostream& out, const MixedDensity& density, const std::vector<Eigen::VectorXd>& grid,
                        const std::vector<Outcome>& outcomes);

}  // namespace mixscale
