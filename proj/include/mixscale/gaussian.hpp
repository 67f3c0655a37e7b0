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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mixscale/rng.hpp"
#include "mixscale/schema.hpp"

namespace mixscale {

/// Lower Cholesky factor of an SPD matrix. On failure adds
/// 1e-8 * trace / p to the diagonal and retries, up to 3 times.
struct JitteredCholesky {
  Eigen::MatrixXd factor;
  Eigen::MatrixXd repaired;  // the matrix actually factored
  int retries = 0;
};

/// Throws NumericalError when the matrix stays indefinite after the retries.
[[nodiscard]] JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& covariance);

/// Multivariate normal with a cached lower Cholesky factor.
class GaussianComponent {
 public:
  GaussianComponent() = default;
  /// Throws NumericalError if the covariance is asymmetric or not SPD.
  GaussianComponent(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  [[nodiscard]] Eigen::Index dimension() const noexcept { return mean_.size(); }
  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  [[nodiscard]] const Eigen::MatrixXd& cholesky() const noexcept { return cholesky_; }
  [[nodiscard]] double log_determinant() const noexcept { return log_det_; }

  [[nodiscard]] double log_density(const Eigen::VectorXd& x) const;

  /// Gaussian of the coordinates in `indices` (in the given order).
  [[nodiscard]] GaussianComponent marginal(std::span<const Eigen::Index> indices) const;

  /// Exact conditional of the remaining coordinates given x[observed] = values.
  /// Throws NumericalError (with a condition-number estimate) when the observed
  /// block is numerically singular.
  [[nodiscard]] GaussianComponent condition(std::span<const Eigen::Index> observed,
                                            const Eigen::VectorXd& values) const;

  /// mean + L z with z iid standard normal.
  [[nodiscard]] Eigen::VectorXd sample(Rng& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cholesky_;
  double log_det_ = 0.0;
};

/// Precomputed split of a component into a leading block (size `lead`) and
/// the trailing block, for repeated conditioning of the trailing block on
/// different leading values.
class BlockConditional {
 public:
  BlockConditional() = default;
  BlockConditional(const GaussianComponent& joint, Eigen::Index lead);

  [[nodiscard]] Eigen::Index lead() const noexcept { return lead_; }
  [[nodiscard]] const GaussianComponent& leading_marginal() const noexcept { return leading_; }
  /// Trailing-block Gaussian given the leading values (covariance is shared).
  [[nodiscard]] Eigen::VectorXd trailing_mean(const Eigen::VectorXd& leading_values) const;
  [[nodiscard]] const GaussianComponent& trailing_at_zero_offset() const noexcept { return trailing_; }
  [[nodiscard]] GaussianComponent trailing(const Eigen::VectorXd& leading_values) const;

 private:
  Eigen::Index lead_ = 0;
  GaussianComponent leading_;
  GaussianComponent trailing_;  // conditional covariance, mean = trailing marginal mean
  Eigen::VectorXd leading_mean_;
  Eigen::MatrixXd regression_;  // Sigma_tl Sigma_ll^{-1}
};

struct BoxSettings {
  /// Target standard error for the quasi-Monte Carlo route.
  double accuracy = 1e-6;
  /// Total integrand evaluations allowed across all random shifts.
  std::size_t max_points = 100000;
  int shifts = 10;
  std::uint64_t seed = 0;
  /// Deterministic routes for two and three dimensions instead of the lattice rule.
  bool exact_low_dim = true;
};

struct BoxEstimate {
  double probability = 0.0;
  double std_error = 0.0;
};

/// P(X in cell) for X ~ comp. One dimension is exact; two dimensions use a
/// deterministic bivariate-normal algorithm and three dimensions a 1-D
/// quadrature over it, unless disabled; otherwise randomized lattice QMC after Cholesky variable separation. Throws
/// AccuracyError when the QMC budget is exhausted above the target accuracy.
[[nodiscard]] BoxEstimate box_probability(const GaussianComponent& comp, const Cell& cell,
                                          const BoxSettings& settings = {});

/// Same, with the mean of `shape` replaced by `mean`; reuses the cached factor.
[[nodiscard]] BoxEstimate box_probability(const GaussianComponent& shape, const Eigen::VectorXd& mean,
                                          const Cell& cell, const BoxSettings& settings = {});

/// P(X > h, Y > k) for a standard bivariate normal with correlation r.
[[nodiscard]] double bivariate_upper_orthant(double h, double k, double r);

/// Standard normal truncated to [lower, upper); lower < upper, either may be
/// infinite. Inverse-CDF in the bulk, exponential-proposal rejection when the
/// interval lies beyond 6 standard deviations.
[[nodiscard]] double sample_truncated_standard_normal(double lower, double upper, Rng& rng);

/// N(mean, sd^2) truncated to [lower, upper).
[[nodiscard]] double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng);

/// Final state of `sweeps` coordinate-wise Gibbs sweeps targeting comp
/// restricted to cell, started at init. Throws DomainError if init is
/// outside the cell.
[[nodiscard]] Eigen::VectorXd sample_truncated(const GaussianComponent& comp, const Cell& cell,
                                               const Eigen::VectorXd& init, int sweeps, Rng& rng);

/// Same, with the mean of `shape` replaced by `mean`.
[[nodiscard]] Eigen::VectorXd sample_truncated(const GaussianComponent& shape, const Eigen::VectorXd& mean,
                                               const Cell& cell, const Eigen::VectorXd& init, int sweeps, Rng& rng);

}  // namespace mixscale
