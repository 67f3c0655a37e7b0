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

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mixscale/gaussian.hpp"
#include "mixscale/rng.hpp"

namespace mixscale {

/// Finite weighted mixture of Gaussians on R^p; the computational stand-in
/// for a latent density f*.
class LatentMixture {
 public:
  LatentMixture() = default;
  /// Weights must be nonnegative and sum to 1 within 1e-9; they are
  /// renormalized exactly. Throws DomainError otherwise.
  LatentMixture(std::vector<double> weights, std::vector<GaussianComponent> components);

  static LatentMixture single(GaussianComponent component);

  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  [[nodiscard]] Eigen::Index dimension() const noexcept { return components_.front().dimension(); }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  [[nodiscard]] const GaussianComponent& component(std::size_t k) const { return components_[k]; }

  /// log sum_k w_k N(x; mu_k, Sigma_k), by log-sum-exp.
  [[nodiscard]] double log_density(const Eigen::VectorXd& x) const;

  /// Ancestral sampling: component index, then a draw from it.
  [[nodiscard]] Eigen::VectorXd sample(Rng& rng) const;
  [[nodiscard]] std::vector<Eigen::VectorXd> sample(std::size_t n, Rng& rng) const;

  /// Moments of the mixture.
  [[nodiscard]] Eigen::VectorXd mean() const;
  [[nodiscard]] Eigen::MatrixXd covariance() const;

 private:
  std::vector<double> weights_;
  std::vector<GaussianComponent> components_;
};

/// Uniform mixture of the given mixtures, flattened (weights divided by count).
[[nodiscard]] LatentMixture flatten(const std::vector<LatentMixture>& mixtures);

/// One-line text form: "K p" then per component the weight, p mean entries
/// and p*p row-major covariance entries, all space separated with 17
/// significant digits.
[[nodiscard]] std::string serialize(const LatentMixture& mixture);
/// Inverse of serialize; throws DomainError on malformed input.
[[nodiscard]] LatentMixture parse_mixture(std::string_view line);

/// Every non-empty line of a draws file.
[[nodiscard]] std::vector<LatentMixture> read_mixtures(const std::string& path);
void write_mixtures(const std::string& path, const std::vector<LatentMixture>& mixtures);

}  // namespace mixscale
