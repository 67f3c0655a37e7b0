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
#include <string>
#include <vector>

#include "mixscale/mixed_density.hpp"
#include "mixscale/quadrature.hpp"

namespace mixscale {

enum class DivergenceMethod { exact_sum_quadrature, monte_carlo };

[[nodiscard]] std::string to_string(DivergenceMethod method);

struct DivergenceConfig {
  /// Omitted discrete mass allowed per density when counts are unbounded.
  double tail_tol = 1e-6;
  double quad_rel_tol = 1e-8;
  double quad_abs_tol = 1e-10;
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 0;
  /// Largest p1 handled by quadrature; above it Monte Carlo is used.
  Eigen::Index max_quadrature_p1 = 2;
  /// Quadrature over the continuous block outside, sum over outcomes inside.
  bool sum_inside = false;
  unsigned threads = 1;
  /// Half-width of the integration box in component standard deviations.
  double box_sigmas = 8.0;
};

struct DivergenceEstimate {
  double value = 0.0;
  /// Quadrature error plus omitted tail mass on the deterministic path,
  /// Monte Carlo standard error on the stochastic path.
  double std_error = 0.0;
  DivergenceMethod method = DivergenceMethod::exact_sum_quadrature;
  double tail_mass_tol = 0.0;
  std::vector<std::string> diagnostics;
};

/// d_KL(f0, f) = sum over y2 of the integral over y1 of f0 log(f0 / f).
/// Reports +inf with a diagnostic when f vanishes where f0 has mass.
/// Throws SchemaMismatch when the outcome spaces differ.
[[nodiscard]] DivergenceEstimate kl_mixed(const MixedDensity& f0, const MixedDensity& f,
                                          const DivergenceConfig& cfg = {});

/// ||f0 - f|| = sum over y2 of the integral over y1 of |f0 - f|, in [0, 2].
[[nodiscard]] DivergenceEstimate l1_mixed(const MixedDensity& f0, const MixedDensity& f,
                                          const DivergenceConfig& cfg = {});

/// L1 distance between the empirical discrete frequencies of `data` and the
/// discrete marginal of f. A goodness-of-fit proxy: continuous coordinates
/// are ignored.
[[nodiscard]] DivergenceEstimate empirical_l1(const std::vector<MixedPoint>& data, const MixedDensity& f,
                                              const DivergenceConfig& cfg = {});

}  // namespace mixscale
