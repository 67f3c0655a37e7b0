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

#include <cmath>
#include <limits>
#include <sstream>

#include "mixscale/errors.hpp"
#include "mixscale/gaussian.hpp"
#include "mixscale/normal.hpp"

namespace mixscale {

namespace {

constexpr double kTailStart = 6.0;

// Z | Z in [lower, upper) with lower >= kTailStart.
double sample_far_tail(double lower, double upper, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  if (rate * (upper - lower) < std::numbers::ln2) {
    // Narrow slab: uniform proposal, acceptance at least exp(-(upper^2 - lower^2) / 2).
    while (true) {
      const double x = lower + (upper - lower) * unif(rng);
      if (std::log(unif(rng)) <= -0.5 * (x - lower) * (x + lower)) {
        return x;
      }
    }
  }
  std::exponential_distribution<double> expo(rate);
  while (true) {
    const double x = lower + expo(rng);
    if (x >= upper) {
      continue;
    }
    const double gap = x - rate;
    if (std::log(unif(rng)) <= -0.5 * gap * gap) {
      return x;
    }
  }
}

double clamp_half_open(double x, double lower, double upper) {
  if (x < lower) {
    return lower;
  }
  if (x >= upper) {
    return std::nextafter(upper, -std::numeric_limits<double>::infinity());
  }
  return x;
}

}  // namespace

double sample_truncated_standard_normal(double lower, double upper, Rng& rng) {
  if (!(lower < upper)) {
    throw DomainError("truncated normal: empty interval");
  }
  if (lower >= kTailStart) {
    return clamp_half_open(sample_far_tail(lower, upper, rng), lower, upper);
  }
  if (upper <= -kTailStart) {
    return clamp_half_open(-sample_far_tail(-upper, -lower, rng), lower, upper);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double x = 0.0;
  if (lower > 0.0) {
    const double hi = normal::sf(lower);
    const double lo = normal::sf(upper);
    x = normal::upper_quantile(hi - u * (hi - lo));
  } else {
    const double lo = normal::cdf(lower);
    const double hi = normal::cdf(upper);
    x = normal::quantile(lo + u * (hi - lo));
  }
  return clamp_half_open(x, lower, upper);
}

double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng) {
  const double z = sample_truncated_standard_normal((lower - mean) / sd, (upper - mean) / sd, rng);
  return clamp_half_open(mean + sd * z, lower, upper);
}

Eigen::VectorXd sample_truncated(const GaussianComponent& comp, const Cell& cell, const Eigen::VectorXd& init,
                                 int sweeps, Rng& rng) {
  return sample_truncated(comp, comp.mean(), cell, init, sweeps, rng);
}

Eigen::VectorXd sample_truncated(const GaussianComponent& comp, const Eigen::VectorXd& mean, const Cell& cell,
                                 const Eigen::VectorXd& init, int sweeps, Rng& rng) {
  const auto p = comp.dimension();
  if (cell.dimension() != p || init.size() != p || mean.size() != p) {
    throw DomainError("sample_truncated: dimension mismatch");
  }
  if (sweeps < 1) {
    throw DomainError("sample_truncated: sweeps must be at least 1");
  }
  if (!cell.contains(init)) {
    throw DomainError("sample_truncated: initial state lies outside the cell");
  }
  const Eigen::MatrixXd l_inv =
      comp.cholesky().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd precision = l_inv.transpose() * l_inv;
  const auto& mu = mean;
  Eigen::VectorXd x = init;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double pull = 0.0;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k != j) {
          pull += precision(j, k) * (x[k] - mu[k]);
        }
      }
      const double cond_mean = mu[j] - pull / precision(j, j);
      const double cond_sd = 1.0 / std::sqrt(precision(j, j));
      x[j] = sample_truncated_normal(cond_mean, cond_sd, cell.lower[j], cell.upper[j], rng);
    }
  }
  return x;
}

}  // namespace mixscale
