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

#include "mixscale/mixed_density.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>

#include "mixscale/errors.hpp"
#include "mixscale/normal.hpp"

namespace mixscale {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::int64_t kMaxLevel = 10'000'000;

std::uint64_t outcome_key(std::span<const std::int64_t> y2) {
  std::uint64_t h = 0x51ed270b7a1c2f3dULL;
  for (const auto v : y2) {
    h = mix64(h ^ static_cast<std::uint64_t>(v));
  }
  return h;
}

double log_sum_exp(std::span<const double> terms) {
  double peak = kNegInf;
  for (const double t : terms) {
    peak = std::max(peak, t);
  }
  if (!std::isfinite(peak)) {
    return peak;
  }
  double acc = 0.0;
  for (const double t : terms) {
    acc += std::exp(t - peak);
  }
  return peak + std::log(acc);
}

}  // namespace

MixedDensity::MixedDensity(MixedSchema schema, LatentMixture latent, BoxSettings box)
    : schema_(std::move(schema)), latent_(std::move(latent)), box_(box) {
  require_valid(schema_);
  if (latent_.dimension() != schema_.p()) {
    std::ostringstream msg;
    msg << "latent mixture has dimension " << latent_.dimension() << ", schema needs " << schema_.p();
    throw DomainError(msg.str());
  }
  std::vector<Eigen::Index> discrete_idx(static_cast<std::size_t>(schema_.p2()));
  std::iota(discrete_idx.begin(), discrete_idx.end(), schema_.p1());
  for (std::size_t k = 0; k < latent_.size(); ++k) {
    const double w = latent_.weights()[k];
    log_weights_.push_back(w > 0.0 ? std::log(w) : kNegInf);
    blocks_.emplace_back(latent_.component(k), schema_.p1());
    if (schema_.p2() > 0) {
      discrete_marginals_.push_back(latent_.component(k).marginal(discrete_idx));
    }
  }
}

BoxSettings MixedDensity::box_for(std::span<const std::int64_t> y2, std::size_t component) const {
  BoxSettings s = box_;
  s.seed = substream_seed(box_.seed, {outcome_key(y2), component});
  return s;
}

double MixedDensity::log_density(const MixedPoint& y) const {
  if (const auto issue = schema_.check_point(y); !issue.empty()) {
    throw DomainError(issue);
  }
  const auto lat = latent_of_continuous(schema_, y.continuous);
  return log_density_latent(lat.latent, y.discrete) + lat.log_jacobian;
}

double MixedDensity::log_density_latent(const Eigen::VectorXd& u, std::span<const std::int64_t> y2) const {
  const auto p1 = schema_.p1();
  const auto p2 = schema_.p2();
  std::optional<Cell> cell;
  if (p2 > 0) {
    cell = cell_of(schema_, y2);
  }
  // Upper bound of each term: the box probability is at most the smallest
  // one-dimensional interval probability of the conditional discrete block.
  struct Candidate {
    double bound;
    double base;  // log weight plus continuous-block log density
    std::size_t k;
    Eigen::VectorXd mean;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(latent_.size());
  for (std::size_t k = 0; k < latent_.size(); ++k) {
    if (!std::isfinite(log_weights_[k])) {
      continue;
    }
    const auto& block = blocks_[k];
    double base = log_weights_[k];
    if (p1 > 0) {
      base += block.leading_marginal().log_density(u);
    }
    double bound = base;
    Eigen::VectorXd mean;
    if (p2 > 0) {
      mean = block.trailing_mean(u);
      const auto& cov = block.trailing_at_zero_offset().covariance();
      double smallest = 1.0;
      for (Eigen::Index j = 0; j < p2; ++j) {
        const double sd = std::sqrt(cov(j, j));
        smallest = std::min(smallest, normal::interval((cell->lower[j] - mean[j]) / sd, (cell->upper[j] - mean[j]) / sd));
      }
      bound += smallest > 0.0 ? std::log(smallest) : kNegInf;
    }
    if (bound > kNegInf) {
      candidates.push_back({bound, base, k, std::move(mean)});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.bound > b.bound || (a.bound == b.bound && a.k < b.k); });
  std::vector<double> terms;
  if (p2 == 0) {
    for (const auto& c : candidates) terms.push_back(c.bound);
    return log_sum_exp(terms);
  }
  double running = kNegInf;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const auto& c = candidates[r];
    // Stop once all remaining terms together are below 1e-17 of the sum.
    if (std::isfinite(running) && c.bound + std::log(static_cast<double>(candidates.size() - r)) < running - 39.0) {
      break;
    }
    const auto& block = blocks_[c.k];
    const double prob = box_probability(block.trailing_at_zero_offset(), c.mean, *cell, box_for(y2, c.k)).probability;
    if (prob > 0.0) {
      terms.push_back(c.base + std::log(prob));
      running = log_sum_exp(terms);
    }
  }
  return terms.empty() ? kNegInf : running;
}

double MixedDensity::discrete_probability(std::span<const std::int64_t> y2) const {
  if (schema_.p2() == 0) {
    return 1.0;
  }
  const Cell cell = cell_of(schema_, y2);
  std::vector<std::size_t> order(latent_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& w = latent_.weights();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  double remaining = std::accumulate(w.begin(), w.end(), 0.0);
  double total = 0.0;
  for (const std::size_t k : order) {
    if (w[k] <= 0.0 || (total > 0.0 && remaining < 1e-17 * total)) {
      break;
    }
    total += w[k] * box_probability(discrete_marginals_[k], cell, box_for(y2, k)).probability;
    remaining -= w[k];
  }
  return total;
}

std::vector<MixedPoint> MixedDensity::sample(std::size_t n, Rng& rng) const {
  std::vector<MixedPoint> out;
  out.reserve(n);
  for (const auto& latent : latent_.sample(n, rng)) {
    out.push_back(round_latent(schema_, latent));
  }
  return out;
}

std::vector<std::int64_t> MixedDensity::support_bounds(double tail_tol) const {
  if (!(tail_tol > 0.0)) {
    throw DomainError("support_bounds: tail tolerance must be positive");
  }
  const auto p1 = schema_.p1();
  const auto p2 = schema_.p2();
  std::vector<std::int64_t> bounds(static_cast<std::size_t>(p2), 0);
  const double per_coord = tail_tol / static_cast<double>(std::max<Eigen::Index>(p2, 1));
  for (Eigen::Index j = 0; j < p2; ++j) {
    const auto& part = schema_.partition(j);
    if (const auto q = part.level_count()) {
      bounds[static_cast<std::size_t>(j)] = *q - 1;
      continue;
    }
    // Mixture tail mass above level m; decreasing in m.
    const auto tail = [&](std::int64_t m) {
      double mass = 0.0;
      for (std::size_t k = 0; k < latent_.size(); ++k) {
        const auto& comp = latent_.component(k);
        const double sd = std::sqrt(comp.covariance()(p1 + j, p1 + j));
        mass += latent_.weights()[k] * normal::sf((part.upper(m) - comp.mean()[p1 + j]) / sd);
      }
      return mass;
    };
    // Every component below the tolerance bounds the mixture from above.
    std::int64_t hi = 0;
    for (const auto& comp : latent_.components()) {
      const double mu = comp.mean()[p1 + j];
      const double sd = std::sqrt(comp.covariance()(p1 + j, p1 + j));
      const double threshold = mu + sd * normal::upper_quantile(per_coord);
      hi = std::max(hi, std::clamp<std::int64_t>(part.level_of(std::min(threshold, 1e15)) + 1, 0, kMaxLevel));
    }
    while (hi < kMaxLevel && !(tail(hi) < per_coord)) {
      hi = std::min(kMaxLevel, 2 * hi + 1);
    }
    if (!(tail(hi) < per_coord)) {
      throw NumericalError("support_bounds: count tail does not fall below the tolerance");
    }
    std::int64_t lo = -1;  // tail(lo) >= per_coord or lo = -1
    while (hi - lo > 1) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      (tail(mid) < per_coord ? hi : lo) = mid;
    }
    const std::int64_t level = hi;
    bounds[static_cast<std::size_t>(j)] = level;
  }
  return bounds;
}

std::vector<Outcome> MixedDensity::discrete_support(double tail_tol) const {
  const auto bounds = support_bounds(tail_tol);
  return enumerate_outcomes(bounds);
}

std::vector<Outcome> enumerate_outcomes(std::span<const std::int64_t> max_levels) {
  std::vector<Outcome> out;
  Outcome current(max_levels.size(), 0);
  while (true) {
    out.push_back(current);
    std::size_t j = current.size();
    while (j > 0) {
      --j;
      if (current[j] < max_levels[j]) {
        ++current[j];
        break;
      }
      current[j] = 0;
      if (j == 0) {
        return out;
      }
    }
    if (current.empty()) {
      return out;
    }
  }
}

void write_density_grid(std::ostream& out, const MixedDensity& density, const std::vector<Eigen::VectorXd>& grid,
                        const std::vector<Outcome>& outcomes) {
  const auto& schema = density.schema();
  for (Eigen::Index j = 0; j < schema.p1(); ++j) {
    out << schema.continuous_column(j).name << ',';
  }
  for (Eigen::Index j = 0; j < schema.p2(); ++j) {
    out << schema.discrete_column(j).name << ',';
  }
  out << "log_density,density\n";
  std::array<char, 32> buf{};
  auto number = [&](double v) {
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    out.write(buf.data(), r.ptr - buf.data());
  };
  for (const auto& y1 : grid) {
    for (const auto& y2 : outcomes) {
      const double log_f = density.log_density(MixedPoint{y1, y2});
      for (Eigen::Index j = 0; j < y1.size(); ++j) {
        number(y1[j]);
        out << ',';
      }
      for (const auto v : y2) {
        out << v << ',';
      }
      number(log_f);
      out << ',';
      number(std::exp(log_f));
      out << '\n';
    }
  }
}

}  // namespace mixscale
