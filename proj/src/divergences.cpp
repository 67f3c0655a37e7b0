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

#include "mixscale/divergences.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "mixscale/errors.hpp"
#include "mixscale/parallel.hpp"

namespace mixscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// f0 mass below this where f vanishes is treated as numerical underflow.
constexpr double kSupportEps = 1e-12;
constexpr std::size_t kMonteCarloChunks = 64;
// Components lighter than this do not widen the integration box; their
// total weight is added to the error estimate.
constexpr double kNegligibleWeight = 1e-12;

enum class Metric { kl, l1 };

struct Term {
  double value = 0.0;
  bool violation = false;
};

Term pointwise(Metric metric, double l0, double l1) {
  if (metric == Metric::l1) {
    const double e0 = std::isfinite(l0) ? std::exp(l0) : 0.0;
    const double e1 = std::isfinite(l1) ? std::exp(l1) : 0.0;
    return {std::abs(e0 - e1), false};
  }
  if (l0 == -kInf) {
    return {};
  }
  if (l1 == -kInf) {
    return {0.0, std::exp(l0) > kSupportEps};
  }
  return {std::exp(l0) * (l0 - l1), false};
}

void require_compatible(const MixedDensity& f0, const MixedDensity& f) {
  if (!same_outcome_space(f0.schema(), f.schema())) {
    throw SchemaMismatch("densities are defined on different outcome spaces");
  }
}

Outcome levels_of(const MixedSchema& schema, const Eigen::VectorXd& latent) {
  Outcome y2(static_cast<std::size_t>(schema.p2()));
  for (Eigen::Index j = 0; j < schema.p2(); ++j) {
    y2[static_cast<std::size_t>(j)] = schema.partition(j).level_of(latent[schema.p1() + j]);
  }
  return y2;
}

std::vector<double> coordinate_breaks(const MixedDensity& f0, const MixedDensity& f, Eigen::Index j, double sigmas) {
  double lo = kInf;
  double hi = -kInf;
  double smallest_sd = kInf;
  std::vector<double> candidates;
  for (const auto* density : {&f0, &f}) {
    const auto& mix = density->latent();
    for (std::size_t k = 0; k < mix.size(); ++k) {
      if (mix.weights()[k] < kNegligibleWeight) {
        continue;
      }
      const double mu = mix.component(k).mean()[j];
      const double sd = std::sqrt(mix.component(k).covariance()(j, j));
      lo = std::min(lo, mu - sigmas * sd);
      hi = std::max(hi, mu + sigmas * sd);
      if (mix.weights()[k] >= 1e-3) {
        smallest_sd = std::min(smallest_sd, sd);
        candidates.insert(candidates.end(), {mu - 2.0 * sd, mu, mu + 2.0 * sd});
      }
    }
  }
  const double gap = std::isfinite(smallest_sd) ? 0.25 * smallest_sd : 1e-3 * (hi - lo);
  return make_breaks(lo, hi, std::move(candidates), gap);
}

// Zeros of f0 - f along the line, located from sign changes on a scan of
// each panel and refined by bracketing. Used as breakpoints so the L1
// integrand is smooth inside every panel.
std::vector<double> sign_changes(const std::function<double(double)>& diff, const std::vector<double>& breaks,
                                 int scan_per_panel) {
  std::vector<double> roots;
  double prev_x = breaks.front();
  double prev_d = diff(prev_x);
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    for (int s = 1; s <= scan_per_panel; ++s) {
      const double x = breaks[b] + (breaks[b + 1] - breaks[b]) * s / scan_per_panel;
      const double d = diff(x);
      if ((prev_d < 0.0 && d > 0.0) || (prev_d > 0.0 && d < 0.0)) {
        std::uintmax_t iterations = 60;
        const auto tol = [](double a, double c) { return std::abs(c - a) <= 1e-12 * std::max(1.0, std::abs(a)); };
        const auto bracket =
            boost::math::tools::toms748_solve(diff, prev_x, x, prev_d, d, tol, iterations);
        roots.push_back(0.5 * (bracket.first + bracket.second));
      }
      if (d != 0.0) {
        prev_x = x;
        prev_d = d;
      }
    }
  }
  return roots;
}

struct Partial {
  double value = 0.0;
  double error = 0.0;
  bool violation = false;
};

// L1 contribution of one outcome with one continuous coordinate.
Partial l1_line(const MixedDensity& f0, const MixedDensity& f, const Outcome& y2, const std::vector<double>& breaks,
                    const QuadratureSettings& quad) {
  Eigen::VectorXd v(1);
  const auto diff = [&](double x) {
    v[0] = x;
    const double l0 = f0.log_density_latent(v, y2);
    const double l1 = f.log_density_latent(v, y2);
    return (std::isfinite(l0) ? std::exp(l0) : 0.0) - (std::isfinite(l1) ? std::exp(l1) : 0.0);
  };
  std::vector<double> all = breaks;
  const auto roots = sign_changes(diff, breaks, 8);
  all.insert(all.end(), roots.begin(), roots.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const auto r = integrate_1d([&](double x) { return std::abs(diff(x)); }, all, quad);
  return {r.value, r.error, false};
}

DivergenceEstimate deterministic(Metric metric, const MixedDensity& f0, const MixedDensity& f,
                                 const DivergenceConfig& cfg) {
  const auto& schema = f0.schema();
  const auto p1 = schema.p1();
  if (p1 > 2) {
    throw DomainError("quadrature path supports at most two continuous coordinates");
  }
  auto bounds = f0.support_bounds(cfg.tail_tol);
  const auto other = f.support_bounds(cfg.tail_tol);
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    bounds[j] = std::max(bounds[j], other[j]);
  }
  const auto outcomes = enumerate_outcomes(bounds);
  std::vector<std::vector<double>> breaks;
  for (Eigen::Index j = 0; j < p1; ++j) {
    breaks.push_back(coordinate_breaks(f0, f, j, cfg.box_sigmas));
  }
  const QuadratureSettings quad{cfg.quad_abs_tol, cfg.quad_rel_tol, 4000};

  auto eval = [&](const Eigen::VectorXd& u, const Outcome& y2, bool& violation) {
    const auto t = pointwise(metric, f0.log_density_latent(u, y2), f.log_density_latent(u, y2));
    violation = violation || t.violation;
    return t.value;
  };
  auto integrate = [&](const std::function<double(const Eigen::VectorXd&, bool&)>& g) {
    Partial part;
    Eigen::VectorXd u(p1);
    if (p1 == 0) {
      part.value = g(u, part.violation);
      return part;
    }
    QuadratureResult r;
    if (p1 == 1) {
      const auto at = [&](double x) {
        Eigen::VectorXd v(1);
        v[0] = x;
        return g(v, part.violation);
      };
      r = integrate_1d(at, breaks[0], quad);
    } else {
      r = integrate_2d(
          [&](double x, double y) {
            Eigen::VectorXd v(2);
            v << x, y;
            return g(v, part.violation);
          },
          breaks[0], breaks[1], quad);
    }
    part.value = r.value;
    part.error = r.error;
    return part;
  };

  std::vector<Partial> partials;
  if (cfg.sum_inside) {
    partials.push_back(integrate([&](const Eigen::VectorXd& u, bool& violation) {
      double acc = 0.0;
      for (const auto& y2 : outcomes) {
        acc += eval(u, y2, violation);
      }
      return acc;
    }));
  } else {
    partials.resize(outcomes.size());
    parallel_for(outcomes.size(), cfg.threads, [&](std::size_t i) {
      if (metric == Metric::l1 && p1 > 0) {
        // The outcome contributes at most its total mass under both densities.
        const double bound = f0.discrete_probability(outcomes[i]) + f.discrete_probability(outcomes[i]);
        if (bound <= cfg.quad_abs_tol) {
          partials[i] = {0.0, bound, false};
          return;
        }
      }
      if (metric == Metric::l1 && p1 == 1) {
        partials[i] = l1_line(f0, f, outcomes[i], breaks[0], quad);
        return;
      }
      partials[i] = integrate(
          [&](const Eigen::VectorXd& u, bool& violation) { return eval(u, outcomes[i], violation); });
    });
  }

  DivergenceEstimate est;
  est.method = DivergenceMethod::exact_sum_quadrature;
  est.tail_mass_tol = cfg.tail_tol;
  const bool unbounded = std::any_of(schema.columns().begin(), schema.columns().end(),
                                     [](const Column& c) { return c.kind == ColumnKind::count; });
  est.std_error = unbounded ? (metric == Metric::l1 ? 2.0 : 1.0) * cfg.tail_tol : 0.0;
  if (p1 > 0) {
    for (const auto* density : {&f0, &f}) {
      for (const double w : density->latent().weights()) {
        est.std_error += w < kNegligibleWeight ? w : 0.0;
      }
    }
  }
  bool violation = false;
  for (const auto& part : partials) {
    est.value += part.value;
    est.std_error += part.error;
    violation = violation || part.violation;
  }
  if (violation) {
    est.value = kInf;
    est.diagnostics.emplace_back("support violation: f vanishes where f0 has mass");
  }
  std::ostringstream note;
  note << outcomes.size() << " discrete outcomes integrated";
  est.diagnostics.push_back(note.str());
  return est;
}

DivergenceEstimate monte_carlo(Metric metric, const MixedDensity& f0, const MixedDensity& f,
                               const DivergenceConfig& cfg) {
  const auto p1 = f0.schema().p1();
  const std::size_t n = std::max<std::size_t>(cfg.mc_samples, 2);
  struct Chunk {
    double sum = 0.0;
    double sum_sq = 0.0;
    bool violation = false;
  };
  std::vector<Chunk> chunks(kMonteCarloChunks);
  parallel_for(kMonteCarloChunks, cfg.threads, [&](std::size_t c) {
    Rng rng = substream(cfg.seed, {static_cast<std::uint64_t>(metric), c});
    std::bernoulli_distribution coin(0.5);
    const std::size_t begin = n * c / kMonteCarloChunks;
    const std::size_t end = n * (c + 1) / kMonteCarloChunks;
    auto& chunk = chunks[c];
    for (std::size_t i = begin; i < end; ++i) {
      const MixedDensity& source = (metric == Metric::l1 && coin(rng)) ? f : f0;
      const Eigen::VectorXd x = source.latent().sample(rng);
      const Outcome y2 = levels_of(source.schema(), x);
      const Eigen::VectorXd u = x.head(p1);
      const double l0 = f0.log_density_latent(u, y2);
      const double l1 = f.log_density_latent(u, y2);
      double term = 0.0;
      if (metric == Metric::kl) {
        if (l1 == -kInf && l0 > -kInf) {
          chunk.violation = true;
          continue;
        }
        term = l0 - l1;
      } else if (l0 == -kInf && l1 == -kInf) {
        term = 0.0;
      } else if (l0 == -kInf || l1 == -kInf) {
        term = 2.0;
      } else {
        term = 2.0 * std::tanh(0.5 * std::abs(l0 - l1));
      }
      chunk.sum += term;
      chunk.sum_sq += term * term;
    }
  });
  double sum = 0.0;
  double sum_sq = 0.0;
  bool violation = false;
  for (const auto& chunk : chunks) {
    sum += chunk.sum;
    sum_sq += chunk.sum_sq;
    violation = violation || chunk.violation;
  }
  const double count = static_cast<double>(n);
  const double mean = sum / count;
  const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  DivergenceEstimate est;
  est.method = DivergenceMethod::monte_carlo;
  est.tail_mass_tol = cfg.tail_tol;
  est.value = mean;
  est.std_error = std::sqrt(var / count);
  if (violation) {
    est.value = kInf;
    est.diagnostics.emplace_back("support violation: f vanishes at a draw from f0");
  }
  return est;
}

DivergenceEstimate divergence(Metric metric, const MixedDensity& f0, const MixedDensity& f,
                              const DivergenceConfig& cfg) {
  require_compatible(f0, f);
  if (f0.schema().p1() <= std::min<Eigen::Index>(cfg.max_quadrature_p1, 2)) {
    return deterministic(metric, f0, f, cfg);
  }
  return monte_carlo(metric, f0, f, cfg);
}

}  // namespace

std::string to_string(DivergenceMethod method) {
  return method == DivergenceMethod::exact_sum_quadrature ? "exact-sum+quadrature" : "monte-carlo";
}

DivergenceEstimate kl_mixed(const MixedDensity& f0, const MixedDensity& f, const DivergenceConfig& cfg) {
  return divergence(Metric::kl, f0, f, cfg);
}

DivergenceEstimate l1_mixed(const MixedDensity& f0, const MixedDensity& f, const DivergenceConfig& cfg) {
  return divergence(Metric::l1, f0, f, cfg);
}

DivergenceEstimate empirical_l1(const std::vector<MixedPoint>& data, const MixedDensity& f,
                                const DivergenceConfig& cfg) {
  if (data.empty()) {
    throw DomainError("empirical_l1: no data");
  }
  std::map<Outcome, double> frequency;
  for (const auto& y : data) {
    if (const auto issue = f.schema().check_point(y); !issue.empty()) {
      throw DomainError("empirical_l1: " + issue);
    }
    frequency[y.discrete] += 1.0;
  }
  for (auto& [outcome, freq] : frequency) {
    freq /= static_cast<double>(data.size());
  }
  for (const auto& outcome : f.discrete_support(cfg.tail_tol)) {
    frequency.try_emplace(outcome, 0.0);
  }
  DivergenceEstimate est;
  est.method = DivergenceMethod::exact_sum_quadrature;
  est.tail_mass_tol = cfg.tail_tol;
  double covered = 0.0;
  for (const auto& [outcome, freq] : frequency) {
    const double prob = f.discrete_probability(outcome);
    covered += prob;
    est.value += std::abs(freq - prob);
  }
  // Outcomes never listed carry model mass and zero empirical mass.
  est.value += std::max(0.0, 1.0 - covered);
  est.diagnostics.emplace_back("proxy: discrete marginals only");
  return est;
}

}  // namespace mixscale
