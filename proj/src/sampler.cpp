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

#include "mixscale/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mixscale/errors.hpp"
#include "mixscale/parallel.hpp"

namespace mixscale {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInitCap = 6.0;

// Substream tags.
enum : std::uint64_t { kTagRow = 1, kTagSticks = 2, kTagCluster = 3, kTagInit = 4 };

double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

std::vector<double> stick_weights(const std::vector<int>& counts, double alpha, Rng& rng) {
  const auto k_max = counts.size();
  std::vector<double> weights(k_max, 0.0);
  int remaining = std::accumulate(counts.begin(), counts.end(), 0);
  double rest = 1.0;
  for (std::size_t k = 0; k + 1 < k_max; ++k) {
    remaining -= counts[k];
    const double v = draw_beta(1.0 + counts[k], alpha + remaining, rng);
    weights[k] = v * rest;
    rest *= 1.0 - v;
  }
  weights[k_max - 1] = rest;
  return weights;
}

std::size_t draw_categorical(const std::vector<double>& log_p, Rng& rng) {
  const double peak = *std::max_element(log_p.begin(), log_p.end());
  double total = 0.0;
  std::vector<double> p(log_p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(log_p[k] - peak);
    total += p[k];
  }
  std::uniform_real_distribution<double> unif(0.0, total);
  double u = unif(rng);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (u < p[k]) {
      return k;
    }
    u -= p[k];
  }
  // Rounding left u past the end: take the last positive entry.
  for (std::size_t k = p.size(); k-- > 0;) {
    if (p[k] > 0.0) {
      return k;
    }
  }
  return 0;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& latents, const std::vector<int>& allocation, int k) {
  const auto n = std::count(allocation.begin(), allocation.end(), k);
  Eigen::MatrixXd out(n, latents.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < allocation.size(); ++i) {
    if (allocation[i] == k) {
      out.row(r++) = latents.row(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

void redraw_clusters(SamplerState& state, const NIWParams& niw, const DPConfig& cfg, std::uint64_t tag) {
  const auto k_max = static_cast<std::size_t>(cfg.k_max);
  state.clusters.resize(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    Rng rng = substream(cfg.seed, {cfg.chain, state.iteration, tag, kTagCluster, k});
    const auto posterior = niw_posterior(niw, rows_of(state.latents, state.allocation, static_cast<int>(k)));
    state.clusters[k] = sample_niw(posterior, rng);
  }
}

}  // namespace

std::vector<std::string> NIWParams::problems() const {
  std::vector<std::string> out;
  const auto p = mean.size();
  if (p == 0) {
    out.emplace_back("NIW mean is empty");
  }
  if (!(kappa > 0.0)) {
    out.emplace_back("NIW kappa must be positive");
  }
  if (!(dof > static_cast<double>(p) - 1.0)) {
    out.emplace_back("NIW degrees of freedom must exceed p - 1");
  }
  if (scale.rows() != p || scale.cols() != p) {
    out.emplace_back("NIW scale matrix has the wrong shape");
  } else if (Eigen::LLT<Eigen::MatrixXd>(scale).info() != Eigen::Success ||
             (scale - scale.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale.cwiseAbs().maxCoeff()) {
    out.emplace_back("NIW scale matrix must be symmetric positive definite");
  }
  return out;
}

NIWParams niw_posterior(const NIWParams& prior, const Eigen::MatrixXd& points) {
  const auto n = points.rows();
  if (n == 0) {
    return prior;
  }
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd xbar = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - xbar.transpose();
  const Eigen::MatrixXd scatter = centered.transpose() * centered;
  NIWParams post;
  post.kappa = prior.kappa + nd;
  post.dof = prior.dof + nd;
  post.mean = (prior.kappa * prior.mean + nd * xbar) / post.kappa;
  const Eigen::VectorXd shift = xbar - prior.mean;
  post.scale = prior.scale + scatter + (prior.kappa * nd / post.kappa) * shift * shift.transpose();
  post.scale = 0.5 * (post.scale + post.scale.transpose());
  return post;
}

GaussianComponent sample_niw(const NIWParams& niw, Rng& rng) {
  const auto p = niw.mean.size();
  const auto factor = cholesky_with_jitter(niw.scale).factor;
  std::normal_distribution<double> std_normal;
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    std::chi_squared_distribution<double> chi2(niw.dof - static_cast<double>(i));
    bartlett(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) {
      bartlett(i, j) = std_normal(rng);
    }
  }
  // Sigma^{-1} ~ Wishart(dof, scale^{-1}) = L^{-T} A A^T L^{-1}, so Sigma = G G^T
  // with G = L A^{-T}.
  const Eigen::MatrixXd a_inv =
      bartlett.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd g = factor * a_inv.transpose();
  Eigen::MatrixXd sigma = g * g.transpose();
  sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    z[i] = std_normal(rng);
  }
  const Eigen::VectorXd mu = niw.mean + g * z / std::sqrt(niw.kappa);
  auto repaired = cholesky_with_jitter(sigma);
  return {mu, std::move(repaired.repaired)};
}

NIWParams default_niw(const Eigen::MatrixXd& latents) {
  if (latents.rows() == 0) {
    throw DomainError("default NIW parameters need at least one observation");
  }
  const auto p = latents.cols();
  NIWParams niw;
  niw.mean = latents.colwise().mean().transpose();
  niw.kappa = 0.01;
  niw.dof = static_cast<double>(p) + 2.0;
  niw.scale = Eigen::MatrixXd::Zero(p, p);
  const Eigen::MatrixXd centered = latents.rowwise() - niw.mean.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(latents.rows() - 1));
  for (Eigen::Index j = 0; j < p; ++j) {
    niw.scale(j, j) = std::max(centered.col(j).squaredNorm() / denom, 1e-3);
  }
  return niw;
}

std::vector<std::string> DPConfig::problems() const {
  std::vector<std::string> out;
  if (!(alpha > 0.0)) {
    out.emplace_back("alpha must be positive");
  }
  if (k_max < 1) {
    out.emplace_back("k_max must be at least 1");
  }
  if (truncation_sweeps < 1) {
    out.emplace_back("truncation sweeps must be at least 1");
  }
  if (iterations < 0 || burn_in < 0) {
    out.emplace_back("iterations and burn-in must be nonnegative");
  }
  if (thin < 1) {
    out.emplace_back("thinning interval must be at least 1");
  }
  return out;
}

AugmentedData augment(const std::vector<MixedPoint>& data, const MixedSchema& schema,
                      std::vector<std::uint64_t> keys) {
  require_valid(schema);
  const auto n = data.size();
  if (keys.empty()) {
    keys.resize(n);
    std::iota(keys.begin(), keys.end(), std::uint64_t{0});
  }
  if (keys.size() != n) {
    throw DomainError("row key count does not match the data");
  }
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < n; ++i) {
    if (auto issue = schema.check_point(data[i]); !issue.empty()) {
      bad.push_back("row " + std::to_string(i) + ": " + issue);
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid data rows:";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 20); ++i) {
      msg += "\n  " + bad[i];
    }
    if (bad.size() > 20) {
      msg += "\n  ... " + std::to_string(bad.size() - 20) + " more";
    }
    throw DomainError(msg);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  if (std::adjacent_find(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return keys[a] == keys[b];
      }) != order.end()) {
    throw DomainError("row keys must be unique");
  }
  AugmentedData out;
  out.continuous_latent.resize(static_cast<Eigen::Index>(n), schema.p1());
  for (std::size_t r = 0; r < n; ++r) {
    const auto& y = data[order[r]];
    out.continuous_latent.row(static_cast<Eigen::Index>(r)) = latent_of_continuous(schema, y.continuous).latent.transpose();
    out.cells.push_back(cell_of(schema, y.discrete));
    out.keys.push_back(keys[order[r]]);
  }
  return out;
}

LatentMixture SamplerState::mixture() const { return {weights, clusters}; }

std::vector<int> SamplerState::occupancy() const {
  std::vector<int> counts(clusters.size(), 0);
  for (const int z : allocation) {
    ++counts[static_cast<std::size_t>(z)];
  }
  return counts;
}

Eigen::MatrixXd initial_latents(const AugmentedData& data, const MixedSchema& schema) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p1 = schema.p1();
  Eigen::MatrixXd latents(n, schema.p());
  for (Eigen::Index i = 0; i < n; ++i) {
    latents.row(i).head(p1) = data.continuous_latent.row(i);
    const auto& cell = data.cells[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < schema.p2(); ++j) {
      double lo = cell.lower[j];
      double hi = cell.upper[j];
      if (!std::isfinite(lo) && !std::isfinite(hi)) {
        lo = -kInitCap;
        hi = kInitCap;
      } else if (!std::isfinite(lo)) {
        lo = hi - kInitCap;
      } else if (!std::isfinite(hi)) {
        hi = lo + kInitCap;
      }
      latents(i, p1 + j) = 0.5 * (lo + hi);
    }
  }
  return latents;
}

SamplerState init_state(const AugmentedData& data, const MixedSchema& schema, const NIWParams& niw,
                        const DPConfig& cfg) {
  if (const auto problems = cfg.problems(); !problems.empty()) {
    throw DomainError("invalid sampler configuration: " + problems.front());
  }
  if (const auto problems = niw.problems(); !problems.empty()) {
    throw DomainError("invalid NIW parameters: " + problems.front());
  }
  if (niw.mean.size() != schema.p()) {
    throw DomainError("NIW dimension does not match the schema");
  }
  SamplerState state;
  state.latents = initial_latents(data, schema);
  const auto n = static_cast<Eigen::Index>(data.size());
  state.allocation.assign(data.size(), 0);
  Rng rng = substream(cfg.seed, {cfg.chain, kTagInit});

  const auto k0 = static_cast<int>(std::min<Eigen::Index>({cfg.k_max, n, 5}));
  if (k0 > 1) {
    // k-means++ seeding on standardized latents, then a few Lloyd steps.
    Eigen::VectorXd sd = ((state.latents.rowwise() - state.latents.colwise().mean()).colwise().squaredNorm() /
                          static_cast<double>(n))
                             .cwiseSqrt()
                             .transpose();
    sd = sd.unaryExpr([](double s) { return s > 0.0 ? s : 1.0; });
    const Eigen::MatrixXd z = state.latents * sd.cwiseInverse().asDiagonal();
    std::vector<Eigen::VectorXd> centres;
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centres.push_back(z.row(first(rng)).transpose());
    std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    while (static_cast<int>(centres.size()) < k0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        dist[static_cast<std::size_t>(i)] =
            std::min(dist[static_cast<std::size_t>(i)], (z.row(i).transpose() - centres.back()).squaredNorm());
      }
      if (std::accumulate(dist.begin(), dist.end(), 0.0) <= 0.0) {
        break;
      }
      std::discrete_distribution<Eigen::Index> pick(dist.begin(), dist.end());
      centres.push_back(z.row(pick(rng)).transpose());
    }
    for (int lloyd = 0; lloyd < 5; ++lloyd) {
      for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centres.size(); ++c) {
          const double d = (z.row(i).transpose() - centres[c]).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
          }
        }
        state.allocation[static_cast<std::size_t>(i)] = best;
      }
      for (std::size_t c = 0; c < centres.size(); ++c) {
        const auto rows = rows_of(z, state.allocation, static_cast<int>(c));
        if (rows.rows() > 0) {
          centres[c] = rows.colwise().mean().transpose();
        }
      }
    }
  }
  std::vector<int> no_counts(static_cast<std::size_t>(cfg.k_max), 0);
  state.weights = stick_weights(no_counts, cfg.alpha, rng);
  redraw_clusters(state, niw, cfg, kTagInit);
  return state;
}

void gibbs_sweep(SamplerState& state, const AugmentedData& data, const MixedSchema& schema, const NIWParams& niw,
                 const DPConfig& cfg) {
  const auto p1 = schema.p1();
  const auto p2 = schema.p2();
  const auto k_max = state.clusters.size();
  state.iteration += 1;
  const auto t = state.iteration;

  std::vector<BlockConditional> blocks;
  if (p2 > 0) {
    for (const auto& c : state.clusters) {
      blocks.emplace_back(c, p1);
    }
  }
  std::vector<double> log_w(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    log_w[k] = state.weights[k] > 0.0 ? std::log(state.weights[k]) : kNegInf;
  }

  parallel_for(data.size(), cfg.threads, [&](std::size_t i) {
    Rng rng = substream(cfg.seed, {cfg.chain, t, kTagRow, data.keys[i]});
    const auto row = static_cast<Eigen::Index>(i);
    // (a) discrete latents | continuous latents, cluster, cell
    if (p2 > 0) {
      const auto& block = blocks[static_cast<std::size_t>(state.allocation[i])];
      const Eigen::VectorXd u = state.latents.row(row).head(p1).transpose();
      const Eigen::VectorXd current = state.latents.row(row).tail(p2).transpose();
      const Eigen::VectorXd next = sample_truncated(block.trailing_at_zero_offset(), block.trailing_mean(u),
                                                    data.cells[i], current, cfg.truncation_sweeps, rng);
      state.latents.row(row).tail(p2) = next.transpose();
    }
    // (b) allocation
    if (k_max > 1) {
      const Eigen::VectorXd x = state.latents.row(row).transpose();
      std::vector<double> log_p(k_max);
      for (std::size_t k = 0; k < k_max; ++k) {
        log_p[k] = std::isfinite(log_w[k]) ? log_w[k] + state.clusters[k].log_density(x) : kNegInf;
      }
      state.allocation[i] = static_cast<int>(draw_categorical(log_p, rng));
    }
  });

  // (c) stick weights
  Rng stick_rng = substream(cfg.seed, {cfg.chain, t, kTagSticks});
  state.weights = stick_weights(state.occupancy(), cfg.alpha, stick_rng);

  // (d) cluster parameters
  redraw_clusters(state, niw, cfg, 0);
}

void check_state(const SamplerState& state, const AugmentedData& data, const MixedSchema& schema) {
  const auto p1 = schema.p1();
  const auto p2 = schema.p2();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (p1 > 0 && state.latents.row(row).head(p1) != data.continuous_latent.row(row)) {
      throw NumericalError("continuous latent of row " + std::to_string(i) + " changed");
    }
    if (p2 > 0 && !data.cells[i].contains(state.latents.row(row).tail(p2).transpose())) {
      throw NumericalError("discrete latent of row " + std::to_string(i) + " left its cell");
    }
  }
}

namespace {

double complete_log_likelihood(const SamplerState& state) {
  double total = 0.0;
  for (std::size_t i = 0; i < state.allocation.size(); ++i) {
    const auto k = static_cast<std::size_t>(state.allocation[i]);
    total += std::log(state.weights[k]) +
             state.clusters[k].log_density(state.latents.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return total;
}

int occupied_clusters(const SamplerState& state) {
  const auto counts = state.occupancy();
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
}

}  // namespace

PosteriorDraws run_sampler(const std::vector<MixedPoint>& data, const MixedSchema& schema, const NIWParams& niw,
                           const DPConfig& cfg, std::vector<std::uint64_t> row_keys,
                           const std::function<void(const SweepDiagnostics&)>& on_sweep) {
  const auto augmented = augment(data, schema, std::move(row_keys));
  auto state = init_state(augmented, schema, niw, cfg);
  PosteriorDraws out;
  out.schema = schema;
  out.config = cfg;
  out.niw = niw;
  const int total = cfg.burn_in + cfg.iterations;
  for (int s = 0; s < total; ++s) {
    gibbs_sweep(state, augmented, schema, niw, cfg);
    check_state(state, augmented, schema);
    const SweepDiagnostics diag{state.iteration, complete_log_likelihood(state), occupied_clusters(state)};
    out.trace.push_back(diag);
    if (on_sweep) {
      on_sweep(diag);
    }
    const int kept = s - cfg.burn_in;
    if (kept >= 0 && (kept + 1) % cfg.thin == 0) {
      out.draws.push_back(state.mixture());
    }
  }
  return out;
}

PosteriorDraws run_sampler(const std::vector<MixedPoint>& data, const MixedSchema& schema, const DPConfig& cfg) {
  const auto augmented = augment(data, schema);
  const auto niw = default_niw(initial_latents(augmented, schema));
  return run_sampler(data, schema, niw, cfg);
}

MixedDensity predictive_density(const PosteriorDraws& draws, BoxSettings box) {
  if (draws.draws.empty()) {
    throw DomainError("predictive density needs at least one posterior draw");
  }
  return {draws.schema, flatten(draws.draws), box};
}

}  // namespace mixscale
