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

#include "mixscale/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mixscale/errors.hpp"
#include "mixscale/normal.hpp"

namespace mixscale {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& covariance) {
  const auto p = covariance.rows();
  JitteredCholesky out;
  out.repaired = 0.5 * (covariance + covariance.transpose());
  const double jitter = 1e-8 * std::abs(out.repaired.trace()) / static_cast<double>(std::max<Eigen::Index>(p, 1));
  for (out.retries = 0; out.retries <= 3; ++out.retries) {
    if (out.retries > 0) {
      out.repaired.diagonal().array() += jitter;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(out.repaired);
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      out.factor = llt.matrixL();
      return out;
    }
  }
  std::ostringstream msg;
  msg << "covariance is not positive definite after 3 jitter retries (trace " << covariance.trace()
      << ", dimension " << p << ")";
  throw NumericalError(msg.str());
}

GaussianComponent::GaussianComponent(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw NumericalError("covariance shape does not match the mean");
  }
  if (mean_.size() == 0) {
    return;
  }
  const double scale = std::max(max_abs(covariance_), 1e-300);
  if (max_abs(covariance_ - covariance_.transpose()) > 1e-12 * scale) {
    throw NumericalError("covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance is not positive definite");
  }
  cholesky_ = llt.matrixL();
  if (!(cholesky_.diagonal().array() > 0.0).all()) {
    throw NumericalError("covariance is not positive definite");
  }
  log_det_ = 2.0 * cholesky_.diagonal().array().log().sum();
}

double GaussianComponent::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dimension()) {
    throw DomainError("log_density: dimension mismatch");
  }
  const Eigen::VectorXd z = cholesky_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (static_cast<double>(dimension()) * kLog2Pi + log_det_ + z.squaredNorm());
}

GaussianComponent GaussianComponent::marginal(std::span<const Eigen::Index> indices) const {
  const auto k = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd m(k);
  Eigen::MatrixXd s(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    m[a] = mean_[indices[a]];
    for (Eigen::Index b = 0; b < k; ++b) {
      s(a, b) = covariance_(indices[a], indices[b]);
    }
  }
  return {std::move(m), std::move(s)};
}

GaussianComponent GaussianComponent::condition(std::span<const Eigen::Index> observed,
                                               const Eigen::VectorXd& values) const {
  const auto p = dimension();
  if (observed.empty() || static_cast<Eigen::Index>(observed.size()) >= p) {
    throw DomainError("condition: observed set must be a nonempty proper subset");
  }
  if (values.size() != static_cast<Eigen::Index>(observed.size())) {
    throw DomainError("condition: value count does not match the observed set");
  }
  std::vector<bool> is_observed(static_cast<std::size_t>(p), false);
  for (const auto i : observed) {
    if (i < 0 || i >= p || is_observed[static_cast<std::size_t>(i)]) {
      throw DomainError("condition: invalid or repeated observed index");
    }
    is_observed[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!is_observed[static_cast<std::size_t>(i)]) {
      rest.push_back(i);
    }
  }
  const auto no = static_cast<Eigen::Index>(observed.size());
  const auto nr = static_cast<Eigen::Index>(rest.size());
  Eigen::MatrixXd s_oo(no, no);
  Eigen::MatrixXd s_ro(nr, no);
  Eigen::MatrixXd s_rr(nr, nr);
  for (Eigen::Index a = 0; a < no; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) {
      s_oo(a, b) = covariance_(observed[a], observed[b]);
    }
  }
  for (Eigen::Index a = 0; a < nr; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) {
      s_ro(a, b) = covariance_(rest[a], observed[b]);
    }
    for (Eigen::Index b = 0; b < nr; ++b) {
      s_rr(a, b) = covariance_(rest[a], rest[b]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (llt.info() != Eigen::Success || rcond < 1e-14) {
    std::ostringstream msg;
    msg << "condition: observed covariance block is singular (condition number ~ "
        << (rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) << ")";
    throw NumericalError(msg.str());
  }
  Eigen::VectorXd obs_offset(no);
  for (Eigen::Index a = 0; a < no; ++a) {
    obs_offset[a] = values[a] - mean_[observed[a]];
  }
  const Eigen::MatrixXd regression = llt.solve(s_ro.transpose()).transpose();
  Eigen::VectorXd m(nr);
  for (Eigen::Index a = 0; a < nr; ++a) {
    m[a] = mean_[rest[a]];
  }
  m += regression * obs_offset;
  Eigen::MatrixXd s = s_rr - regression * s_ro.transpose();
  s = 0.5 * (s + s.transpose());
  return {std::move(m), std::move(s)};
}

Eigen::VectorXd GaussianComponent::sample(Rng& rng) const {
  std::normal_distribution<double> std_normal;
  Eigen::VectorXd z(dimension());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = std_normal(rng);
  }
  return mean_ + cholesky_.triangularView<Eigen::Lower>() * z;
}

BlockConditional::BlockConditional(const GaussianComponent& joint, Eigen::Index lead) : lead_(lead) {
  const auto p = joint.dimension();
  const auto trail = p - lead;
  const auto& s = joint.covariance();
  leading_mean_ = joint.mean().head(lead);
  if (lead > 0) {
    leading_ = GaussianComponent(joint.mean().head(lead), s.topLeftCorner(lead, lead));
  }
  if (trail == 0) {
    regression_ = Eigen::MatrixXd::Zero(0, lead);
    return;
  }
  if (lead == 0) {
    regression_ = Eigen::MatrixXd::Zero(trail, 0);
    trailing_ = GaussianComponent(joint.mean(), s);
    return;
  }
  const Eigen::MatrixXd s_tl = s.bottomLeftCorner(trail, lead);
  const Eigen::MatrixXd& l = leading_.cholesky();
  // regression = s_tl * S_ll^{-1}
  const Eigen::MatrixXd tmp = l.triangularView<Eigen::Lower>().solve(s_tl.transpose());
  regression_ = l.transpose().triangularView<Eigen::Upper>().solve(tmp).transpose();
  Eigen::MatrixXd cond = s.bottomRightCorner(trail, trail) - tmp.transpose() * tmp;
  cond = 0.5 * (cond + cond.transpose());
  trailing_ = GaussianComponent(joint.mean().tail(trail), std::move(cond));
}

Eigen::VectorXd BlockConditional::trailing_mean(const Eigen::VectorXd& leading_values) const {
  if (lead_ == 0) {
    return trailing_.mean();
  }
  return trailing_.mean() + regression_ * (leading_values - leading_mean_);
}

GaussianComponent BlockConditional::trailing(const Eigen::VectorXd& leading_values) const {
  return {trailing_mean(leading_values), trailing_.covariance()};
}

}  // namespace mixscale
