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
#include <map>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "mixscale/errors.hpp"
#include "mixscale/mixed_density.hpp"
#include "mixscale/normal.hpp"
#include "test_support.hpp"

namespace mixscale {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using boost::math::quadrature::gauss_kronrod;

GaussianComponent standard(Eigen::Index p) {
  return GaussianComponent(Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p));
}

// f(y1, y2) for p1 = p2 = 1 by direct integration of the latent joint density
// over the cell of y2.
double oracle_density(const MixedSchema& schema, const LatentMixture& mix, double y1, std::int64_t y2) {
  const double u = schema.map(0).inverse(y1);
  const double log_jac = schema.map(0).log_abs_inverse_derivative(y1);
  const Cell cell = cell_of(schema, std::vector<std::int64_t>{y2});
  double total = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const auto& g = mix.component(k);
    const double sd = std::sqrt(g.covariance()(1, 1));
    const double lo = std::max(cell.lower[0], g.mean()[1] - 40 * sd);
    const double hi = std::min(cell.upper[0], g.mean()[1] + 40 * sd);
    if (!(lo < hi)) continue;
    const auto f = [&](double v) { return std::exp(g.log_density(Eigen::Vector2d(u, v))); };
    total += mix.weights()[k] * gauss_kronrod<double, 61>::integrate(f, lo, hi, 25, 1e-13);
  }
  return total * std::exp(log_jac);
}

TEST(MixedDensity, MatchesDirectIntegration) {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const MixedSchema schema({testing::random_continuous_column(rng, "x"), testing::random_discrete_column(rng, "d")});
    const LatentMixture mix = testing::random_mixture(rng, 2);
    const MixedDensity density(schema, mix);
    const auto draws = density.sample(3, rng);
    for (const auto& y : draws) {
      const double expected = oracle_density(schema, mix, y.continuous[0], y.discrete[0]);
      EXPECT_NEAR(std::exp(density.log_density(y)) / expected, 1.0, 1e-8);
    }
  }
}

TEST(MixedDensity, StandardLognormal) {
  const MixedSchema schema({Column::continuous("y", MonotoneMap::log_exp())});
  const MixedDensity density(schema, LatentMixture::single(standard(1)));
  const std::pair<double, double> cases[] = {
      {0.5, -0.46601785960382813}, {1.0, -0.9189385332046727}, {2.0, -1.8523122207237188}, {3.7, -3.0831387363417453}};
  for (const auto& [y, expected] : cases) {
    EXPECT_NEAR(density.log_density(MixedPoint{Eigen::VectorXd::Constant(1, y), {}}), expected, 1e-13);
  }
}

TEST(MixedDensity, BinaryProbit) {
  const MixedSchema schema({Column::binary("b")});
  const MixedDensity density(schema, LatentMixture::single(
                                         GaussianComponent(Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Identity(1, 1))));
  EXPECT_NEAR(density.discrete_probability(std::vector<std::int64_t>{0}), 0.6914624612740131, 1e-15);
  EXPECT_NEAR(std::exp(density.log_density(MixedPoint{Eigen::VectorXd(0), {1}})), 1 - 0.6914624612740131, 1e-15);
}

TEST(MixedDensity, RejectsDimensionMismatch) {
  const MixedSchema schema({Column::continuous("x"), Column::binary("b")});
  EXPECT_THROW(MixedDensity(schema, LatentMixture::single(standard(3))), DomainError);
  const MixedDensity density(schema, LatentMixture::single(standard(2)));
  EXPECT_THROW((void)density.log_density(MixedPoint{Eigen::VectorXd::Zero(1), {2}}), DomainError);
}

TEST(MixedDensity, FiniteOutcomesSumToOne) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const MixedSchema schema({Column::categorical("a", 3, testing::random_cuts(rng, 2)), Column::binary("b"),
                              Column::categorical("c", testing::uniform_int(rng, 2, 3))});
    const MixedDensity density(schema, testing::random_mixture(rng, 3));
    double total = 0.0;
    for (const auto& y2 : density.discrete_support(1e-12)) total += density.discrete_probability(y2);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(MixedDensity, SupportBoundsCoverMass) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const MixedSchema schema({Column::count("n", testing::uniform(rng, -0.5, 0.5), testing::uniform(rng, 0.5, 1.5)),
                              Column::binary("b")});
    const MixedDensity density(schema, testing::random_mixture(rng, 2));
    const double tol = 1e-6;
    double total = 0.0;
    for (const auto& y2 : density.discrete_support(tol)) total += density.discrete_probability(y2);
    EXPECT_GT(total, 1.0 - tol);
    EXPECT_LE(total, 1.0 + 1e-9);
  }
}

TEST(MixedDensity, NormalisesOverContinuousAndDiscrete) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const MixedSchema schema({Column::continuous("x"), testing::random_discrete_column(rng, "d")});
    const MixedDensity density(schema, testing::random_mixture(rng, 2));
    double total = 0.0;
    for (const auto& y2 : density.discrete_support(1e-9)) {
      const auto f = [&](double x) { return std::exp(density.log_density(MixedPoint{Eigen::VectorXd::Constant(1, x), y2})); };
      total += gauss_kronrod<double, 31>::integrate(f, -30.0, 30.0, 15, 1e-10);
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(MixedDensity, PushforwardFrequencies) {
  Rng rng(11);
  const MixedSchema schema({Column::count("n", 0.0, 0.7), Column::binary("b", 0.3)});
  const MixedDensity density(schema, testing::random_mixture(rng, 2));
  constexpr std::size_t n = 40000;
  std::map<Outcome, int> counts;
  for (const auto& y : density.sample(n, rng)) ++counts[y.discrete];
  for (const auto& [y2, c] : counts) {
    const double p = density.discrete_probability(y2);
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(static_cast<double>(c) / n, p, 4 * se + 1e-12);
  }
}

TEST(MixedDensity, LatentFormOmitsJacobian) {
  const MixedSchema schema({Column::continuous("x", MonotoneMap::affine(3.0, 1.0)), Column::binary("b")});
  Rng rng(12);
  const MixedDensity density(schema, testing::random_mixture(rng, 2));
  const MixedPoint y{Eigen::VectorXd::Constant(1, 2.5), {1}};
  const double u = schema.map(0).inverse(2.5);
  EXPECT_NEAR(density.log_density(y), density.log_density_latent(Eigen::VectorXd::Constant(1, u), y.discrete) - std::log(3.0),
              1e-12);
}

TEST(EnumerateOutcomes, LastCoordinateFastest) {
  const std::vector<std::int64_t> max{1, 2};
  const auto out = enumerate_outcomes(max);
  ASSERT_EQ(out.size(), 6u);
  EXPECT_EQ(out[1], (Outcome{0, 1}));
  EXPECT_EQ(out[3], (Outcome{1, 0}));
}

TEST(DensityGrid, HeaderAndRows) {
  const MixedSchema schema({Column::continuous("h"), Column::binary("s")});
  const MixedDensity density(schema, LatentMixture::single(standard(2)));
  std::ostringstream out;
  write_density_grid(out, density, {Eigen::VectorXd::Zero(1)}, {{0}, {1}});
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "h,s,log_density,density");
  std::getline(in, row);
  EXPECT_EQ(row.rfind("0,0,", 0), 0u);
}

}  // namespace
}  // namespace mixscale
