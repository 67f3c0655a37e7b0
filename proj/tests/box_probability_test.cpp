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

#include <gtest/gtest.h>

#include "mixscale/errors.hpp"
#include "mixscale/gaussian.hpp"
#include "mixscale/normal.hpp"
#include "test_support.hpp"

namespace mixscale {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BvnCase {
  double a1, b1, a2, b2, r, expected;
};

// Reference values from an independent high-precision integrator.
const BvnCase kBvnCases[] = {
    {0, kInf, 0, kInf, 0.5, 0.33333333333333333},
    {-1, 0.5, -0.3, 2, -0.7, 0.3778025203046146},
    {3, 4, -kInf, -2, 0.6, 6.5059091159247859e-10},
    {5, kInf, 5, kInf, 0.3, 4.4951960147734216e-11},
    {6, 7, -kInf, 0, 0.9, 2.8737368179961314e-45},
    {-kInf, -4, 4, kInf, 0.2, 1.2323314936013107e-11},
    {1, kInf, -kInf, -3, 0.95, 3.3802906351492223e-39},
    {-0.5, 0.5, -0.5, 0.5, 0.0, 0.14663149630841187},
    {8, 9, 8, 9, 0.5, 1.7805614713721935e-21},
    {2, 2.1, -1, 1, -0.3, 0.0029883288852005918},
};

GaussianComponent standard_pair(double r) {
  Eigen::Matrix2d cov;
  cov << 1, r, r, 1;
  return GaussianComponent(Eigen::Vector2d::Zero(), cov);
}

TEST(BoxProbability, BivariateReferenceValues) {
  for (const auto& c : kBvnCases) {
    const Cell cell{Eigen::Vector2d(c.a1, c.a2), Eigen::Vector2d(c.b1, c.b2)};
    const double got = box_probability(standard_pair(c.r), cell).probability;
    EXPECT_NEAR(got / c.expected, 1.0, 1e-7) << c.a1 << ' ' << c.b1 << ' ' << c.a2 << ' ' << c.b2 << ' ' << c.r;
  }
}

TEST(BoxProbability, OrthantClosedForm) {
  for (double r : {-0.9, -0.5, 0.0, 0.3, 0.8, 0.99}) {
    const double expected = 0.25 + std::asin(r) / (2 * std::numbers::pi);
    EXPECT_NEAR(bivariate_upper_orthant(0, 0, r), expected, 1e-15);
    const Cell cell{Eigen::Vector2d::Zero(), Eigen::Vector2d::Constant(kInf)};
    EXPECT_NEAR(box_probability(standard_pair(r), cell).probability, expected, 1e-12);
  }
}

TEST(BoxProbability, TrivariateReferenceValues) {
  Eigen::Matrix3d cov;
  cov << 2, 0.6, -0.3, 0.6, 1, 0.4, -0.3, 0.4, 1.5;
  {
    const GaussianComponent g(Eigen::Vector3d(0.1, -0.2, 0.3), cov);
    const Cell cell{Eigen::Vector3d(-1, 0, -kInf), Eigen::Vector3d(1, kInf, 0.5)};
    EXPECT_NEAR(box_probability(g, cell).probability, 0.0824431726704038, 1e-10);
  }
  {
    const GaussianComponent g(Eigen::Vector3d(0.5, 1, -0.5), cov);
    const Cell cell{Eigen::Vector3d(2, 1, -1), Eigen::Vector3d(3, 2, 0)};
    EXPECT_NEAR(box_probability(g, cell).probability, 0.0148822032275238, 1e-10);
  }
  {
    Eigen::Matrix3d eq = Eigen::Matrix3d::Constant(0.5);
    eq.diagonal().setOnes();
    const GaussianComponent g(Eigen::Vector3d::Zero(), eq);
    const Cell cell{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(kInf)};
    EXPECT_NEAR(box_probability(g, cell).probability, 0.25, 1e-10);
  }
}

TEST(BoxProbability, UnivariateExact) {
  const GaussianComponent g(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 4.0));
  const Cell cell{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 3.0)};
  const auto est = box_probability(g, cell);
  EXPECT_NEAR(est.probability, 0.3413447460685429, 1e-15);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(BoxProbability, EmptyAndFullBoxes) {
  Rng rng(1);
  for (Eigen::Index p = 1; p <= 5; ++p) {
    const GaussianComponent g = testing::random_component(rng, p);
    EXPECT_NEAR(box_probability(g, Cell::everything(p)).probability, 1.0, 1e-12);
    Cell empty = Cell::everything(p);
    empty.lower[0] = 1.0;
    empty.upper[0] = 1.0;
    EXPECT_EQ(box_probability(g, empty).probability, 0.0);
  }
}

TEST(BoxProbability, LatticeAgreesWithDeterministicRoutes) {
  Rng rng(21);
  BoxSettings lattice;
  lattice.exact_low_dim = false;
  lattice.accuracy = 1e-5;
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index p = testing::uniform_int(rng, 2, 3);
    const GaussianComponent g = testing::random_component(rng, p);
    Cell cell = Cell::everything(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double lo = testing::uniform(rng, -2, 1);
      if (testing::uniform(rng, 0, 1) < 0.8) cell.lower[j] = lo;
      if (testing::uniform(rng, 0, 1) < 0.8) cell.upper[j] = lo + testing::uniform(rng, 0.2, 3);
    }
    const auto exact = box_probability(g, cell);
    const auto qmc = box_probability(g, cell, lattice);
    EXPECT_NEAR(exact.probability, qmc.probability, 4 * qmc.std_error + 1e-12);
  }
}

TEST(BoxProbability, MonteCarloAgreementAcrossDimensions) {
  Rng rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index p = testing::uniform_int(rng, 2, 5);
    const GaussianComponent g = testing::random_component(rng, p);
    Cell cell = Cell::everything(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      cell.lower[j] = g.mean()[j] - testing::uniform(rng, 0, 2);
      cell.upper[j] = cell.lower[j] + testing::uniform(rng, 0.5, 3);
    }
    BoxSettings settings;
    settings.accuracy = 1e-4;
    const auto est = box_probability(g, cell, settings);
    constexpr int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += cell.contains(g.sample(rng)) ? 1 : 0;
    const double phat = static_cast<double>(hits) / n;
    const double se = std::sqrt(est.probability * (1 - est.probability) / n);
    EXPECT_NEAR(phat, est.probability, 4 * se + est.std_error);
  }
}

TEST(BoxProbability, InclusionExclusionConsistency) {
  // Splitting a box along one coordinate partitions its probability.
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index p = testing::uniform_int(rng, 2, 3);
    const GaussianComponent g = testing::random_component(rng, p);
    Cell whole = Cell::everything(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      whole.lower[j] = testing::uniform(rng, -3, 0);
      whole.upper[j] = testing::uniform(rng, 0.1, 3);
    }
    const double split = testing::uniform(rng, whole.lower[0], whole.upper[0]);
    Cell left = whole, right = whole;
    left.upper[0] = split;
    right.lower[0] = split;
    EXPECT_NEAR(box_probability(g, left).probability + box_probability(g, right).probability,
                box_probability(g, whole).probability, 1e-10);
  }
}

TEST(BoxProbability, ShiftedMeanOverload) {
  Rng rng(51);
  const GaussianComponent g = testing::random_component(rng, 3);
  const Eigen::VectorXd m = testing::random_vector(rng, 3);
  const Cell cell{Eigen::Vector3d(-1, -kInf, 0), Eigen::Vector3d(1, 0.5, kInf)};
  EXPECT_NEAR(box_probability(g, m, cell).probability,
              box_probability(GaussianComponent(m, g.covariance()), cell).probability, 1e-14);
}

}  // namespace
}  // namespace mixscale
