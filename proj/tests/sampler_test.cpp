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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mixscale/errors.hpp"
#include "mixscale/sampler.hpp"
#include "test_support.hpp"

namespace mixscale {
namespace {

NIWParams make_niw(Eigen::Index p, double kappa, double dof) {
  NIWParams niw;
  niw.mean = Eigen::VectorXd::LinSpaced(p, -0.5, 0.5);
  niw.kappa = kappa;
  niw.dof = dof;
  niw.scale = Eigen::MatrixXd::Identity(p, p) + Eigen::MatrixXd::Constant(p, p, 0.2);
  return niw;
}

std::string draws_text(const PosteriorDraws& draws) {
  std::string out;
  for (const auto& d : draws.draws) out += serialize(d) + "\n";
  return out;
}

std::vector<MixedPoint> sample_data(const MixedSchema& schema, const LatentMixture& truth, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return MixedDensity(schema, truth).sample(n, rng);
}

TEST(Niw, BatchUpdateMatchesSequentialRankOne) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index p = testing::uniform_int(rng, 1, 4);
    const NIWParams prior = make_niw(p, testing::uniform(rng, 0.01, 2), p + 2.0);
    const int n = testing::uniform_int(rng, 1, 40);
    Eigen::MatrixXd pts(n, p);
    for (int i = 0; i < n; ++i) pts.row(i) = testing::random_vector(rng, p, 2.0).transpose();
    NIWParams seq = prior;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = pts.row(i).transpose();
      const Eigen::VectorXd d = x - seq.mean;
      seq.scale += seq.kappa / (seq.kappa + 1) * d * d.transpose();
      seq.mean = (seq.kappa * seq.mean + x) / (seq.kappa + 1);
      seq.kappa += 1;
      seq.dof += 1;
    }
    const NIWParams batch = niw_posterior(prior, pts);
    EXPECT_NEAR(batch.kappa, seq.kappa, 1e-10);
    EXPECT_NEAR(batch.dof, seq.dof, 1e-10);
    EXPECT_LT((batch.mean - seq.mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((batch.scale - seq.scale).cwiseAbs().maxCoeff(), 1e-10 * seq.scale.cwiseAbs().maxCoeff());
    // Splitting the batch gives the same posterior.
    const int half = n / 2;
    const NIWParams two = niw_posterior(niw_posterior(prior, pts.topRows(half)), pts.bottomRows(n - half));
    EXPECT_LT((two.scale - batch.scale).cwiseAbs().maxCoeff(), 1e-10 * batch.scale.cwiseAbs().maxCoeff());
  }
}

TEST(Niw, EmptyUpdateIsIdentityAndProblemsReported) {
  const NIWParams prior = make_niw(2, 1.0, 4.0);
  const NIWParams same = niw_posterior(prior, Eigen::MatrixXd(0, 2));
  EXPECT_EQ(same.scale, prior.scale);
  EXPECT_TRUE(prior.problems().empty());
  NIWParams bad = prior;
  bad.dof = 0.5;
  bad.kappa = 0.0;
  EXPECT_EQ(bad.problems().size(), 2u);
}

TEST(Niw, SampleMoments) {
  const NIWParams niw = make_niw(2, 2.0, 7.0);
  Rng rng(2);
  constexpr int n = 20000;
  Eigen::Matrix2d sigma_sum = Eigen::Matrix2d::Zero();
  Eigen::Vector2d mu_sum = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto g = sample_niw(niw, rng);
    sigma_sum += g.covariance();
    mu_sum += g.mean();
  }
  const Eigen::Matrix2d expected = niw.scale / (niw.dof - 3.0);
  EXPECT_LT(((sigma_sum / n) - expected).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT(((mu_sum / n) - niw.mean).cwiseAbs().maxCoeff(), 0.03);
}

TEST(InitState, LatentsRespectObservations) {
  const MixedSchema schema({Column::continuous("x", MonotoneMap::log_exp()), Column::binary("b"), Column::count("n")});
  const std::vector<MixedPoint> data{{Eigen::VectorXd::Constant(1, 2.0), {1, 0}}, {Eigen::VectorXd::Constant(1, 0.5), {0, 4}}};
  const AugmentedData aug = augment(data, schema);
  DPConfig cfg;
  cfg.k_max = 3;
  const SamplerState state = init_state(aug, schema, default_niw(initial_latents(aug, schema)), cfg);
  EXPECT_EQ(state.latents(0, 0), std::log(2.0));
  EXPECT_GE(state.latents(0, 1), 0.0);
  EXPECT_LE(state.latents(0, 1), 6.0);
  EXPECT_LT(state.latents(0, 2), 0.0);
  EXPECT_GE(state.latents(1, 2), 3.0);
  EXPECT_LT(state.latents(1, 2), 4.0);
  EXPECT_NO_THROW(check_state(state, aug, schema));
}

TEST(Augment, ReportsBadRows) {
  const MixedSchema schema({Column::binary("b")});
  const std::vector<MixedPoint> data{{Eigen::VectorXd(0), {1}}, {Eigen::VectorXd(0), {2}}, {Eigen::VectorXd(0), {-1}}};
  try {
    (void)augment(data, schema);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('1'), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
}

TEST(GibbsSweep, PreservesCellAndContinuousInvariants) {
  Rng rng(3);
  const MixedSchema schema({Column::continuous("x"), Column::binary("b"), Column::categorical("c", 3)});
  const auto data = sample_data(schema, testing::random_mixture(rng, 3), 150, 4);
  const AugmentedData aug = augment(data, schema);
  DPConfig cfg;
  cfg.k_max = 6;
  const NIWParams niw = default_niw(initial_latents(aug, schema));
  SamplerState state = init_state(aug, schema, niw, cfg);
  const Eigen::VectorXd cont = state.latents.col(0);
  for (int s = 0; s < 20; ++s) {
    gibbs_sweep(state, aug, schema, niw, cfg);
    ASSERT_NO_THROW(check_state(state, aug, schema));
    ASSERT_EQ(state.latents.col(0), cont);
    const double total = std::accumulate(state.weights.begin(), state.weights.end(), 0.0);
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_EQ(state.iteration, 20u);
}

TEST(RunSampler, SingleClusterContinuousPosteriorMean) {
  const MixedSchema schema({Column::continuous("x")});
  const auto data = sample_data(schema, LatentMixture::single(GaussianComponent(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1))), 500, 5);
  double sample_mean = 0.0;
  for (const auto& y : data) sample_mean += y.continuous[0] / 500.0;
  DPConfig cfg;
  cfg.k_max = 1;
  cfg.burn_in = 50;
  cfg.iterations = 400;
  cfg.seed = 6;
  const auto draws = run_sampler(data, schema, cfg);
  double post_mean = 0.0;
  for (const auto& d : draws.draws) post_mean += d.component(0).mean()[0] / static_cast<double>(draws.draws.size());
  EXPECT_NEAR(post_mean, sample_mean, 3.0 / std::sqrt(500.0));
}

TEST(RunSampler, BinaryProbitConcentrates) {
  const MixedSchema schema({Column::binary("b")});
  std::vector<MixedPoint> data;
  for (int i = 0; i < 1000; ++i) data.push_back({Eigen::VectorXd(0), {i < 700 ? 1 : 0}});
  DPConfig cfg;
  cfg.k_max = 1;
  cfg.burn_in = 200;
  cfg.iterations = 400;
  cfg.thin = 4;
  cfg.seed = 7;
  const auto draws = run_sampler(data, schema, cfg);
  const MixedDensity pred = predictive_density(draws);
  EXPECT_NEAR(pred.discrete_probability(std::vector<std::int64_t>{1}), 0.7, 0.05);
}

TEST(RunSampler, ZeroIterationsGivesNoDraws) {
  const MixedSchema schema({Column::continuous("x")});
  const auto data = sample_data(schema, LatentMixture::single(GaussianComponent(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1))), 20, 8);
  DPConfig cfg;
  cfg.iterations = 0;
  cfg.burn_in = 5;
  EXPECT_TRUE(run_sampler(data, schema, cfg).draws.empty());
}

class Reproducibility : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(9);
    schema_ = MixedSchema({Column::continuous("x"), Column::binary("b"), Column::count("n")});
    data_ = sample_data(schema_, testing::random_mixture(rng, 3), 120, 10);
    cfg_.k_max = 5;
    cfg_.burn_in = 10;
    cfg_.iterations = 20;
    cfg_.thin = 2;
    cfg_.seed = 11;
  }
  MixedSchema schema_;
  std::vector<MixedPoint> data_;
  DPConfig cfg_;
};

TEST_F(Reproducibility, SameSeedSameDraws) {
  EXPECT_EQ(draws_text(run_sampler(data_, schema_, cfg_)), draws_text(run_sampler(data_, schema_, cfg_)));
  DPConfig other = cfg_;
  other.seed = 12;
  EXPECT_NE(draws_text(run_sampler(data_, schema_, cfg_)), draws_text(run_sampler(data_, schema_, other)));
}

TEST_F(Reproducibility, ThreadCountInvariant) {
  DPConfig threaded = cfg_;
  threaded.threads = 3;
  EXPECT_EQ(draws_text(run_sampler(data_, schema_, cfg_)), draws_text(run_sampler(data_, schema_, threaded)));
}

TEST_F(Reproducibility, RowOrderInvariantWithKeys) {
  std::vector<std::uint64_t> keys(data_.size());
  std::iota(keys.begin(), keys.end(), 0);
  std::vector<std::size_t> perm(data_.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(13);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<MixedPoint> shuffled;
  std::vector<std::uint64_t> shuffled_keys;
  for (const auto i : perm) {
    shuffled.push_back(data_[i]);
    shuffled_keys.push_back(keys[i]);
  }
  const AugmentedData a = augment(data_, schema_, keys);
  const NIWParams niw = default_niw(initial_latents(a, schema_));
  EXPECT_EQ(draws_text(run_sampler(data_, schema_, niw, cfg_, keys)),
            draws_text(run_sampler(shuffled, schema_, niw, cfg_, shuffled_keys)));
}

TEST(RunSampler, PriorReproductionWithoutData) {
  const MixedSchema schema({Column::continuous("x"), Column::binary("b")});
  const NIWParams niw = make_niw(2, 1.0, 6.0);
  DPConfig cfg;
  cfg.alpha = 1.0;
  cfg.k_max = 5;
  cfg.burn_in = 0;
  cfg.iterations = 1000;
  cfg.seed = 14;
  const auto draws = run_sampler({}, schema, niw, cfg);
  ASSERT_EQ(draws.draws.size(), 1000u);
  const auto check = [](const std::vector<double>& xs, double expected) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean) / (n - 1);
    EXPECT_NEAR(mean, expected, 4 * std::sqrt(var / n));
  };
  std::vector<double> w1, w2, mu0, mu1, s00, s01;
  for (const auto& d : draws.draws) {
    w1.push_back(d.weights()[0]);
    w2.push_back(d.weights()[1]);
    mu0.push_back(d.component(0).mean()[0]);
    mu1.push_back(d.component(2).mean()[1]);
    s00.push_back(d.component(1).covariance()(0, 0));
    s01.push_back(d.component(3).covariance()(0, 1));
  }
  check(w1, 0.5);
  check(w2, 0.25);
  check(mu0, niw.mean[0]);
  check(mu1, niw.mean[1]);
  check(s00, niw.scale(0, 0) / 3.0);
  check(s01, niw.scale(0, 1) / 3.0);
}

TEST(PredictiveDensity, OneDrawAndDuplicates) {
  Rng rng(15);
  const MixedSchema schema({Column::continuous("x"), Column::binary("b")});
  PosteriorDraws one;
  one.schema = schema;
  one.draws = {testing::random_mixture(rng, 2)};
  PosteriorDraws two = one;
  two.draws.push_back(one.draws[0]);
  const MixedPoint y{Eigen::VectorXd::Constant(1, 0.3), {1}};
  const double direct = MixedDensity(schema, one.draws[0]).log_density(y);
  EXPECT_NEAR(predictive_density(one).log_density(y), direct, 1e-14);
  EXPECT_NEAR(predictive_density(two).log_density(y), direct, 1e-14);
}

TEST(DPConfig, Problems) {
  DPConfig cfg;
  EXPECT_TRUE(cfg.problems().empty());
  cfg.alpha = 0.0;
  cfg.thin = 0;
  EXPECT_EQ(cfg.problems().size(), 2u);
}

}  // namespace
}  // namespace mixscale
