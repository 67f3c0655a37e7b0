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
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mixscale/errors.hpp"
#include "mixscale/theory_lab.hpp"
#include "test_support.hpp"

namespace mixscale {
namespace {

LatentMixture normal1(double mean) {
  return LatentMixture::single(GaussianComponent(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Identity(1, 1)));
}

TEST(KlNonExpansion, BinaryExample) {
  const MixedSchema schema({Column::binary("b")});
  const auto report = check_lemma1(normal1(0.0), normal1(0.5), schema);
  EXPECT_NEAR(report.latent.value, 0.125, 1e-7);
  EXPECT_NEAR(report.mixed.value, 0.07928190788119227, 1e-10);
  EXPECT_GT(report.slack(), 0.0);
  EXPECT_TRUE(report.holds());
  EXPECT_EQ(report.metric, LemmaMetric::kl);
}

TEST(L1NonExpansion, BinaryExample) {
  const MixedSchema schema({Column::binary("b")});
  const auto report = check_lemma2_l1(normal1(0.0), normal1(0.5), schema);
  EXPECT_NEAR(report.latent.value, 0.3948253027316948, 1e-7);
  EXPECT_NEAR(report.mixed.value, 0.38292492254802624, 1e-10);
  EXPECT_TRUE(report.holds());
}

TEST(NonExpansion, IdenticalMixturesHaveZeroSlack) {
  Rng rng(1);
  const MixedSchema schema = testing::random_schema(rng, 1, 2);
  const LatentMixture f = testing::random_mixture(rng, 3);
  for (const auto& report : {check_lemma1(f, f, schema), check_lemma2_l1(f, f, schema)}) {
    EXPECT_NEAR(report.latent.value, 0.0, 1e-7);
    EXPECT_NEAR(report.mixed.value, 0.0, 1e-7);
    EXPECT_TRUE(report.holds());
  }
}

TEST(NonExpansion, RandomInstancesAreWellFormed) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const LemmaInstance inst = random_lemma_instance(rng);
    EXPECT_LE(inst.schema.p(), 3);
    EXPECT_GE(inst.schema.p2(), 1);
    EXPECT_TRUE(validate_schema(inst.schema).empty());
    EXPECT_EQ(inst.truth.dimension(), inst.schema.p());
    EXPECT_EQ(inst.other.dimension(), inst.schema.p());
    EXPECT_FALSE(inst.description.empty());
  }
}

TEST(NonExpansion, SmallSuitesHold) {
  for (const auto metric : {LemmaMetric::kl, LemmaMetric::l1}) {
    const auto reports = run_lemma_suite(metric, 6, 3);
    ASSERT_EQ(reports.size(), 6u);
    for (const auto& r : reports) EXPECT_TRUE(r.holds()) << r.instance << " slack " << r.slack();
  }
}

TEST(NonExpansion, SuiteIsDeterministicAcrossThreads) {
  const auto a = run_lemma_suite(LemmaMetric::l1, 4, 5, {}, 1);
  const auto b = run_lemma_suite(LemmaMetric::l1, 4, 5, {}, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mixed.value, b[i].mixed.value);
    EXPECT_EQ(a[i].instance, b[i].instance);
  }
}

TEST(NonExpansion, ReportsAreJsonLines) {
  const auto reports = run_lemma_suite(LemmaMetric::kl, 2, 7);
  std::ostringstream out;
  write_lemma_reports(out, reports);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("slack"));
    EXPECT_TRUE(j.contains("holds"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(Contraction, ReportStatistics) {
  ContractionReport report;
  report.n_grid = {100, 400, 1600};
  report.mean_l1 = {0.3, 0.2, 0.25};
  report.reference_log_power = 0.0;
  EXPECT_EQ(report.inversions(), 1);
  const auto curve = report.reference_curve();
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_NEAR(curve[0], 0.3, 1e-15);
  EXPECT_NEAR(curve[1], 0.15, 1e-15);
}

TEST(Contraction, ValidatesConfig) {
  ContractionConfig cfg;
  cfg.replications = 2;
  EXPECT_THROW((void)contraction_experiment(canonical_truth(), cfg), DomainError);
  cfg.replications = 3;
  cfg.n_grid = {400, 100};
  EXPECT_THROW((void)contraction_experiment(canonical_truth(), cfg), DomainError);
}

TEST(Contraction, TinyRunRecordsEveryReplication) {
  ContractionConfig cfg;
  cfg.n_grid = {30, 60};
  cfg.replications = 3;
  cfg.sampler.k_max = 3;
  cfg.sampler.burn_in = 5;
  cfg.sampler.iterations = 6;
  cfg.sampler.thin = 2;
  cfg.divergence.tail_tol = 1e-4;
  cfg.divergence.quad_rel_tol = 1e-5;
  cfg.divergence.quad_abs_tol = 1e-7;
  cfg.seed = 3;
  const auto report = contraction_experiment(canonical_truth(), cfg);
  ASSERT_EQ(report.records.size(), 6u);
  for (const auto& r : report.records) {
    EXPECT_FALSE(r.failed) << r.error;
    EXPECT_EQ(r.draws, 3u);
    EXPECT_GT(r.l1, 0.0);
    EXPECT_LT(r.l1, 2.0);
  }
  std::ostringstream csv;
  write_contraction_csv(csv, report);
  EXPECT_EQ(csv.str().rfind("n,replication,l1,std_error,draws,seconds,status\n", 0), 0u);
}

TEST(CanonicalTruth, Layout) {
  const MixedDensity truth = canonical_truth();
  EXPECT_EQ(truth.schema().p1(), 1);
  EXPECT_EQ(truth.schema().p2(), 2);
  EXPECT_EQ(truth.latent().size(), 1u);
}

}  // namespace
}  // namespace mixscale
