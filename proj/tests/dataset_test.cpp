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

#include <sstream>

#include <gtest/gtest.h>

#include "mixscale/dataset.hpp"
#include "mixscale/errors.hpp"
#include "test_support.hpp"

namespace mixscale {
namespace {

MixedSchema small_schema() {
  return MixedSchema({Column::continuous("height"), Column::binary("smoker"), Column::count("visits")});
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ParseDataset, AcceptsReorderedAndExtraColumns) {
  const std::string text = "visits,note,smoker,height\n3,\"a, b\",1,1.75\n0,x,0,-0.5\n";
  const Dataset ds = parse_dataset(text, small_schema());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.rows[0].continuous[0], 1.75);
  EXPECT_EQ(ds.rows[0].discrete, (std::vector<std::int64_t>{1, 3}));
  EXPECT_EQ(ds.lines, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_EQ(ds.digest, sha256_hex(text));
  EXPECT_TRUE(ds.rejected.empty());
}

TEST(ParseDataset, ReportsBadRowsWithLineNumbers) {
  const std::string text = "height,smoker,visits\n1,0,2\n2,2,1\n3,1,NA\n4,1,x\n5,1,0\n6,0,1\n";
  const Dataset ds = parse_dataset(text, small_schema());
  EXPECT_EQ(ds.size(), 3u);
  ASSERT_EQ(ds.rejected.size(), 3u);
  EXPECT_EQ(ds.rejected[0].line, 3u);
  EXPECT_NE(ds.rejected[0].reason.find("smoker"), std::string::npos);
  EXPECT_EQ(ds.rejected[1].line, 4u);
  EXPECT_EQ(ds.rejected[2].line, 5u);
}

TEST(ParseDataset, FatalProblems) {
  EXPECT_THROW((void)parse_dataset("", small_schema()), DomainError);
  EXPECT_THROW((void)parse_dataset("height,smoker\n1,0\n", small_schema()), DomainError);
  EXPECT_THROW((void)parse_dataset("height,smoker,visits\n1,5,0\n2,5,0\n3,0,0\n", small_schema()), DomainError);
  EXPECT_THROW((void)ingest("/nonexistent/mixscale.csv", small_schema()), DomainError);
}

TEST(WriteDataset, RoundTripIsExact) {
  Rng rng(1);
  const MixedSchema schema = small_schema();
  std::vector<MixedPoint> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({Eigen::VectorXd::Constant(1, testing::uniform(rng, -1e3, 1e3) / 7.0),
                    {testing::uniform_int(rng, 0, 1), testing::uniform_int(rng, 0, 20)}});
  }
  std::ostringstream out;
  write_dataset(out, schema, rows);
  const Dataset back = parse_dataset(out.str(), schema);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].continuous[0], rows[i].continuous[0]);
    EXPECT_EQ(back.rows[i].discrete, rows[i].discrete);
  }
}

}  // namespace
}  // namespace mixscale
