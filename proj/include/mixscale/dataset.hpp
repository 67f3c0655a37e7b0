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

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string_view>
#include <string>
#include <vector>

#include "mixscale/schema.hpp"

namespace mixscale {

struct RejectedRow {
  /// 1-based line number in the source file (the header is line 1).
  std::size_t line = 0;
  std::string reason;
};

struct Dataset {
  MixedSchema schema;
  std::vector<MixedPoint> rows;
  /// Line number of each accepted row; used as its sampler key.
  std::vector<std::uint64_t> lines;
  std::vector<RejectedRow> rejected;
  /// Lowercase hex SHA-256 of the raw file bytes.
  std::string digest;

  [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
};

/// Hex SHA-256 of a byte string.
[[nodiscard]] std::string sha256_hex(std::string_view bytes);

/// Parses CSV text whose header names every schema column (extra columns are
/// ignored). Continuous fields are decimals, discrete fields nonnegative
/// integers. Rows that violate the schema or have missing values are
/// excluded and reported. Throws DomainError for empty input, missing
/// columns, or when more than half the rows are rejected.
[[nodiscard]] Dataset parse_dataset(std::string_view text, const MixedSchema& schema);

/// parse_dataset on the contents of a file.
[[nodiscard]] Dataset ingest(const std::string& path, const MixedSchema& schema);

/// CSV in schema column order with a header row.
void write_dataset(std::ostream& out, const MixedSchema& schema, const std::vector<MixedPoint>& rows);

}  // namespace mixscale
