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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mixscale {

/// A monotone one-to-one differentiable map from a latent real coordinate to
/// the support of an observed continuous coordinate.
class MonotoneMap {
 public:
  enum class Kind { identity, affine, log_exp };

  static MonotoneMap identity() { return MonotoneMap{Kind::identity, 1.0, 0.0}; }
  /// y = scale * latent + shift. A negative scale gives a decreasing map.
  static MonotoneMap affine(double scale, double shift) { return MonotoneMap{Kind::affine, scale, shift}; }
  /// y = exp(latent), onto (0, inf).
  static MonotoneMap log_exp() { return MonotoneMap{Kind::log_exp, 1.0, 0.0}; }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double scale() const noexcept { return scale_; }
  [[nodiscard]] double shift() const noexcept { return shift_; }

  [[nodiscard]] double forward(double latent) const;
  /// Throws DomainError when y is outside the range of the map.
  [[nodiscard]] double inverse(double y) const;
  /// log |d inverse / dy| at y.
  [[nodiscard]] double log_abs_inverse_derivative(double y) const;
  [[nodiscard]] bool in_range(double y) const;

  friend bool operator==(const MonotoneMap&, const MonotoneMap&) = default;

 private:
  MonotoneMap(Kind kind, double scale, double shift) : kind_{kind}, scale_{scale}, shift_{shift} {}

  Kind kind_;
  double scale_;
  double shift_;
};

/// Ordered partition of the real line into half-open cells [t_k, t_{k+1}),
/// with t_0 = -inf and the last cut followed by +inf.
///
/// Bounded partitions store their cuts; unbounded ones (counts) generate
/// t_k = first_cut + step * (k - 1) for k >= 1, so level 0 is (-inf, first_cut).
class PartitionSpec {
 public:
  PartitionSpec() = default;

  static PartitionSpec from_cuts(std::vector<double> cuts);
  static PartitionSpec unbounded(double first_cut = 0.0, double step = 1.0);

  [[nodiscard]] bool bounded() const noexcept { return bounded_; }
  /// Number of cells, or nullopt when unbounded.
  [[nodiscard]] std::optional<std::int64_t> level_count() const;
  [[nodiscard]] const std::vector<double>& cuts() const noexcept { return cuts_; }
  [[nodiscard]] double first_cut() const noexcept { return first_cut_; }
  [[nodiscard]] double step() const noexcept { return step_; }

  /// Cut t_k for k >= 0; t_0 = -inf and, when bounded, t_q = +inf.
  [[nodiscard]] double cut(std::int64_t k) const;
  [[nodiscard]] double lower(std::int64_t level) const { return cut(level); }
  [[nodiscard]] double upper(std::int64_t level) const { return cut(level + 1); }
  /// Index of the cell containing x. Boundary points belong to the upper cell.
  [[nodiscard]] std::int64_t level_of(double x) const;

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;

 private:
  bool bounded_ = true;
  std::vector<double> cuts_;
  double first_cut_ = 0.0;
  double step_ = 1.0;
};

enum class ColumnKind { continuous, binary, categorical, count };

[[nodiscard]] std::string to_string(ColumnKind kind);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  MonotoneMap map = MonotoneMap::identity();  // continuous columns only
  PartitionSpec partition;                    // discrete columns only
  std::int64_t levels = 0;                    // declared q_j; 0 for continuous and count

  static Column continuous(std::string name, MonotoneMap map = MonotoneMap::identity());
  static Column binary(std::string name, double cut = 0.0);
  static Column categorical(std::string name, std::int64_t levels, std::vector<double> cuts);
  static Column categorical(std::string name, std::int64_t levels);
  static Column count(std::string name, double first_cut = 0.0, double step = 1.0);
};

/// Axis-aligned hyper-rectangle [lower, upper) in the discrete latent block.
struct Cell {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  [[nodiscard]] Eigen::Index dimension() const noexcept { return lower.size(); }
  [[nodiscard]] bool contains(const Eigen::VectorXd& x) const;
  /// The whole space (-inf, inf)^dim.
  static Cell everything(Eigen::Index dim);
};

/// An observation y = (y1, y2) in schema block order.
struct MixedPoint {
  Eigen::VectorXd continuous;
  std::vector<std::int64_t> discrete;
};

/// The mixed-scale data model. Columns keep the user order; the latent space
/// is laid out continuous block first, each block in user order.
class MixedSchema {
 public:
  MixedSchema() = default;
  explicit MixedSchema(std::vector<Column> columns);

  [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }
  [[nodiscard]] Eigen::Index p1() const noexcept { return static_cast<Eigen::Index>(continuous_.size()); }
  [[nodiscard]] Eigen::Index p2() const noexcept { return static_cast<Eigen::Index>(discrete_.size()); }
  [[nodiscard]] Eigen::Index p() const noexcept { return p1() + p2(); }

  [[nodiscard]] const Column& continuous_column(Eigen::Index j) const { return columns_[continuous_[j]]; }
  [[nodiscard]] const Column& discrete_column(Eigen::Index j) const { return columns_[discrete_[j]]; }
  [[nodiscard]] const MonotoneMap& map(Eigen::Index j) const { return continuous_column(j).map; }
  [[nodiscard]] const PartitionSpec& partition(Eigen::Index j) const { return discrete_column(j).partition; }
  /// Positions of the continuous / discrete columns in user order.
  [[nodiscard]] std::span<const std::size_t> continuous_positions() const noexcept { return continuous_; }
  [[nodiscard]] std::span<const std::size_t> discrete_positions() const noexcept { return discrete_; }

  /// Returns an empty string when the point fits the schema, else the reason.
  [[nodiscard]] std::string check_point(const MixedPoint& y) const;

 private:
  std::vector<Column> columns_;
  std::vector<std::size_t> continuous_;
  std::vector<std::size_t> discrete_;
};

/// All invariant violations of the schema; empty means valid.
[[nodiscard]] std::vector<std::string> validate_schema(const MixedSchema& schema);

/// Throws DomainError listing every violation.
void require_valid(const MixedSchema& schema);

/// The hyper-rectangle A_{y2} of latent values that round to y2.
[[nodiscard]] Cell cell_of(const MixedSchema& schema, std::span<const std::int64_t> y2);

struct LatentContinuous {
  Eigen::VectorXd latent;
  double log_jacobian = 0.0;
};

/// y1* = h1^{-1}(y1) together with sum_j log |d h_{1,j}^{-1} / dy (y1_j)|.
[[nodiscard]] LatentContinuous latent_of_continuous(const MixedSchema& schema, const Eigen::VectorXd& y1);

/// Applies h to a full latent vector (continuous block first).
[[nodiscard]] MixedPoint round_latent(const MixedSchema& schema, const Eigen::VectorXd& latent);

/// True when two schemas describe the same observation space: same column
/// kinds, level counts and continuous maps. Partitions may differ.
[[nodiscard]] bool same_outcome_space(const MixedSchema& a, const MixedSchema& b);

/// p continuous identity-mapped columns named x0, x1, ...
[[nodiscard]] MixedSchema identity_schema(Eigen::Index p);

[[nodiscard]] MixedSchema parse_schema(const std::string& json_text);
[[nodiscard]] MixedSchema load_schema(const std::filesystem::path& path);
[[nodiscard]] std::string schema_to_json(const MixedSchema& schema);

}  // namespace mixscale
