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

#include "mixscale/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mixscale/errors.hpp"

namespace mixscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double MonotoneMap::forward(double latent) const {
  switch (kind_) {
    case Kind::identity:
      return latent;
    case Kind::affine:
      return scale_ * latent + shift_;
    case Kind::log_exp:
      return std::exp(latent);
  }
  return latent;
}

bool MonotoneMap::in_range(double y) const {
  if (!std::isfinite(y)) {
    return false;
  }
  return kind_ != Kind::log_exp || y > 0.0;
}

double MonotoneMap::inverse(double y) const {
  if (!in_range(y)) {
    std::ostringstream msg;
    msg << "value " << y << " is outside the range of the continuous map";
    throw DomainError(msg.str());
  }
  switch (kind_) {
    case Kind::identity:
      return y;
    case Kind::affine:
      return (y - shift_) / scale_;
    case Kind::log_exp:
      return std::log(y);
  }
  return y;
}

double MonotoneMap::log_abs_inverse_derivative(double y) const {
  switch (kind_) {
    case Kind::identity:
      return 0.0;
    case Kind::affine:
      return -std::log(std::abs(scale_));
    case Kind::log_exp:
      return -std::log(y);
  }
  return 0.0;
}

PartitionSpec PartitionSpec::from_cuts(std::vector<double> cuts) {
  PartitionSpec spec;
  spec.bounded_ = true;
  spec.cuts_ = std::move(cuts);
  return spec;
}

PartitionSpec PartitionSpec::unbounded(double first_cut, double step) {
  PartitionSpec spec;
  spec.bounded_ = false;
  spec.first_cut_ = first_cut;
  spec.step_ = step;
  return spec;
}

std::optional<std::int64_t> PartitionSpec::level_count() const {
  if (!bounded_) {
    return std::nullopt;
  }
  return static_cast<std::int64_t>(cuts_.size()) + 1;
}

double PartitionSpec::cut(std::int64_t k) const {
  if (k <= 0) {
    return -kInf;
  }
  if (bounded_) {
    const auto n = static_cast<std::int64_t>(cuts_.size());
    return k > n ? kInf : cuts_[static_cast<std::size_t>(k - 1)];
  }
  return first_cut_ + step_ * static_cast<double>(k - 1);
}

std::int64_t PartitionSpec::level_of(double x) const {
  if (bounded_) {
    return std::upper_bound(cuts_.begin(), cuts_.end(), x) - cuts_.begin();
  }
  if (x < first_cut_) {
    return 0;
  }
  auto level = static_cast<std::int64_t>(std::floor((x - first_cut_) / step_)) + 1;
  // floor() can land one cell off when x sits within rounding of a cut.
  while (level > 1 && x < cut(level)) {
    --level;
  }
  while (x >= cut(level + 1)) {
    ++level;
  }
  return level;
}

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous:
      return "continuous";
    case ColumnKind::binary:
      return "binary";
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::count:
      return "count";
  }
  return "unknown";
}

Column Column::continuous(std::string name, MonotoneMap map) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::continuous;
  c.map = map;
  return c;
}

Column Column::binary(std::string name, double cut) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::binary;
  c.partition = PartitionSpec::from_cuts({cut});
  c.levels = 2;
  return c;
}

Column Column::categorical(std::string name, std::int64_t levels, std::vector<double> cuts) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::categorical;
  c.partition = PartitionSpec::from_cuts(std::move(cuts));
  c.levels = levels;
  return c;
}

Column Column::categorical(std::string name, std::int64_t levels) {
  std::vector<double> cuts;
  for (std::int64_t k = 0; k + 1 < levels; ++k) {
    cuts.push_back(static_cast<double>(k));
  }
  return categorical(std::move(name), levels, std::move(cuts));
}

Column Column::count(std::string name, double first_cut, double step) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::count;
  c.partition = PartitionSpec::unbounded(first_cut, step);
  return c;
}

bool Cell::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) {
    return false;
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x[j] >= lower[j] && x[j] < upper[j])) {
      return false;
    }
  }
  return true;
}

Cell Cell::everything(Eigen::Index dim) {
  return Cell{Eigen::VectorXd::Constant(dim, -kInf), Eigen::VectorXd::Constant(dim, kInf)};
}

MixedSchema::MixedSchema(std::vector<Column> columns) : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].kind == ColumnKind::continuous) {
      continuous_.push_back(i);
    } else {
      discrete_.push_back(i);
    }
  }
}

std::string MixedSchema::check_point(const MixedPoint& y) const {
  std::ostringstream msg;
  if (y.continuous.size() != p1() || static_cast<Eigen::Index>(y.discrete.size()) != p2()) {
    msg << "point has " << y.continuous.size() << " continuous and " << y.discrete.size()
        << " discrete values, schema expects " << p1() << " and " << p2();
    return msg.str();
  }
  for (Eigen::Index j = 0; j < p1(); ++j) {
    if (!map(j).in_range(y.continuous[j])) {
      msg << "column '" << continuous_column(j).name << "': value " << y.continuous[j]
          << " outside the map range";
      return msg.str();
    }
  }
  for (Eigen::Index j = 0; j < p2(); ++j) {
    const auto level = y.discrete[static_cast<std::size_t>(j)];
    const auto q = partition(j).level_count();
    if (level < 0 || (q && level >= *q)) {
      msg << "column '" << discrete_column(j).name << "': level " << level << " out of range";
      return msg.str();
    }
  }
  return {};
}

std::vector<std::string> validate_schema(const MixedSchema& schema) {
  std::vector<std::string> issues;
  if (schema.columns().empty()) {
    issues.emplace_back("schema has no columns");
  }
  std::set<std::string> names;
  for (const auto& column : schema.columns()) {
    const std::string where = "column '" + column.name + "': ";
    if (column.name.empty()) {
      issues.emplace_back("column with empty name");
    } else if (!names.insert(column.name).second) {
      issues.push_back(where + "duplicate name");
    }
    if (column.kind == ColumnKind::continuous) {
      if (column.map.kind() == MonotoneMap::Kind::affine &&
          (column.map.scale() == 0.0 || !std::isfinite(column.map.scale()) || !std::isfinite(column.map.shift()))) {
        issues.push_back(where + "degenerate map");
      }
      continue;
    }
    const auto& part = column.partition;
    if (column.kind == ColumnKind::count) {
      if (part.bounded()) {
        issues.push_back(where + "count columns need an unbounded cut rule");
      } else if (!(part.step() > 0.0) || !std::isfinite(part.step()) || !std::isfinite(part.first_cut())) {
        issues.push_back(where + "cut rule step must be positive and finite");
      }
      continue;
    }
    if (!part.bounded()) {
      issues.push_back(where + "binary and categorical columns need explicit cuts");
      continue;
    }
    const auto& cuts = part.cuts();
    if (std::any_of(cuts.begin(), cuts.end(), [](double c) { return !std::isfinite(c); })) {
      issues.push_back(where + "cuts must be finite");
    }
    if (std::adjacent_find(cuts.begin(), cuts.end(), std::greater_equal<>()) != cuts.end()) {
      issues.push_back(where + "cuts not increasing");
    }
    if (column.levels < 2) {
      issues.push_back(where + "needs at least 2 levels");
    }
    if (column.kind == ColumnKind::binary && column.levels != 2) {
      issues.push_back(where + "binary column must have 2 levels");
    }
    if (*part.level_count() != column.levels) {
      std::ostringstream msg;
      msg << where << "cell-count mismatch: " << cuts.size() << " cuts give " << *part.level_count()
          << " cells, declared " << column.levels << " levels";
      issues.push_back(msg.str());
    }
  }
  return issues;
}

void require_valid(const MixedSchema& schema) {
  const auto issues = validate_schema(schema);
  if (issues.empty()) {
    return;
  }
  std::string msg = "invalid schema:";
  for (const auto& issue : issues) {
    msg += "\n  " + issue;
  }
  throw DomainError(msg);
}

Cell cell_of(const MixedSchema& schema, std::span<const std::int64_t> y2) {
  if (static_cast<Eigen::Index>(y2.size()) != schema.p2()) {
    throw DomainError("discrete vector has wrong dimension");
  }
  Cell cell{Eigen::VectorXd(schema.p2()), Eigen::VectorXd(schema.p2())};
  for (Eigen::Index j = 0; j < schema.p2(); ++j) {
    const auto level = y2[static_cast<std::size_t>(j)];
    const auto& part = schema.partition(j);
    const auto q = part.level_count();
    if (level < 0 || (q && level >= *q)) {
      std::ostringstream msg;
      msg << "column '" << schema.discrete_column(j).name << "': level " << level << " out of range";
      throw DomainError(msg.str());
    }
    cell.lower[j] = part.lower(level);
    cell.upper[j] = part.upper(level);
  }
  return cell;
}

LatentContinuous latent_of_continuous(const MixedSchema& schema, const Eigen::VectorXd& y1) {
  if (y1.size() != schema.p1()) {
    throw DomainError("continuous vector has wrong dimension");
  }
  LatentContinuous out{Eigen::VectorXd(y1.size()), 0.0};
  for (Eigen::Index j = 0; j < y1.size(); ++j) {
    const auto& m = schema.map(j);
    if (!m.in_range(y1[j])) {
      std::ostringstream msg;
      msg << "column '" << schema.continuous_column(j).name << "': value " << y1[j] << " outside the map range";
      throw DomainError(msg.str());
    }
    out.latent[j] = m.inverse(y1[j]);
    out.log_jacobian += m.log_abs_inverse_derivative(y1[j]);
  }
  return out;
}

MixedPoint round_latent(const MixedSchema& schema, const Eigen::VectorXd& latent) {
  MixedPoint y{Eigen::VectorXd(schema.p1()), std::vector<std::int64_t>(static_cast<std::size_t>(schema.p2()))};
  for (Eigen::Index j = 0; j < schema.p1(); ++j) {
    y.continuous[j] = schema.map(j).forward(latent[j]);
  }
  for (Eigen::Index j = 0; j < schema.p2(); ++j) {
    y.discrete[static_cast<std::size_t>(j)] = schema.partition(j).level_of(latent[schema.p1() + j]);
  }
  return y;
}

bool same_outcome_space(const MixedSchema& a, const MixedSchema& b) {
  if (a.p1() != b.p1() || a.p2() != b.p2()) {
    return false;
  }
  for (Eigen::Index j = 0; j < a.p1(); ++j) {
    if (!(a.map(j) == b.map(j))) {
      return false;
    }
  }
  for (Eigen::Index j = 0; j < a.p2(); ++j) {
    if (a.partition(j).level_count() != b.partition(j).level_count()) {
      return false;
    }
  }
  return true;
}

MixedSchema identity_schema(Eigen::Index p) {
  std::vector<Column> columns;
  for (Eigen::Index j = 0; j < p; ++j) {
    columns.push_back(Column::continuous("x" + std::to_string(j)));
  }
  return MixedSchema(std::move(columns));
}

namespace {

using nlohmann::json;

Column column_from_json(const json& entry) {
  const auto name = entry.at("name").get<std::string>();
  const auto kind = entry.at("kind").get<std::string>();
  if (kind == "continuous") {
    const auto map = entry.value("map", std::string{"identity"});
    if (map == "identity") {
      return Column::continuous(name);
    }
    if (map == "affine") {
      return Column::continuous(name, MonotoneMap::affine(entry.value("scale", 1.0), entry.value("shift", 0.0)));
    }
    if (map == "log") {
      return Column::continuous(name, MonotoneMap::log_exp());
    }
    throw DomainError("column '" + name + "': unknown map '" + map + "'");
  }
  if (kind == "binary") {
    Column c = Column::binary(name);
    if (entry.contains("cuts")) {
      c.partition = PartitionSpec::from_cuts(entry.at("cuts").get<std::vector<double>>());
    }
    return c;
  }
  if (kind == "categorical") {
    const auto levels = entry.at("levels").get<std::int64_t>();
    if (entry.contains("cuts")) {
      return Column::categorical(name, levels, entry.at("cuts").get<std::vector<double>>());
    }
    return Column::categorical(name, levels);
  }
  if (kind == "count") {
    return Column::count(name, entry.value("first_cut", 0.0), entry.value("step", 1.0));
  }
  throw DomainError("column '" + name + "': unknown kind '" + kind + "'");
}

}  // namespace

MixedSchema parse_schema(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("schema is not valid JSON: ") + e.what());
  }
  std::vector<Column> columns;
  try {
    for (const auto& entry : doc.at("columns")) {
      columns.push_back(column_from_json(entry));
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed schema: ") + e.what());
  }
  MixedSchema schema(std::move(columns));
  require_valid(schema);
  return schema;
}

MixedSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError("cannot open schema file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_schema(text.str());
}

std::string schema_to_json(const MixedSchema& schema) {
  json columns = json::array();
  for (const auto& c : schema.columns()) {
    json entry{{"name", c.name}, {"kind", to_string(c.kind)}};
    switch (c.kind) {
      case ColumnKind::continuous:
        switch (c.map.kind()) {
          case MonotoneMap::Kind::identity:
            entry["map"] = "identity";
            break;
          case MonotoneMap::Kind::affine:
            entry["map"] = "affine";
            entry["scale"] = c.map.scale();
            entry["shift"] = c.map.shift();
            break;
          case MonotoneMap::Kind::log_exp:
            entry["map"] = "log";
            break;
        }
        break;
      case ColumnKind::binary:
        entry["cuts"] = c.partition.cuts();
        break;
      case ColumnKind::categorical:
        entry["levels"] = c.levels;
        entry["cuts"] = c.partition.cuts();
        break;
      case ColumnKind::count:
        entry["first_cut"] = c.partition.first_cut();
        entry["step"] = c.partition.step();
        break;
    }
    columns.push_back(std::move(entry));
  }
  return json{{"columns", columns}}.dump(2) + "\n";
}

}  // namespace mixscale
