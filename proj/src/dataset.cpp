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

#include "mixscale/dataset.hpp"

#include <array>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

#include "mixscale/errors.hpp"

namespace mixscale {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.emplace_back(trim(field));
  return fields;
}

bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256: digest computation failed");
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(md[i]);
  return out.str();
}

Dataset parse_dataset(std::string_view text, const MixedSchema& schema) {
  require_valid(schema);
  Dataset ds;
  ds.schema = schema;
  ds.digest = sha256_hex(text);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  std::size_t header_at = 0;
  while (header_at < lines.size() && blank(lines[header_at])) ++header_at;
  if (header_at == lines.size()) throw DomainError("ingest: empty file");

  const auto header = split_csv(lines[header_at]);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  std::vector<std::size_t> field_of(schema.columns().size());
  std::string missing;
  for (std::size_t j = 0; j < schema.columns().size(); ++j) {
    const auto it = position.find(schema.columns()[j].name);
    if (it == position.end()) {
      missing += (missing.empty() ? "" : ", ") + schema.columns()[j].name;
    } else {
      field_of[j] = it->second;
    }
  }
  if (!missing.empty()) throw DomainError("ingest: missing columns: " + missing);

  std::size_t data_rows = 0;
  for (std::size_t l = header_at + 1; l < lines.size(); ++l) {
    if (blank(lines[l])) continue;
    ++data_rows;
    const std::size_t line_no = l + 1;
    const auto fields = split_csv(lines[l]);
    MixedPoint y;
    y.continuous.resize(schema.p1());
    y.discrete.resize(static_cast<std::size_t>(schema.p2()));
    std::string reason;
    Eigen::Index ci = 0;
    std::size_t di = 0;
    for (std::size_t j = 0; j < schema.columns().size() && reason.empty(); ++j) {
      const Column& col = schema.columns()[j];
      const std::string value = field_of[j] < fields.size() ? fields[field_of[j]] : std::string{};
      if (value.empty() || value == "NA" || value == "NaN" || value == "nan") {
        reason = "column '" + col.name + "': missing value";
        break;
      }
      const char* first = value.data();
      const char* last = first + value.size();
      if (col.kind == ColumnKind::continuous) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
          reason = "column '" + col.name + "': not a number: '" + value + "'";
        } else {
          y.continuous[ci++] = v;
        }
      } else {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) {
          reason = "column '" + col.name + "': not an integer: '" + value + "'";
        } else if (v < 0) {
          reason = "column '" + col.name + "': negative level " + value;
        } else {
          y.discrete[di++] = v;
        }
      }
    }
    if (reason.empty()) reason = schema.check_point(y);
    if (reason.empty()) {
      ds.rows.push_back(std::move(y));
      ds.lines.push_back(line_no);
    } else {
      ds.rejected.push_back({line_no, reason});
    }
  }
  if (data_rows > 0 && 2 * ds.rejected.size() > data_rows) {
    std::ostringstream msg;
    msg << "ingest: " << ds.rejected.size() << " of " << data_rows << " rows rejected";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, ds.rejected.size()); ++i)
      msg << "; line " << ds.rejected[i].line << ": " << ds.rejected[i].reason;
    throw DomainError(msg.str());
  }
  return ds;
}

Dataset ingest(const std::string& path, const MixedSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("ingest: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), schema);
}

void write_dataset(std::ostream& out, const MixedSchema& schema, const std::vector<MixedPoint>& rows) {
  const auto& cols = schema.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j].name;
  out << '\n';
  std::vector<Eigen::Index> slot(cols.size());
  Eigen::Index c = 0, d = 0;
  for (std::size_t j = 0; j < cols.size(); ++j) slot[j] = cols[j].kind == ColumnKind::continuous ? c++ : d++;
  std::array<char, 32> buf{};
  for (const auto& y : rows) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out << ',';
      if (cols[j].kind == ColumnKind::continuous) {
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), y.continuous[slot[j]],
                                       std::chars_format::general, 17);
        out.write(buf.data(), res.ptr - buf.data());
      } else {
        out << y.discrete[static_cast<std::size_t>(slot[j])];
      }
    }
    out << '\n';
  }
}

}  // namespace mixscale
