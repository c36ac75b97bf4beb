// Copyright 2026 The flprotect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "flprotect/csv.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"

namespace flprotect {
namespace {

bool ParseNumber(absl::string_view token, double& value) {
  token = absl::StripAsciiWhitespace(token);
  if (token.empty()) return false;
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string FormatDouble(double value) {
  if (value == 0.0) return "0";
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) return "nan";
  return std::string(buffer, ptr);
}

absl::StatusOr<std::vector<ModelVector>> ParseVectorCsv(absl::string_view text,
                                                        int expected_dim) {
  std::vector<ModelVector> rows;
  int width = expected_dim;
  int line_number = 0;
  bool first_data_row = true;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_number;
    line = absl::StripAsciiWhitespace(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<absl::string_view> tokens = absl::StrSplit(line, ',');
    std::vector<double> values(tokens.size());
    bool numeric = true;
    for (size_t i = 0; i < tokens.size() && numeric; ++i) {
      numeric = ParseNumber(tokens[i], values[i]);
    }
    if (!numeric) {
      if (first_data_row) {
        first_data_row = false;
        continue;
      }
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": non-numeric value"));
    }
    first_data_row = false;
    if (width > 0 && static_cast<int>(values.size()) != width) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": ", values.size(),
                       " columns, expected ", width));
    }
    width = static_cast<int>(values.size());
    ModelVector row(width);
    for (int i = 0; i < width; ++i) {
      if (!std::isfinite(values[i])) {
        return absl::InvalidArgumentError(
            absl::StrCat("line ", line_number, ": non-finite value"));
      }
      row[i] = values[i];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

absl::StatusOr<std::vector<ModelVector>> ReadVectorCsv(const std::string& path,
                                                       int expected_dim) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open '", path, "'"));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  absl::StatusOr<std::vector<ModelVector>> rows =
      ParseVectorCsv(buffer.str(), expected_dim);
  if (!rows.ok()) {
    return absl::Status(rows.status().code(),
                        absl::StrCat(path, ": ", rows.status().message()));
  }
  return rows;
}

void CsvWriter::Comment(absl::string_view text) {
  out_ << "# " << text << '\n';
}

void CsvWriter::Header(const std::vector<std::string>& columns) {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void CsvWriter::Separator() {
  if (row_started_) row_ += ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::Cell(double value) {
  Separator();
  if (!std::isfinite(value)) {
    bad_value_ = true;
    return *this;
  }
  row_ += FormatDouble(value);
  return *this;
}

CsvWriter& CsvWriter::Cell(std::optional<double> value) {
  if (!value.has_value()) {
    Separator();
    return *this;
  }
  return Cell(*value);
}

CsvWriter& CsvWriter::Cell(int64_t value) {
  Separator();
  absl::StrAppend(&row_, value);
  return *this;
}

CsvWriter& CsvWriter::Cell(absl::string_view text) {
  Separator();
  absl::StrAppend(&row_, text);
  return *this;
}

absl::Status CsvWriter::EndRow() {
  const bool bad = bad_value_;
  if (!bad) out_ << row_ << '\n';
  row_.clear();
  row_started_ = false;
  bad_value_ = false;
  if (bad) return absl::InternalError("refusing to write a non-finite value");
  return absl::OkStatus();
}

}  // namespace flprotect
