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

#ifndef FLPROTECT_CSV_H_
#define FLPROTECT_CSV_H_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "flprotect/types.h"

namespace flprotect {

// First token of the leading comment line of every CSV the tool writes.
inline constexpr absl::string_view kCsvSchema = "flprotect-csv v1";

// Shortest representation that parses back to the same double.
std::string FormatDouble(double value);

// Reads one vector per row. Blank lines and lines starting with '#' are
// skipped, as is a first row that does not parse as numbers (a header).
// Every row must have the same number of columns, and `expected_dim` of them
// when it is positive.
absl::StatusOr<std::vector<ModelVector>> ReadVectorCsv(const std::string& path,
                                                       int expected_dim = 0);

absl::StatusOr<std::vector<ModelVector>> ParseVectorCsv(absl::string_view text,
                                                        int expected_dim = 0);

// Comma-separated rows with values formatted by FormatDouble. Optional cells
// without a value are written empty; non-finite values are rejected.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void Comment(absl::string_view text);
  void Header(const std::vector<std::string>& columns);

  CsvWriter& Cell(double value);
  CsvWriter& Cell(std::optional<double> value);
  CsvWriter& Cell(int64_t value);
  CsvWriter& Cell(int value) { return Cell(static_cast<int64_t>(value)); }
  CsvWriter& Cell(bool value) { return Cell(static_cast<int64_t>(value)); }
  CsvWriter& Cell(absl::string_view text);
  absl::Status EndRow();

 private:
  void Separator();

  std::ostream& out_;
  std::string row_;
  bool row_started_ = false;
  bool bad_value_ = false;
};

}  // namespace flprotect

#endif  // FLPROTECT_CSV_H_
