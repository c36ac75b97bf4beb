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

#ifndef FLPROTECT_COMMANDS_H_
#define FLPROTECT_COMMANDS_H_

#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "flprotect/config.h"
#include "flprotect/experiments.h"

namespace flprotect {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a check failed or a run faulted
inline constexpr int kExitUsage = 2;    // bad flags or configuration

// Per-round Monte Carlo protection, with the exact value, the lower bound and
// the perfect-eavesdropping value when the scenario is scripted.
absl::Status CmdSimulate(const RunConfig& config, std::ostream& out,
                         std::ostream& err);

// Per-round terms of the protection lower bound (scripted mode only).
absl::Status CmdBound(const RunConfig& config, std::ostream& out,
                      std::ostream& err);

struct CheckResult {
  std::string name;
  bool passed = false;
  // Reported but does not affect the exit status.
  bool informational = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

// Cross-checks every closed form against its brute-force or Monte Carlo
// oracle. Seeded from config.seed.
std::vector<CheckResult> RunVerifyChecks(const RunConfig& config);

// Writes the report; returns true iff every non-informational check passed.
bool CmdVerify(const RunConfig& config, bool json, std::ostream& out);

// "a,b,c" or "start:stop:step" (inclusive).
absl::StatusOr<std::vector<double>> ParseGrid(absl::string_view text);

absl::Status CmdSweep(const RunConfig& config, SweepParameter parameter,
                      const std::vector<double>& grid, std::ostream& out,
                      std::ostream& err);

// Entry point of the command-line tool; returns the process exit code.
int RunCli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace flprotect

#endif  // FLPROTECT_COMMANDS_H_
