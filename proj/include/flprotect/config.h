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

#ifndef FLPROTECT_CONFIG_H_
#define FLPROTECT_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "flprotect/adversary.h"
#include "flprotect/experiments.h"
#include "flprotect/rng.h"
#include "flprotect/types.h"

namespace flprotect {

struct RunConfig {
  Protocol protocol = Protocol::kFlip;
  int num_clients = 10;  // N
  int num_sampled = 5;   // n
  // Requested participation probability; resolved into n = p N.
  std::optional<double> p_request;
  double gamma = 0.5;
  double eta = 0.5;
  int local_steps = 10;
  int horizon = 100;
  bool horizon_set = false;
  int dim = 4;
  bool dim_set = false;

  // M = m_scalar I unless a diagonal or a matrix file is given.
  double m_scalar = 0.5;
  std::vector<double> m_diagonal;
  std::string m_file;

  uint64_t seed = kDefaultSeed;
  int trials = 1000;
  bool force_mu_one = false;
  // 0 selects the final 25% of rounds.
  int tail_window = 0;
  std::string out;
  FlopXiMemory flop_memory = FlopXiMemory::kInnovation;

  // Scripted inputs; a non-empty script_xi selects scripted mode.
  std::string script_xi;
  std::string script_zeta;
  std::string script_zeta_hat;

  // Client objective generator (full-FL mode).
  uint64_t objective_seed = 1;
  double curvature_min = 0.5;
  double curvature_max = 1.0;
  double heterogeneity = 0.0;
  double center_scale = 1.0;
  bool shared_curvature = true;
  bool diagonal_hessian = true;

  // Initial models, each filled with a constant. The target client starts at
  // the server model unless client_init is given.
  double server_init = 0.0;
  std::optional<double> client_init;
  double adversary_init = 0.0;

  double p() const { return static_cast<double>(num_sampled) / num_clients; }
  ScenarioMode mode() const {
    return script_xi.empty() ? ScenarioMode::kFullFl : ScenarioMode::kScripted;
  }
};

// Keys accepted in config files and, with a leading "--", as flags.
const std::vector<std::string>& ConfigKeys();

// Sets one field from its textual value. Underscores in `key` are read as
// dashes. Errors name the key.
absl::Status ApplyConfigValue(RunConfig& config, absl::string_view key,
                              absl::string_view value);

// "key = value" lines; '#' starts a comment.
absl::Status ApplyConfigText(RunConfig& config, absl::string_view text);
absl::Status ApplyConfigFile(RunConfig& config, const std::string& path);

// Resolves p into n and checks ranges. Call after every value is applied.
absl::Status FinalizeConfig(RunConfig& config);

// Reads scripts, generates objectives and assembles the scenario.
absl::StatusOr<Scenario> BuildScenario(const RunConfig& config);

}  // namespace flprotect

#endif  // FLPROTECT_CONFIG_H_
