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

#ifndef FLPROTECT_EXPERIMENTS_H_
#define FLPROTECT_EXPERIMENTS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "flprotect/adversary.h"
#include "flprotect/fl_sim.h"
#include "flprotect/rng.h"
#include "flprotect/types.h"

namespace flprotect {

enum class ScenarioMode {
  // xi_t and zeta_t are fixed inputs; the target client evolves as
  // x^c_{t+1} = x^c_t + delta_t (xi_t + zeta_t).
  kScripted,
  // A full federation of quadratic clients; client 0 is the target.
  kFullFl,
};

struct FederationSetup {
  int num_clients = 10;  // N
  int num_sampled = 5;   // n, participants per round
  double eta = 0.5;
  int local_steps = 10;
  // One objective per client.
  std::vector<QuadraticObjective> objectives;
  // Initial server model; non-target clients also start here.
  ModelVector server_init;
};

struct Scenario {
  ScenarioMode mode = ScenarioMode::kScripted;
  Protocol protocol = Protocol::kFlip;
  // Participation probability of the target client. In full-FL mode this
  // must equal num_sampled / num_clients.
  double p = 0.5;
  double gamma = 0.5;
  Matrix m;
  int horizon = 0;
  ModelVector client_init;
  ModelVector adversary_init;
  // Scripted inputs, one entry per round.
  std::vector<ModelVector> xi;
  std::vector<ModelVector> zeta;
  // The adversary's estimate of zeta_t; empty means zero. Honoured in both
  // modes.
  std::vector<ModelVector> zeta_hat;
  FederationSetup federation;
  // Every uplink of a participating client is intercepted.
  bool force_mu_one = false;
  FlopXiMemory flop_memory = FlopXiMemory::kInnovation;

  int dim() const { return static_cast<int>(client_init.size()); }
  absl::Status Validate() const;
};

struct RoundTrace {
  int t = 0;
  bool delta = false;
  bool mu = false;
  // Present on participation rounds; in scripted mode always present.
  std::optional<ModelVector> xi;
  // x^s_t - x^c_t.
  ModelVector zeta;
  // x^c_t, the model at the start of the round.
  ModelVector client_model;
  std::optional<ModelVector> uplink;
  // ||x^c_t - x^a_t||^2.
  double error_sq = 0.0;
};

struct TrialTrace {
  std::vector<RoundTrace> rounds;
  // ||x^c_T - x^a_T||^2 after the last round.
  double final_error_sq = 0.0;
};

// Steps one trial round by round. Holds a reference to the scenario, which
// must outlive it.
class TrialSimulator {
 public:
  static absl::StatusOr<TrialSimulator> Create(const Scenario& scenario,
                                               uint64_t seed);

  // Runs round `round()` and returns its record. A non-finite state is an
  // InternalError naming the round.
  absl::StatusOr<RoundTrace> Step();

  int round() const { return round_; }
  const ModelVector& client_model() const { return client_; }
  const AdversaryState& adversary() const { return adversary_; }
  double error_sq() const {
    return (client_ - adversary_.estimate).squaredNorm();
  }

 private:
  TrialSimulator(const Scenario& scenario, uint64_t seed);

  absl::Status StepFederation(RoundTrace& trace);
  absl::Status StepScripted(RoundTrace& trace);
  absl::Status StepAdversary(const RoundTrace& trace,
                             const ModelVector& new_client);

  const Scenario* scenario_;
  Rng rng_;
  int round_ = 0;
  ModelVector client_;
  AdversaryState adversary_;
  // Full-FL state.
  ModelVector server_;
  std::vector<ModelVector> others_;
  std::vector<int> pool_;
};

absl::StatusOr<TrialTrace> RunTrial(const Scenario& scenario, uint64_t seed);

struct MonteCarloOptions {
  // Worker threads; 0 reads FLPROTECT_THREADS, falling back to the hardware
  // concurrency.
  int threads = 0;
  // Rounds averaged per trial for the tail statistic; 0 selects the final
  // 25% of the horizon + 1 recorded rounds.
  int tail_window = 0;
};

struct ProtectionEstimate {
  // Indexed by t = 0..horizon.
  std::vector<double> mean;
  std::vector<double> standard_error;
  int trials = 0;
  // Trials whose final error is exactly zero.
  int64_t final_zero_count = 0;
  double final_zero_fraction = 0.0;
  // Per-trial average over the tail window, then mean and standard error
  // across trials.
  int tail_window = 0;
  double tail_mean = 0.0;
  double tail_standard_error = 0.0;
  // Filled by callers that also enumerate.
  std::optional<std::vector<double>> exact;
};

// Worker count from FLPROTECT_THREADS (if a positive integer) or the
// hardware concurrency.
int ResolveThreadCount(int requested);

// Trial i uses DeriveSeed(root_seed, i). Trials are reduced in fixed-size
// chunks merged in index order, so the result does not depend on the thread
// count.
absl::StatusOr<ProtectionEstimate> MonteCarloProtection(
    const Scenario& scenario, int trials, uint64_t root_seed,
    const MonteCarloOptions& options = {});

struct CrossTermEstimate {
  // Indexed by t = 0..horizon-1.
  std::vector<double> norm;
  // Frobenius norm of the elementwise standard errors.
  std::vector<double> standard_error;
  // norm <= 3 * standard_error.
  std::vector<bool> within_noise;
  int trials = 0;
};

// Monte Carlo estimate of E[A_t sigma~_t v_t^T] for the joint state
// sigma = (e, q) of a scripted FLIP scenario, where sigma~ is the deviation
// from the mean and v_t the zero-mean forcing.
absl::StatusOr<CrossTermEstimate> CrossTermProbe(
    const Scenario& scenario, int trials, uint64_t root_seed,
    const MonteCarloOptions& options = {});

enum class SweepParameter { kP, kGamma, kMScale };

absl::StatusOr<SweepParameter> ParseSweepParameter(absl::string_view name);
absl::string_view SweepParameterName(SweepParameter parameter);

// Copy of `base` with one parameter replaced. Sweeping p in full-FL mode
// changes num_sampled, so p * N must be an integer.
absl::StatusOr<Scenario> ApplySweepValue(const Scenario& base,
                                         SweepParameter parameter,
                                         double value);

struct SweepRow {
  double value = 0.0;
  double mc_tail_mean = 0.0;
  double mc_tail_stderr = 0.0;
  double mc_tail_min = 0.0;
  // Scripted mode only.
  std::optional<double> bound_tail;
  std::optional<double> perfect_eavesdrop_tail;
  bool stability_satisfied = true;
};

// Every grid point reuses the same root seed.
absl::StatusOr<std::vector<SweepRow>> ProtectionSweep(
    const Scenario& base, SweepParameter parameter,
    std::span<const double> grid, int trials, uint64_t root_seed,
    const MonteCarloOptions& options = {});

}  // namespace flprotect

#endif  // FLPROTECT_EXPERIMENTS_H_
