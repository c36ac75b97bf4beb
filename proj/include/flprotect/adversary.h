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

#ifndef FLPROTECT_ADVERSARY_H_
#define FLPROTECT_ADVERSARY_H_

#include <limits>
#include <optional>

#include "absl/status/statusor.h"
#include "flprotect/types.h"

namespace flprotect {

// What the FLOP adversary stores as its innovation estimate after a
// successful interception.
//   kInnovation: the innovation xi_t itself, i.e. the same recursion as FLIP.
//   kModelProxy: the intercepted model minus the current estimate,
//                x^c_{t+1} - x^a_t.
enum class FlopXiMemory { kInnovation, kModelProxy };

// The eavesdropper's view of one client.
struct AdversaryState {
  // x^a_t.
  ModelVector estimate;
  // Innovation estimate at the most recent participation round tau.
  // Zero while tau == -1.
  ModelVector xi_estimate;
  // Most recent round strictly before `round` in which the client
  // participated; -1 if none.
  int tau = -1;
  // Index of the next round to be processed.
  int round = 0;
  // Surrogate transition applied to xi_estimate between interceptions.
  Matrix transition;

  static AdversaryState Initial(ModelVector initial_estimate,
                                Matrix transition);
};

// tau_t = delta_{t-1} (t - 1) + (1 - delta_{t-1}) tau_{t-1}.
int TauUpdate(int tau, bool delta_prev, int t);

// xi-hat_t = mu_t xi_t + (1 - mu_t) M xi-hat_{tau_t}. On the first
// participation xi_estimate is still zero, so a missed interception yields 0.
// `observed_xi` must be present iff mu.
absl::StatusOr<ModelVector> XiEstimateStep(
    const AdversaryState& state, bool mu,
    const std::optional<ModelVector>& observed_xi);

// x^a_{t+1} = x^a_t + delta (mu xi_t + (1 - mu) xi-hat_t + zeta-hat_t).
// `observed_xi` must be present iff delta && mu.
absl::StatusOr<AdversaryState> AdversaryStepFlip(
    const AdversaryState& state, bool delta, bool mu,
    const std::optional<ModelVector>& observed_xi, const ModelVector& zeta_hat);

// x^a_{t+1} = delta mu x^c_{t+1} + (1 - delta mu) x^a_t
//             + delta (1 - mu) xi-hat_t + delta zeta-hat_t.
// `observed_model` must be present iff delta && mu. With kInnovation memory
// `innovation` (xi_t) must accompany `observed_model`.
absl::StatusOr<AdversaryState> AdversaryStepFlop(
    const AdversaryState& state, bool delta, bool mu,
    const std::optional<ModelVector>& observed_model,
    const std::optional<ModelVector>& innovation, const ModelVector& zeta_hat,
    FlopXiMemory memory = FlopXiMemory::kInnovation);

// Largest |eigenvalue| M may have for the error covariance to stay bounded
// (necessary condition only): (p (1 - gamma) max{gamma, 1 - gamma})^{-1/2},
// +infinity when the base is zero.
double StabilityThreshold(double p, double gamma);

enum class SpectralMethod { kDiagonal, kPowerIteration, kEigenSolverFallback };

struct SpectralRadiusResult {
  double radius = 0.0;
  bool converged = true;
  int iterations = 0;
  SpectralMethod method = SpectralMethod::kDiagonal;
};

// Exact for diagonal matrices; power iteration otherwise (relative tolerance
// `tolerance`, at most `max_iterations`). When the iteration does not settle
// (complex or opposite-sign dominant pairs) the radius comes from a dense
// eigensolver and `converged` is false.
SpectralRadiusResult SpectralRadius(const Matrix& m, double tolerance = 1e-10,
                                    int max_iterations = 10000);

struct StabilityReport {
  double threshold = std::numeric_limits<double>::infinity();
  double spectral_radius = 0.0;
  // Necessary condition only: spectral_radius < threshold.
  bool satisfied = true;
  bool converged = true;
};

absl::StatusOr<StabilityReport> CheckTransitionMatrix(const Matrix& m, double p,
                                                      double gamma);

}  // namespace flprotect

#endif  // FLPROTECT_ADVERSARY_H_
