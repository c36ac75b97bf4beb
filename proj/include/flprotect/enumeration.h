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

#ifndef FLPROTECT_ENUMERATION_H_
#define FLPROTECT_ENUMERATION_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "flprotect/experiments.h"
#include "flprotect/types.h"

namespace flprotect {

// Default cap on enumerated rounds. Each round branches three ways
// (delta = 0 makes mu irrelevant), so the cap means 3^14 histories.
inline constexpr int kMaxEnumerationHorizon = 14;

struct ExactProtection {
  // E||e_t||^2 and E[e_t] for t = 0..horizon.
  std::vector<double> value;
  std::vector<ModelVector> mean_error;
  // Total probability of the enumerated histories at each depth.
  std::vector<double> weight_sum;
  int64_t leaves = 0;
};

// Exact expectation over all (delta, mu) histories of a scripted scenario.
// Uses its own error recursion rather than the trial simulator.
absl::StatusOr<ExactProtection> BruteForceProtection(
    const Scenario& scenario, int max_horizon = kMaxEnumerationHorizon);

// A_t = [[I, delta(1-mu) M], [0, (1-delta) I + delta(1-mu) M]], the joint
// transition of sigma_t = (e_t, q_t).
Matrix JointTransitionMatrix(bool delta, bool mu, const Matrix& m);

// E[A_t Sigma A_t^T] summed over the four (delta, mu) outcomes.
absl::StatusOr<Matrix> EnumerateOperatorL(const Matrix& sigma, double p,
                                          double gamma, const Matrix& m);

struct ForcingMoments {
  // E[sigma_t].
  ModelVector sigma_mean;
  // E[v_t v_t^T] with v_t = (A_t - E A_t) E[sigma_t] + (u_t - E u_t).
  Matrix second_moment;
  // Its error block and trace.
  Matrix top_left;
  double top_left_trace = 0.0;
  // E[A_t (sigma_t - E sigma_t) v_t^T].
  Matrix cross_term;
};

// Moments of the zero-mean forcing at round t of a scripted FLIP scenario,
// by enumerating every history of rounds 0..t-1 and the four outcomes of
// round t. Requires t < horizon and t <= max_horizon.
absl::StatusOr<ForcingMoments> EnumerateForcingMoments(
    const Scenario& scenario, int t, int max_horizon = kMaxEnumerationHorizon);

}  // namespace flprotect

#endif  // FLPROTECT_ENUMERATION_H_
