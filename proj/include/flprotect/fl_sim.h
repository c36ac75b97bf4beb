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

#ifndef FLPROTECT_FL_SIM_H_
#define FLPROTECT_FL_SIM_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "flprotect/rng.h"
#include "flprotect/types.h"

namespace flprotect {

// f(x) = 0.5 x^T Q x + b^T x with a constant, symmetric PSD Hessian Q. The
// linearizations the adversary relies on are exact for this family.
class QuadraticObjective {
 public:
  static absl::StatusOr<QuadraticObjective> Create(Matrix hessian,
                                                   ModelVector linear);

  const Matrix& hessian() const { return hessian_; }
  const ModelVector& linear() const { return linear_; }
  int dim() const { return static_cast<int>(linear_.size()); }

  double Value(const ModelVector& x) const;
  ModelVector Gradient(const ModelVector& x) const;

  // Largest eigenvalue of Q (Q is symmetric, so this is also its spectral
  // radius).
  double MaxEigenvalue() const { return max_eigenvalue_; }
  double MinEigenvalue() const { return min_eigenvalue_; }

  // OK iff 0 < eta < 1 / lambda_max(Q). Under that bound every
  // I - eta Q is positive definite.
  absl::Status CheckLearningRate(double eta) const;

 private:
  QuadraticObjective(Matrix hessian, ModelVector linear, double min_eig,
                     double max_eig)
      : hessian_(std::move(hessian)),
        linear_(std::move(linear)),
        min_eigenvalue_(min_eig),
        max_eigenvalue_(max_eig) {}

  Matrix hessian_;
  ModelVector linear_;
  double min_eigenvalue_;
  double max_eigenvalue_;
};

// Runs `steps` gradient-descent steps from `server_model` and returns the
// displacement xi = x_L - x_0 = -eta * sum_{k<L} grad f(x_k).
absl::StatusOr<ModelVector> LocalUpdate(const ModelVector& server_model,
                                        const QuadraticObjective& objective,
                                        double eta, int steps);

struct ClientRoundResult {
  ModelVector new_client_model;
  // Present iff the client participated.
  std::optional<ModelVector> uplink;
  std::optional<ModelVector> innovation;
};

// One round of the client dynamics. A non-participating client keeps its
// model and sends nothing. A participating client restarts from the server
// model: x^c_{t+1} = x^s_t + xi_t.
absl::StatusOr<ClientRoundResult> ClientRound(
    const ModelVector& client_model, const ModelVector& server_model,
    bool participates, const QuadraticObjective& objective, double eta,
    int steps, Protocol protocol);

// Uniform average over this round's participants. FLIP uplinks are
// increments added to the server model; FLOP uplinks are models that replace
// it. No participants leaves the server model unchanged.
absl::StatusOr<ModelVector> ServerRound(const ModelVector& server_model,
                                        std::span<const ModelVector> uplinks,
                                        Protocol protocol);

// Mean of equal-dimension vectors, computed as v_0 + sum(v_i - v_0) / n so
// that identical inputs average to themselves bit for bit.
ModelVector StableMean(std::span<const ModelVector> values);

struct RoundDraw {
  bool delta = false;  // client sampled this round
  bool mu = false;     // uplink intercepted (meaningful only when delta)
};

// delta ~ Bernoulli(p) and mu ~ Bernoulli(gamma), independent. Both are drawn
// every round so the stream position does not depend on the outcome.
RoundDraw SampleRoundRandomness(Rng& rng, double p, double gamma);

struct ObjectiveGeneratorOptions {
  int num_clients = 10;
  int dim = 4;
  double curvature_min = 0.5;
  double curvature_max = 1.0;
  // All clients share one Hessian; otherwise each client draws its own.
  bool shared_curvature = true;
  // Diagonal Hessians; otherwise Hessians are rotated by a random orthogonal
  // matrix.
  bool diagonal = true;
  // Scale of the common minimizer center, drawn N(0, scale^2 I).
  double center_scale = 1.0;
  // Spread of per-client minimizers around the center (0 = homogeneous).
  double heterogeneity = 0.0;
  uint64_t seed = 1;
};

absl::StatusOr<std::vector<QuadraticObjective>> GenerateClientObjectives(
    const ObjectiveGeneratorOptions& options);

}  // namespace flprotect

#endif  // FLPROTECT_FL_SIM_H_
