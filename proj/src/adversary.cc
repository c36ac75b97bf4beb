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

#include "flprotect/adversary.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "absl/strings/str_cat.h"

namespace flprotect {

AdversaryState AdversaryState::Initial(ModelVector initial_estimate,
                                       Matrix transition) {
  AdversaryState state;
  state.xi_estimate = ModelVector::Zero(initial_estimate.size());
  state.estimate = std::move(initial_estimate);
  state.transition = std::move(transition);
  return state;
}

int TauUpdate(int tau, bool delta_prev, int t) {
  return delta_prev ? t - 1 : tau;
}

namespace {

absl::Status CheckShapes(const AdversaryState& state,
                         const ModelVector& zeta_hat) {
  const auto d = state.estimate.size();
  if (state.xi_estimate.size() != d || state.transition.rows() != d ||
      state.transition.cols() != d || zeta_hat.size() != d) {
    return absl::InvalidArgumentError(absl::StrCat(
        "adversary: inconsistent dimensions (estimate ", d, ", xi estimate ",
        state.xi_estimate.size(), ", M ", state.transition.rows(), "x",
        state.transition.cols(), ", zeta-hat ", zeta_hat.size(), ")"));
  }
  return absl::OkStatus();
}

absl::Status CheckObservation(const std::optional<ModelVector>& observed,
                              bool expected, absl::string_view what,
                              Eigen::Index dim) {
  if (observed.has_value() != expected) {
    return absl::FailedPreconditionError(absl::StrCat(
        "adversary: ", what, expected ? " missing" : " present",
        " although the uplink was ", expected ? "" : "not ", "intercepted"));
  }
  if (observed.has_value() && observed->size() != dim) {
    return absl::InvalidArgumentError(
        absl::StrCat("adversary: ", what, " has dimension ", observed->size(),
                     ", expected ", dim));
  }
  return absl::OkStatus();
}

// Estimate for a missed interception: M applied to the memory, which is zero
// before the first participation.
ModelVector Extrapolate(const AdversaryState& state) {
  if (state.tau < 0) return ModelVector::Zero(state.estimate.size());
  return state.transition * state.xi_estimate;
}

}  // namespace

absl::StatusOr<ModelVector> XiEstimateStep(
    const AdversaryState& state, bool mu,
    const std::optional<ModelVector>& observed_xi) {
  if (absl::Status s = CheckObservation(observed_xi, mu, "observed xi",
                                        state.estimate.size());
      !s.ok()) {
    return s;
  }
  if (mu) return *observed_xi;
  return Extrapolate(state);
}

absl::StatusOr<AdversaryState> AdversaryStepFlip(
    const AdversaryState& state, bool delta, bool mu,
    const std::optional<ModelVector>& observed_xi,
    const ModelVector& zeta_hat) {
  if (absl::Status s = CheckShapes(state, zeta_hat); !s.ok()) return s;
  if (!delta) {
    if (observed_xi.has_value()) {
      return absl::FailedPreconditionError(
          "adversary: observation supplied for a round without participation");
    }
    AdversaryState next = state;
    ++next.round;
    return next;
  }
  absl::StatusOr<ModelVector> xi_hat = XiEstimateStep(state, mu, observed_xi);
  if (!xi_hat.ok()) return xi_hat.status();

  AdversaryState next = state;
  next.estimate += *xi_hat + zeta_hat;
  next.xi_estimate = *std::move(xi_hat);
  next.tau = TauUpdate(state.tau, true, state.round + 1);
  ++next.round;
  return next;
}

absl::StatusOr<AdversaryState> AdversaryStepFlop(
    const AdversaryState& state, bool delta, bool mu,
    const std::optional<ModelVector>& observed_model,
    const std::optional<ModelVector>& innovation, const ModelVector& zeta_hat,
    FlopXiMemory memory) {
  if (absl::Status s = CheckShapes(state, zeta_hat); !s.ok()) return s;
  const auto d = state.estimate.size();
  if (absl::Status s =
          CheckObservation(observed_model, delta && mu, "observed model", d);
      !s.ok()) {
    return s;
  }
  AdversaryState next = state;
  ++next.round;
  if (!delta) return next;

  if (mu) {
    ModelVector memory_value;
    if (memory == FlopXiMemory::kInnovation) {
      if (!innovation.has_value() || innovation->size() != d) {
        return absl::FailedPreconditionError(
            "adversary: innovation memory requires xi_t with the intercepted "
            "model");
      }
      memory_value = *innovation;
    } else {
      memory_value = *observed_model - state.estimate;
    }
    next.estimate = *observed_model + zeta_hat;
    next.xi_estimate = std::move(memory_value);
  } else {
    ModelVector xi_hat = Extrapolate(state);
    next.estimate += xi_hat + zeta_hat;
    next.xi_estimate = std::move(xi_hat);
  }
  next.tau = TauUpdate(state.tau, true, state.round + 1);
  return next;
}

double StabilityThreshold(double p, double gamma) {
  const double base = p * (1.0 - gamma) * std::max(gamma, 1.0 - gamma);
  if (base <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(base);
}

SpectralRadiusResult SpectralRadius(const Matrix& m, double tolerance,
                                    int max_iterations) {
  SpectralRadiusResult result;
  const Eigen::Index n = m.rows();
  if (n == 0) return result;
  if (m.isDiagonal(0.0)) {
    result.radius = m.diagonal().cwiseAbs().maxCoeff();
    result.method = SpectralMethod::kDiagonal;
    return result;
  }

  result.method = SpectralMethod::kPowerIteration;
  ModelVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.1 * static_cast<double>(i + 1) / static_cast<double>(n);
  }
  v.normalize();
  double previous = -1.0;
  bool converged = false;
  int it = 0;
  for (; it < max_iterations; ++it) {
    ModelVector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    if (previous >= 0.0 &&
        std::abs(norm - previous) <= tolerance * std::max(norm, 1e-300)) {
      converged = true;
      previous = norm;
      break;
    }
    previous = norm;
    v = w / norm;
  }
  result.iterations = it;
  if (converged) {
    result.radius = previous;
    return result;
  }
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  result.radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  result.converged = false;
  result.method = SpectralMethod::kEigenSolverFallback;
  return result;
}

absl::StatusOr<StabilityReport> CheckTransitionMatrix(const Matrix& m, double p,
                                                      double gamma) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("M: expected a non-empty square matrix, got ", m.rows(),
                     "x", m.cols()));
  }
  if (!(p >= 0.0 && p <= 1.0 && gamma >= 0.0 && gamma <= 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "probabilities must lie in [0, 1]: p=", p, " gamma=", gamma));
  }
  const SpectralRadiusResult radius = SpectralRadius(m);
  StabilityReport report;
  report.threshold = StabilityThreshold(p, gamma);
  report.spectral_radius = radius.radius;
  report.converged = radius.converged;
  report.satisfied = radius.radius < report.threshold;
  return report;
}

}  // namespace flprotect
