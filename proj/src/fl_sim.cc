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

#include "flprotect/fl_sim.h"

#include <cmath>
#include <numbers>
#include <utility>

#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"

namespace flprotect {

absl::string_view ProtocolName(Protocol protocol) {
  switch (protocol) {
    case Protocol::kFlip:
      return "flip";
    case Protocol::kFlop:
      return "flop";
  }
  return "unknown";
}

absl::StatusOr<Protocol> ParseProtocol(absl::string_view name) {
  const std::string lower = absl::AsciiStrToLower(name);
  if (lower == "flip") return Protocol::kFlip;
  if (lower == "flop") return Protocol::kFlop;
  return absl::InvalidArgumentError(
      absl::StrCat("protocol: expected 'flip' or 'flop', got '", name, "'"));
}

bool IsSymmetric(const Matrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tolerance * scale;
}

absl::StatusOr<QuadraticObjective> QuadraticObjective::Create(
    Matrix hessian, ModelVector linear) {
  if (hessian.rows() != hessian.cols() || hessian.rows() != linear.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "objective: hessian is ", hessian.rows(), "x", hessian.cols(),
        " but linear term has dimension ", linear.size()));
  }
  if (linear.size() == 0) {
    return absl::InvalidArgumentError("objective: dimension must be positive");
  }
  if (!hessian.allFinite() || !linear.allFinite()) {
    return absl::InvalidArgumentError("objective: non-finite coefficients");
  }
  if (!IsSymmetric(hessian, 1e-12)) {
    return absl::InvalidArgumentError("objective: hessian is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (min_eig < -1e-10) {
    return absl::InvalidArgumentError(absl::StrCat(
        "objective: hessian is not positive semi-definite (min eigenvalue ",
        min_eig, ")"));
  }
  return QuadraticObjective(std::move(hessian), std::move(linear), min_eig,
                            max_eig);
}

double QuadraticObjective::Value(const ModelVector& x) const {
  return 0.5 * x.dot(hessian_ * x) + linear_.dot(x);
}

ModelVector QuadraticObjective::Gradient(const ModelVector& x) const {
  return hessian_ * x + linear_;
}

absl::Status QuadraticObjective::CheckLearningRate(double eta) const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eta: must be a positive finite number, got ", eta));
  }
  if (max_eigenvalue_ > 0.0 && !(eta * max_eigenvalue_ < 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "eta: ", eta,
        " violates eta < 1/lambda_max(Q) = ", 1.0 / max_eigenvalue_));
  }
  return absl::OkStatus();
}

absl::StatusOr<ModelVector> LocalUpdate(const ModelVector& server_model,
                                        const QuadraticObjective& objective,
                                        double eta, int steps) {
  if (server_model.size() != objective.dim()) {
    return absl::InvalidArgumentError(
        absl::StrCat("local update: model dimension ", server_model.size(),
                     " != objective dimension ", objective.dim()));
  }
  if (steps < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("steps: must be >= 1, got ", steps));
  }
  if (absl::Status s = objective.CheckLearningRate(eta); !s.ok()) return s;

  ModelVector x = server_model;
  for (int k = 0; k < steps; ++k) {
    const ModelVector grad = objective.Gradient(x);
    if (!grad.allFinite()) {
      return absl::InternalError(
          absl::StrCat("local update: non-finite gradient at step ", k));
    }
    x -= eta * grad;
  }
  return ModelVector(x - server_model);
}

absl::StatusOr<ClientRoundResult> ClientRound(
    const ModelVector& client_model, const ModelVector& server_model,
    bool participates, const QuadraticObjective& objective, double eta,
    int steps, Protocol protocol) {
  if (client_model.size() != server_model.size()) {
    return absl::InvalidArgumentError(
        "client round: client and server models differ in dimension");
  }
  if (!participates) {
    return ClientRoundResult{client_model, std::nullopt, std::nullopt};
  }
  absl::StatusOr<ModelVector> xi =
      LocalUpdate(server_model, objective, eta, steps);
  if (!xi.ok()) return xi.status();
  ModelVector next = server_model + *xi;
  ModelVector uplink = protocol == Protocol::kFlip ? *xi : next;
  return ClientRoundResult{std::move(next), std::move(uplink), *std::move(xi)};
}

ModelVector StableMean(std::span<const ModelVector> values) {
  const ModelVector& first = values.front();
  ModelVector offset = ModelVector::Zero(first.size());
  for (size_t i = 1; i < values.size(); ++i) offset += values[i] - first;
  return first + offset / static_cast<double>(values.size());
}

absl::StatusOr<ModelVector> ServerRound(const ModelVector& server_model,
                                        std::span<const ModelVector> uplinks,
                                        Protocol protocol) {
  for (const ModelVector& u : uplinks) {
    if (u.size() != server_model.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("server round: uplink dimension ", u.size(),
                       " != server dimension ", server_model.size()));
    }
  }
  if (uplinks.empty()) return server_model;
  if (protocol == Protocol::kFlip) {
    return ModelVector(server_model + StableMean(uplinks));
  }
  return StableMean(uplinks);
}

RoundDraw SampleRoundRandomness(Rng& rng, double p, double gamma) {
  RoundDraw draw;
  draw.delta = Bernoulli(rng, p);
  draw.mu = Bernoulli(rng, gamma);
  return draw;
}

namespace {

double StandardNormal(Rng& rng) {
  // Box-Muller; 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ModelVector NormalVector(Rng& rng, int dim) {
  ModelVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = StandardNormal(rng);
  return v;
}

Matrix RandomHessian(Rng& rng, const ObjectiveGeneratorOptions& options) {
  const int d = options.dim;
  ModelVector eig(d);
  for (int i = 0; i < d; ++i) {
    eig[i] = options.curvature_min +
             (options.curvature_max - options.curvature_min) * UniformUnit(rng);
  }
  if (options.diagonal) return eig.asDiagonal();
  Matrix gaussian(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) gaussian(i, j) = StandardNormal(rng);
  }
  const Matrix rotation = Eigen::HouseholderQR<Matrix>(gaussian).householderQ();
  Matrix q = rotation * eig.asDiagonal() * rotation.transpose();
  return 0.5 * (q + q.transpose());
}

}  // namespace

absl::StatusOr<std::vector<QuadraticObjective>> GenerateClientObjectives(
    const ObjectiveGeneratorOptions& options) {
  if (options.num_clients < 1 || options.dim < 1) {
    return absl::InvalidArgumentError(
        "objective generator: num_clients and dim must be positive");
  }
  if (options.curvature_min < 0.0 ||
      options.curvature_max < options.curvature_min) {
    return absl::InvalidArgumentError(absl::StrCat(
        "objective generator: need 0 <= curvature_min <= curvature_max, got [",
        options.curvature_min, ", ", options.curvature_max, "]"));
  }
  if (options.heterogeneity < 0.0 || options.center_scale < 0.0) {
    return absl::InvalidArgumentError(
        "objective generator: heterogeneity and center_scale must be >= 0");
  }
  Rng rng(options.seed);
  const ModelVector center =
      options.center_scale * NormalVector(rng, options.dim);
  const Matrix shared = RandomHessian(rng, options);

  std::vector<QuadraticObjective> objectives;
  objectives.reserve(options.num_clients);
  for (int i = 0; i < options.num_clients; ++i) {
    Matrix q = options.shared_curvature ? shared : RandomHessian(rng, options);
    ModelVector minimizer = center;
    if (options.heterogeneity > 0.0) {
      minimizer += options.heterogeneity * NormalVector(rng, options.dim);
    }
    ModelVector b = -(q * minimizer);
    absl::StatusOr<QuadraticObjective> obj =
        QuadraticObjective::Create(std::move(q), std::move(b));
    if (!obj.ok()) return obj.status();
    objectives.push_back(*std::move(obj));
  }
  return objectives;
}

}  // namespace flprotect
