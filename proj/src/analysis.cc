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

#include "flprotect/analysis.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace flprotect {
namespace {

bool IsProbability(double x) { return x >= 0.0 && x <= 1.0; }

// Weight of the branch tau_t = k for k = 0..t-1; the remaining mass
// (1-p)^t sits on tau_t = -1.
double TauWeight(double p, int t, int k) {
  return p * std::pow(1.0 - p, t - k - 1);
}

absl::Status CheckHistory(std::span<const ModelVector> history, int needed,
                          int dim, absl::string_view name) {
  if (static_cast<int>(history.size()) < needed) {
    return absl::InvalidArgumentError(
        absl::StrCat(name, " has ", history.size(), " entries but ", needed,
                     " are required"));
  }
  for (int t = 0; t < needed; ++t) {
    if (history[t].size() != dim) {
      return absl::InvalidArgumentError(
          absl::StrCat(name, "[", t, "] has dimension ", history[t].size(),
                       ", expected ", dim));
    }
    if (!history[t].allFinite()) {
      return absl::InvalidArgumentError(
          absl::StrCat(name, "[", t, "] is not finite"));
    }
  }
  return absl::OkStatus();
}

struct BoundTerms {
  ModelVector e0;
  std::vector<ModelVector> r;
};

absl::StatusOr<BoundTerms> ValidateBoundInputs(const BoundInputs& in) {
  if (in.horizon < 1) {
    return absl::InvalidArgumentError("bound: horizon must be at least 1");
  }
  if (!(in.p > 0.0 && in.p <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("bound: p must lie in (0, 1], got ", in.p));
  }
  if (!IsProbability(in.gamma)) {
    return absl::InvalidArgumentError(
        absl::StrCat("bound: gamma must lie in [0, 1], got ", in.gamma));
  }
  const int d = static_cast<int>(in.client_init.size());
  if (d < 1 || in.adversary_init.size() != d) {
    return absl::InvalidArgumentError(
        "bound: client and adversary initial models must share a positive "
        "dimension");
  }
  if (in.m.rows() != d || in.m.cols() != d || !in.m.allFinite()) {
    return absl::InvalidArgumentError(
        absl::StrCat("bound: M must be a finite ", d, "x", d, " matrix"));
  }
  if (in.tail_window < 0) {
    return absl::InvalidArgumentError("bound: tail_window must be positive");
  }
  if (absl::Status s = CheckHistory(in.xi, in.horizon, d, "xi"); !s.ok()) {
    return s;
  }
  if (absl::Status s = CheckHistory(in.zeta, in.horizon, d, "zeta"); !s.ok()) {
    return s;
  }
  if (!in.zeta_hat.empty()) {
    if (absl::Status s = CheckHistory(in.zeta_hat, in.horizon, d, "zeta_hat");
        !s.ok()) {
      return s;
    }
  }
  BoundTerms terms;
  terms.e0 = in.client_init - in.adversary_init;
  terms.r.reserve(in.horizon);
  for (int t = 0; t < in.horizon; ++t) {
    terms.r.push_back(in.zeta_hat.empty()
                          ? in.zeta[t]
                          : ModelVector(in.zeta[t] - in.zeta_hat[t]));
  }
  return terms;
}

}  // namespace

absl::StatusOr<Matrix> ComputeG(const QuadraticObjective& objective, double eta,
                                int steps) {
  if (steps < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("steps must be at least 1, got ", steps));
  }
  if (absl::Status s = objective.CheckLearningRate(eta); !s.ok()) return s;
  const int d = objective.dim();
  const Matrix identity = Matrix::Identity(d, d);
  const Matrix f = identity - eta * objective.hessian();
  Matrix power = identity;
  Matrix sum = Matrix::Zero(d, d);
  for (int k = 0; k < steps; ++k) {
    sum += power;
    power = power * f;
  }
  return Matrix(-eta * sum);
}

absl::StatusOr<InnovationTransition> ComputeInnovationTransition(
    const QuadraticObjective& objective, double eta, int steps) {
  absl::StatusOr<Matrix> g = ComputeG(objective, eta, steps);
  if (!g.ok()) return g.status();
  Eigen::FullPivLU<Matrix> lu(*g);
  if (!lu.isInvertible()) {
    return absl::InvalidArgumentError(
        absl::StrCat("G is singular; the learning rate must satisfy 0 < eta < "
                     "1/lambda_max(Q) = ",
                     1.0 / objective.MaxEigenvalue()));
  }
  const int d = objective.dim();
  const Matrix g_inv = lu.solve(Matrix::Identity(d, d));
  InnovationTransition out;
  out.g_now = *g;
  out.g_prev = *g;
  out.a = out.g_now * (g_inv + objective.hessian());
  out.b = out.g_now * objective.hessian();
  return out;
}

absl::StatusOr<Matrix> ApplyOperatorL(const Matrix& sigma, double p,
                                      double gamma, const Matrix& m) {
  if (!IsProbability(p) || !IsProbability(gamma)) {
    return absl::InvalidArgumentError(
        "operator L: p and gamma must lie in [0, 1]");
  }
  const int d = static_cast<int>(m.rows());
  if (d < 1 || m.cols() != d) {
    return absl::InvalidArgumentError("operator L: M must be square");
  }
  if (sigma.rows() != 2 * d || sigma.cols() != 2 * d) {
    return absl::InvalidArgumentError(
        absl::StrCat("operator L: Sigma must be ", 2 * d, "x", 2 * d));
  }
  if (!IsSymmetric(sigma)) {
    return absl::FailedPreconditionError("operator L: Sigma must be symmetric");
  }
  Matrix k1 = Matrix::Zero(2 * d, 2 * d);
  k1.topLeftCorner(d, d).setIdentity();
  k1.topRightCorner(d, d) = (1.0 - gamma) * m;
  k1.bottomRightCorner(d, d) = (1.0 - gamma) * m;
  Matrix k2 = Matrix::Zero(2 * d, 2 * d);
  k2.topRightCorner(d, d) = m;
  k2.bottomRightCorner(d, d) = m;
  Matrix out = (1.0 - p) * sigma + p * k1 * sigma * k1.transpose() +
               p * gamma * (1.0 - gamma) * k2 * sigma * k2.transpose();
  return Matrix(0.5 * (out + out.transpose()));
}

absl::StatusOr<OperatorIteration> IterateOperatorL(const Matrix& sigma0,
                                                   double p, double gamma,
                                                   const Matrix& m,
                                                   int max_iterations,
                                                   double divergence_trace) {
  OperatorIteration result;
  Matrix sigma = sigma0;
  result.final_trace = sigma.trace();
  result.max_trace = result.final_trace;
  for (int k = 0; k < max_iterations; ++k) {
    absl::StatusOr<Matrix> next = ApplyOperatorL(sigma, p, gamma, m);
    if (!next.ok()) return next.status();
    sigma = *std::move(next);
    result.iterations = k + 1;
    result.final_trace = sigma.trace();
    if (!std::isfinite(result.final_trace)) {
      result.diverged = true;
      result.max_trace = std::numeric_limits<double>::infinity();
      break;
    }
    result.max_trace = std::max(result.max_trace, result.final_trace);
    if (result.final_trace > divergence_trace) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

ModelVector ExpectedLastInnovation(std::span<const ModelVector> xi_history,
                                   double p, int t) {
  ModelVector ell =
      ModelVector::Zero(xi_history.empty() ? 0 : xi_history[0].size());
  for (int k = 0; k < t; ++k) ell += TauWeight(p, t, k) * xi_history[k];
  return ell;
}

double InnovationVariance(std::span<const ModelVector> xi_history, double p,
                          int t) {
  const ModelVector ell = ExpectedLastInnovation(xi_history, p, t);
  double var = std::pow(1.0 - p, t) * ell.squaredNorm();
  for (int k = 0; k < t; ++k) {
    var += TauWeight(p, t, k) * (xi_history[k] - ell).squaredNorm();
  }
  return var;
}

Matrix InnovationCovariance(std::span<const ModelVector> xi_history, double p,
                            int t) {
  const ModelVector ell = ExpectedLastInnovation(xi_history, p, t);
  Matrix cov = std::pow(1.0 - p, t) * ell * ell.transpose();
  for (int k = 0; k < t; ++k) {
    const ModelVector dev = xi_history[k] - ell;
    cov += TauWeight(p, t, k) * dev * dev.transpose();
  }
  return cov;
}

ModelVector InnovationDrift(std::span<const ModelVector> xi_history, double p,
                            const Matrix& m, int t) {
  return xi_history[t] - m * ExpectedLastInnovation(xi_history, p, t);
}

ModelVector ExpandedInnovationDrift(std::span<const ModelVector> xi_history,
                                    double p, const Matrix& m, int t) {
  ModelVector h = std::pow(1.0 - p, t) * xi_history[t];
  for (int k = 0; k < t; ++k) {
    h += std::pow(1.0 - p, t - k - 1) * p * (xi_history[t] - m * xi_history[k]);
  }
  return h;
}

std::vector<ModelVector> ExpectedEstimationGap(
    std::span<const ModelVector> xi_history, double p, double gamma,
    const Matrix& m, int horizon) {
  const int d = static_cast<int>(m.rows());
  const Matrix m2 = (1.0 - p) * Matrix::Identity(d, d) + p * (1.0 - gamma) * m;
  std::vector<ModelVector> q;
  q.reserve(horizon + 1);
  q.push_back(ModelVector::Zero(d));
  for (int t = 0; t < horizon; ++t) {
    q.push_back(m2 * q.back() +
                p * (1.0 - gamma) * InnovationDrift(xi_history, p, m, t));
  }
  return q;
}

absl::StatusOr<VtResult> ComputeVt(const ModelVector& s, const ModelVector& r,
                                   std::span<const ModelVector> xi_history,
                                   double p, double gamma, const Matrix& m,
                                   int t, VtForm form) {
  if (!(p > 0.0 && p <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("V_t: p must lie in (0, 1], got ", p));
  }
  if (!IsProbability(gamma)) {
    return absl::InvalidArgumentError(
        absl::StrCat("V_t: gamma must lie in [0, 1], got ", gamma));
  }
  const int d = static_cast<int>(s.size());
  if (r.size() != d || m.rows() != d || m.cols() != d) {
    return absl::InvalidArgumentError("V_t: dimension mismatch");
  }
  if (t < 0 || t > static_cast<int>(xi_history.size())) {
    return absl::InvalidArgumentError(
        absl::StrCat("V_t: round ", t, " outside the xi history"));
  }
  const ModelVector sr = s + r;
  Matrix cov = InnovationCovariance(xi_history, p, t);
  if (cov.size() == 0) cov = Matrix::Zero(d, d);
  if (form == VtForm::kPropagated) cov = m * cov * m.transpose();
  VtResult out;
  out.v = p * (1.0 - p) * (1.0 - gamma) * sr * sr.transpose() +
          p * p * gamma * (1.0 - gamma) * s * s.transpose() +
          p * (1.0 - p) * gamma * r * r.transpose() + p * (1.0 - gamma) * cov;
  out.trace = out.v.trace();
  out.degenerate = gamma == 0.0 || gamma == 1.0;
  return out;
}

int DefaultTailWindow(int rounds) { return std::max(1, (rounds + 3) / 4); }

double TailMinimum(std::span<const double> values, int tail_window) {
  if (values.empty()) return 0.0;
  const int n = static_cast<int>(values.size());
  const int w = std::clamp(tail_window, 1, n);
  return *std::min_element(values.end() - w, values.end());
}

absl::StatusOr<std::vector<ModelVector>> TransientMeanError(
    const BoundInputs& inputs) {
  absl::StatusOr<BoundTerms> terms = ValidateBoundInputs(inputs);
  if (!terms.ok()) return terms.status();
  const double p = inputs.p;
  const double gamma = inputs.gamma;
  const int d = static_cast<int>(inputs.m.rows());
  const Matrix identity = Matrix::Identity(d, d);
  const Matrix m1 = p * (1.0 - gamma) * inputs.m;
  const Matrix m2 = (1.0 - p) * identity + m1;
  const bool drift_active = gamma < 1.0;
  Eigen::FullPivLU<Matrix> lu(identity - m2);
  if (drift_active && !lu.isInvertible()) {
    return absl::FailedPreconditionError(
        "I - (1-gamma) M is singular; M violates the stability condition");
  }
  std::vector<ModelVector> mean;
  mean.reserve(inputs.horizon + 1);
  ModelVector r_sum = ModelVector::Zero(d);
  ModelVector h_sum = ModelVector::Zero(d);
  // w_t = sum_{k<t} M2^{t-1-k} h_k.
  ModelVector w = ModelVector::Zero(d);
  for (int t = 0; t <= inputs.horizon; ++t) {
    ModelVector e = terms->e0 + p * r_sum;
    if (drift_active) {
      e += p * (1.0 - gamma) * lu.solve(ModelVector(p * h_sum - m1 * w));
    }
    mean.push_back(std::move(e));
    if (t == inputs.horizon) break;
    const ModelVector h = InnovationDrift(inputs.xi, p, inputs.m, t);
    r_sum += terms->r[t];
    h_sum += h;
    w = m2 * w + h;
  }
  return mean;
}

absl::StatusOr<BoundSeries> ComputeProtectionBound(const BoundInputs& inputs,
                                                   MeanForm mean_form) {
  absl::StatusOr<BoundTerms> terms = ValidateBoundInputs(inputs);
  if (!terms.ok()) return terms.status();
  const double p = inputs.p;
  const double gamma = inputs.gamma;
  const Matrix& m = inputs.m;
  const int d = static_cast<int>(m.rows());
  const int horizon = inputs.horizon;
  const Matrix identity = Matrix::Identity(d, d);

  BoundSeries out;
  absl::StatusOr<StabilityReport> stability =
      CheckTransitionMatrix(m, p, gamma);
  if (!stability.ok()) return stability.status();
  out.stability = *stability;
  if (!out.stability.satisfied) {
    out.warnings.push_back(
        absl::StrCat("spectral radius of M (", out.stability.spectral_radius,
                     ") is not below the stability threshold (",
                     out.stability.threshold, ")"));
  }
  if (!out.stability.converged) {
    out.warnings.push_back(
        "power iteration on M did not converge; radius from eigensolver");
  }

  const Matrix gain = identity - (1.0 - gamma) * m;
  Eigen::FullPivLU<Matrix> lu(gain);
  if (!lu.isInvertible()) {
    return absl::FailedPreconditionError(
        "I - (1-gamma) M is singular; M violates the stability condition "
        "on its eigenvalues");
  }
  Eigen::JacobiSVD<Matrix> svd(gain);
  const double sigma_min = svd.singularValues().minCoeff();
  const double condition = sigma_min > 0.0
                               ? svd.singularValues().maxCoeff() / sigma_min
                               : std::numeric_limits<double>::infinity();
  if (condition > 1e10) {
    out.warnings.push_back(
        absl::StrCat("I - (1-gamma) M is ill-conditioned (condition number ",
                     condition, ")"));
  }

  absl::StatusOr<std::vector<ModelVector>> mean = TransientMeanError(inputs);
  if (!mean.ok()) return mean.status();
  const std::vector<ModelVector> q_mean =
      ExpectedEstimationGap(inputs.xi, p, gamma, m, horizon);

  const double r_weight = gamma < 1.0 ? (1.0 - p) * gamma / (1.0 - gamma) : 0.0;
  const double decay = 1.0 - p + p * gamma;
  double accumulated = 0.0;
  ModelVector r_sum = ModelVector::Zero(d);
  ModelVector h_sum = ModelVector::Zero(d);
  for (int t = 0; t < horizon; ++t) {
    const ModelVector ell = ExpectedLastInnovation(inputs.xi, p, t);
    const ModelVector h = inputs.xi[t] - m * ell;
    const ModelVector s = h + m * q_mean[t];
    const ModelVector& r = terms->r[t];
    r_sum += r;
    h_sum += h;

    ModelVector g;
    if (mean_form == MeanForm::kTransient) {
      g = (*mean)[t];
    } else {
      g = terms->e0 + p * r_sum + p * (1.0 - gamma) * lu.solve(h_sum);
    }
    const double var = InnovationVariance(inputs.xi, p, t);
    absl::StatusOr<VtResult> vt =
        ComputeVt(s, r, inputs.xi, p, gamma, m, t, VtForm::kPropagated);
    if (!vt.ok()) return vt.status();
    const Matrix cov = InnovationCovariance(inputs.xi, p, t);
    const double var_propagated = (m * cov * m.transpose()).trace();
    const double base = (1.0 - p) * (s + r).squaredNorm() +
                        p * gamma * s.squaredNorm() +
                        r_weight * r.squaredNorm() + g.squaredNorm();

    out.accumulated_bound.push_back(accumulated + (*mean)[t].squaredNorm());
    accumulated = decay * accumulated + vt->trace;

    out.ell.push_back(ell);
    out.h.push_back(h);
    out.q_mean.push_back(q_mean[t]);
    out.s.push_back(s);
    out.r.push_back(r);
    out.g.push_back(std::move(g));
    out.var.push_back(var);
    out.var_propagated.push_back(var_propagated);
    out.bound.push_back(base + var);
    out.bound_propagated.push_back(base + out.var_propagated.back());
  }

  if (gamma == 1.0) {
    absl::StatusOr<PerfectEavesdropSeries> perfect = PerfectEavesdropProtection(
        terms->r, p, inputs.client_init, inputs.adversary_init, horizon);
    if (!perfect.ok()) return perfect.status();
    out.perfect_eavesdropping = true;
    for (int t = 0; t < horizon; ++t) {
      out.bound[t] = perfect->value[t];
      out.bound_propagated[t] = perfect->value[t];
      out.accumulated_bound[t] = perfect->value[t];
    }
  }

  out.tail_window =
      inputs.tail_window > 0 ? inputs.tail_window : DefaultTailWindow(horizon);
  out.tail_min = TailMinimum(out.bound, out.tail_window);
  out.tail_min_propagated = TailMinimum(out.bound_propagated, out.tail_window);
  return out;
}

absl::StatusOr<PerfectEavesdropSeries> PerfectEavesdropProtection(
    std::span<const ModelVector> r_history, double p,
    const ModelVector& client_init, const ModelVector& adversary_init,
    int horizon, int tail_window) {
  if (!IsProbability(p)) {
    return absl::InvalidArgumentError(
        absl::StrCat("perfect eavesdropping: p must lie in [0, 1], got ", p));
  }
  if (horizon < 0 || tail_window < 0) {
    return absl::InvalidArgumentError(
        "perfect eavesdropping: horizon and tail window must be nonnegative");
  }
  const int d = static_cast<int>(client_init.size());
  if (adversary_init.size() != d) {
    return absl::InvalidArgumentError(
        "perfect eavesdropping: initial models differ in dimension");
  }
  if (absl::Status s = CheckHistory(r_history, horizon, d, "r"); !s.ok()) {
    return s;
  }
  PerfectEavesdropSeries out;
  out.value.reserve(horizon + 1);
  ModelVector mean = client_init - adversary_init;
  double spread = 0.0;
  for (int t = 0; t <= horizon; ++t) {
    out.value.push_back(p * (1.0 - p) * spread + mean.squaredNorm());
    if (t == horizon) break;
    spread += r_history[t].squaredNorm();
    mean += p * r_history[t];
  }
  out.tail_window =
      tail_window > 0 ? tail_window : DefaultTailWindow(horizon + 1);
  out.tail_min = TailMinimum(out.value, out.tail_window);
  return out;
}

absl::StatusOr<OptimalParticipation> OptimalParticipationProbability(
    std::span<const ModelVector> r_history, const ModelVector& client_init,
    const ModelVector& adversary_init, int horizon) {
  const int d = static_cast<int>(client_init.size());
  if (adversary_init.size() != d) {
    return absl::InvalidArgumentError(
        "optimal p: initial models differ in dimension");
  }
  if (horizon < 0) {
    return absl::InvalidArgumentError("optimal p: horizon must be >= 0");
  }
  if (absl::Status s = CheckHistory(r_history, horizon, d, "r"); !s.ok()) {
    return s;
  }
  const ModelVector e0 = client_init - adversary_init;
  ModelVector r_sum = ModelVector::Zero(d);
  double spread = 0.0;
  for (int t = 0; t < horizon; ++t) {
    r_sum += r_history[t];
    spread += r_history[t].squaredNorm();
  }
  // value(p) = c + b p + a p^2.
  const double a = r_sum.squaredNorm() - spread;
  const double b = spread + 2.0 * e0.dot(r_sum);
  const double c = e0.squaredNorm();
  auto value = [&](double p) { return c + b * p + a * p * p; };

  OptimalParticipation out;
  const double scale =
      1.0 + spread + r_sum.squaredNorm() + std::abs(e0.dot(r_sum));
  if (std::abs(a) <= 1e-14 * scale && std::abs(b) <= 1e-14 * scale) {
    out.flat = true;
    out.p_star = 0.0;
    out.value = c;
    return out;
  }
  if (a < 0.0) {
    out.p_star = std::clamp(-b / (2.0 * a), 0.0, 1.0);
  } else {
    out.p_star = value(1.0) > value(0.0) ? 1.0 : 0.0;
  }
  out.value = value(out.p_star);
  return out;
}

}  // namespace flprotect
