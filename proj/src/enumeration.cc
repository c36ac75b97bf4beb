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

#include "flprotect/enumeration.h"

#include <array>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace flprotect {
namespace {

struct Outcome {
  bool delta;
  bool mu;
  double weight;
};

// The three distinguishable outcomes of a round. Zero-weight outcomes are
// dropped.
std::vector<Outcome> RoundOutcomes(double p, double gamma, bool force_mu_one) {
  const double g = force_mu_one ? 1.0 : gamma;
  std::vector<Outcome> out;
  if (1.0 - p > 0.0) out.push_back({false, false, 1.0 - p});
  if (p * g > 0.0) out.push_back({true, true, p * g});
  if (p * (1.0 - g) > 0.0) out.push_back({true, false, p * (1.0 - g)});
  return out;
}

absl::Status CheckEnumerable(const Scenario& scenario, int rounds,
                             int max_horizon) {
  if (absl::Status s = scenario.Validate(); !s.ok()) return s;
  if (scenario.mode != ScenarioMode::kScripted) {
    return absl::InvalidArgumentError("enumeration needs a scripted scenario");
  }
  if (rounds > max_horizon) {
    return absl::ResourceExhaustedError(
        absl::StrCat("enumeration over ", rounds, " rounds exceeds the cap of ",
                     max_horizon, " (3^", rounds, " histories)"));
  }
  return absl::OkStatus();
}

std::vector<ModelVector> Residuals(const Scenario& scenario) {
  std::vector<ModelVector> r(scenario.horizon);
  for (int t = 0; t < scenario.horizon; ++t) {
    r[t] = scenario.zeta_hat.empty()
               ? scenario.zeta[t]
               : ModelVector(scenario.zeta[t] - scenario.zeta_hat[t]);
  }
  return r;
}

// Error recursion. q is the gap xi_tau - xi-hat_tau carried by the innovation
// estimator.
class Enumerator {
 public:
  Enumerator(const Scenario& scenario, int rounds)
      : s_(scenario),
        rounds_(rounds),
        outcomes_(
            RoundOutcomes(scenario.p, scenario.gamma, scenario.force_mu_one)),
        r_(Residuals(scenario)),
        e_(rounds + 1),
        q_(rounds + 1),
        miss_(scenario.dim()) {
    const int d = scenario.dim();
    m_xi_.reserve(scenario.horizon);
    for (const ModelVector& x : scenario.xi) m_xi_.push_back(scenario.m * x);
    for (int k = 0; k <= rounds; ++k) {
      e_[k].resize(d);
      q_[k].resize(d);
    }
    result_.value.assign(rounds + 1, 0.0);
    result_.mean_error.assign(rounds + 1, ModelVector::Zero(d));
    result_.weight_sum.assign(rounds + 1, 0.0);
    value_carry_.assign(rounds + 1, 0.0);
    weight_carry_.assign(rounds + 1, 0.0);
  }

  ExactProtection Run() {
    e_[0] = s_.client_init - s_.adversary_init;
    q_[0].setZero();
    Visit(0, -1, 1.0);
    for (int t = 0; t <= rounds_; ++t) {
      result_.value[t] += value_carry_[t];
      result_.weight_sum[t] += weight_carry_[t];
    }
    return std::move(result_);
  }

 private:
  // Neumaier-compensated sum += x; millions of leaves otherwise drift.
  static void Accumulate(double& sum, double& carry, double x) {
    const double next = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - next) + x : (x - next) + sum;
    sum = next;
  }

  void Visit(int t, int tau, double weight) {
    Accumulate(result_.value[t], value_carry_[t], weight * e_[t].squaredNorm());
    result_.mean_error[t] += weight * e_[t];
    Accumulate(result_.weight_sum[t], weight_carry_[t], weight);
    if (t == rounds_) {
      ++result_.leaves;
      return;
    }
    const ModelVector& e = e_[t];
    const ModelVector& q = q_[t];
    for (const Outcome& o : outcomes_) {
      ModelVector& e_next = e_[t + 1];
      ModelVector& q_next = q_[t + 1];
      if (!o.delta) {
        e_next = e;
        q_next = q;
        Visit(t + 1, tau, weight * o.weight);
        continue;
      }
      if (o.mu) {
        if (s_.protocol == Protocol::kFlip) {
          e_next = e + r_[t];
          q_next.setZero();
        } else {
          const ModelVector zeta_hat = s_.zeta_hat.empty()
                                           ? ModelVector::Zero(e.size())
                                           : s_.zeta_hat[t];
          if (s_.flop_memory == FlopXiMemory::kInnovation) {
            q_next.setZero();
          } else {
            // The stored innovation is x^c_{t+1} - x^a_t = e + xi + zeta.
            q_next = -e - s_.zeta[t];
          }
          e_next = -zeta_hat;
        }
      } else {
        // xi_t - M xi-hat_tau, with xi_{-1} = xi-hat_{-1} = 0.
        miss_.noalias() = s_.m * q;
        if (tau >= 0) miss_ -= m_xi_[tau];
        miss_ += s_.xi[t];
        e_next = e + r_[t] + miss_;
        q_next = miss_;
      }
      Visit(t + 1, t, weight * o.weight);
    }
  }

  const Scenario& s_;
  const int rounds_;
  const std::vector<Outcome> outcomes_;
  const std::vector<ModelVector> r_;
  std::vector<ModelVector> m_xi_;
  std::vector<ModelVector> e_;
  std::vector<ModelVector> q_;
  ModelVector miss_;
  ExactProtection result_;
  std::vector<double> value_carry_;
  std::vector<double> weight_carry_;
};

}  // namespace

absl::StatusOr<ExactProtection> BruteForceProtection(const Scenario& scenario,
                                                     int max_horizon) {
  if (absl::Status s = CheckEnumerable(scenario, scenario.horizon, max_horizon);
      !s.ok()) {
    return s;
  }
  ExactProtection out = Enumerator(scenario, scenario.horizon).Run();
  for (int t = 0; t <= scenario.horizon; ++t) {
    if (std::abs(out.weight_sum[t] - 1.0) > 1e-12) {
      return absl::InternalError(absl::StrCat(
          "enumeration weights at depth ", t, " sum to ", out.weight_sum[t]));
    }
  }
  return out;
}

Matrix JointTransitionMatrix(bool delta, bool mu, const Matrix& m) {
  const int d = static_cast<int>(m.rows());
  const double miss = delta && !mu ? 1.0 : 0.0;
  Matrix a = Matrix::Zero(2 * d, 2 * d);
  a.topLeftCorner(d, d).setIdentity();
  a.topRightCorner(d, d) = miss * m;
  a.bottomRightCorner(d, d) =
      (delta ? 0.0 : 1.0) * Matrix::Identity(d, d) + miss * m;
  return a;
}

absl::StatusOr<Matrix> EnumerateOperatorL(const Matrix& sigma, double p,
                                          double gamma, const Matrix& m) {
  const int d = static_cast<int>(m.rows());
  if (m.cols() != d || sigma.rows() != 2 * d || sigma.cols() != 2 * d) {
    return absl::InvalidArgumentError("enumerated L: dimension mismatch");
  }
  Matrix out = Matrix::Zero(2 * d, 2 * d);
  for (int delta = 0; delta <= 1; ++delta) {
    for (int mu = 0; mu <= 1; ++mu) {
      const double w = (delta ? p : 1.0 - p) * (mu ? gamma : 1.0 - gamma);
      const Matrix a = JointTransitionMatrix(delta, mu, m);
      out += w * a * sigma * a.transpose();
    }
  }
  return out;
}

absl::StatusOr<ForcingMoments> EnumerateForcingMoments(const Scenario& scenario,
                                                       int t, int max_horizon) {
  if (absl::Status s = CheckEnumerable(scenario, t, max_horizon); !s.ok()) {
    return s;
  }
  if (scenario.protocol != Protocol::kFlip) {
    return absl::InvalidArgumentError("forcing moments are defined for FLIP");
  }
  if (t < 0 || t >= scenario.horizon) {
    return absl::InvalidArgumentError(
        absl::StrCat("round ", t, " outside the scripted horizon"));
  }
  const int d = scenario.dim();
  const Matrix& m = scenario.m;
  const std::vector<ModelVector> r = Residuals(scenario);
  const std::vector<Outcome> outcomes =
      RoundOutcomes(scenario.p, scenario.gamma, scenario.force_mu_one);

  struct Leaf {
    double weight;
    ModelVector sigma;
    int tau;
  };
  std::vector<Leaf> leaves;
  // Breadth-first expansion of sigma = (e, q) and tau over rounds 0..t-1.
  ModelVector sigma0(2 * d);
  sigma0 << scenario.client_init - scenario.adversary_init,
      ModelVector::Zero(d);
  leaves.push_back({1.0, sigma0, -1});
  auto forcing = [&](const Outcome& o, int round, int tau) {
    ModelVector u = ModelVector::Zero(2 * d);
    if (!o.delta) return u;
    u.head(d) = r[round];
    if (!o.mu) {
      ModelVector w = scenario.xi[round];
      if (tau >= 0) w -= m * scenario.xi[tau];
      u.head(d) += w;
      u.tail(d) = w;
    }
    return u;
  };
  for (int k = 0; k < t; ++k) {
    std::vector<Leaf> next;
    next.reserve(leaves.size() * outcomes.size());
    for (const Leaf& leaf : leaves) {
      for (const Outcome& o : outcomes) {
        const Matrix a = JointTransitionMatrix(o.delta, o.mu, m);
        next.push_back({leaf.weight * o.weight,
                        a * leaf.sigma + forcing(o, k, leaf.tau),
                        o.delta ? k : leaf.tau});
      }
    }
    leaves = std::move(next);
  }

  ForcingMoments out;
  out.sigma_mean = ModelVector::Zero(2 * d);
  for (const Leaf& leaf : leaves) out.sigma_mean += leaf.weight * leaf.sigma;

  // Means of A_t and u_t over the round-t outcome and the history.
  Matrix a_mean = Matrix::Zero(2 * d, 2 * d);
  ModelVector u_mean = ModelVector::Zero(2 * d);
  for (const Outcome& o : outcomes) {
    a_mean += o.weight * JointTransitionMatrix(o.delta, o.mu, m);
    for (const Leaf& leaf : leaves) {
      u_mean += leaf.weight * o.weight * forcing(o, t, leaf.tau);
    }
  }

  out.second_moment = Matrix::Zero(2 * d, 2 * d);
  out.cross_term = Matrix::Zero(2 * d, 2 * d);
  for (const Outcome& o : outcomes) {
    const Matrix a = JointTransitionMatrix(o.delta, o.mu, m);
    for (const Leaf& leaf : leaves) {
      const double w = leaf.weight * o.weight;
      const ModelVector v =
          (a - a_mean) * out.sigma_mean + (forcing(o, t, leaf.tau) - u_mean);
      out.second_moment += w * v * v.transpose();
      out.cross_term += w * a * (leaf.sigma - out.sigma_mean) * v.transpose();
    }
  }
  out.top_left = out.second_moment.topLeftCorner(d, d);
  out.top_left_trace = out.top_left.trace();
  return out;
}

}  // namespace flprotect
