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

#ifndef FLPROTECT_ANALYSIS_H_
#define FLPROTECT_ANALYSIS_H_

#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "flprotect/adversary.h"
#include "flprotect/fl_sim.h"
#include "flprotect/types.h"

namespace flprotect {

// G = -eta * sum_{k<L} F^k with F = I - eta Q, so that xi = G grad f(x^s)
// holds exactly for a quadratic objective.
absl::StatusOr<Matrix> ComputeG(const QuadraticObjective& objective, double eta,
                                int steps);

// xi_t = A xi_{t'} + B zeta_t between consecutive participation rounds t' < t.
// With a constant Hessian G_now == G_prev and the relation is exact.
struct InnovationTransition {
  Matrix a;
  Matrix b;
  Matrix g_now;
  Matrix g_prev;
};

absl::StatusOr<InnovationTransition> ComputeInnovationTransition(
    const QuadraticObjective& objective, double eta, int steps);

// L(Sigma) = (1-p) Sigma + p K1 Sigma K1^T + p gamma (1-gamma) K2 Sigma K2^T,
//   K1 = [[I, (1-gamma) M], [0, (1-gamma) M]],  K2 = [[0, M], [0, M]],
// i.e. E[A_t Sigma A_t^T] for the joint (error, estimation-gap) state.
// Sigma is 2d x 2d and must be symmetric.
absl::StatusOr<Matrix> ApplyOperatorL(const Matrix& sigma, double p,
                                      double gamma, const Matrix& m);

struct OperatorIteration {
  bool diverged = false;
  int iterations = 0;
  double final_trace = 0.0;
  double max_trace = 0.0;
};

// Iterates Sigma_{k+1} = L(Sigma_k) until the trace exceeds
// `divergence_trace` or `max_iterations` steps have run.
absl::StatusOr<OperatorIteration> IterateOperatorL(
    const Matrix& sigma0, double p, double gamma, const Matrix& m,
    int max_iterations = 10000, double divergence_trace = 1e12);

// ell_t = E[xi_{tau_t}] = sum_{s<t} p (1-p)^{t-s-1} xi_s. The tau = -1 branch
// (probability (1-p)^t) contributes xi_{-1} = 0. Requires t <= history size.
ModelVector ExpectedLastInnovation(std::span<const ModelVector> xi_history,
                                   double p, int t);

// E||xi_{tau_t} - ell_t||^2 =
//   (1-p)^t ||ell_t||^2 + sum_{k<t} p (1-p)^{t-k-1} ||xi_k - ell_t||^2.
double InnovationVariance(std::span<const ModelVector> xi_history, double p,
                          int t);

// Cov(xi_{tau_t}) as a d x d matrix; its trace is InnovationVariance.
Matrix InnovationCovariance(std::span<const ModelVector> xi_history, double p,
                            int t);

// h_t = xi_t - M ell_t.
ModelVector InnovationDrift(std::span<const ModelVector> xi_history, double p,
                            const Matrix& m, int t);

// The same quantity in its expanded form
//   (1-p)^t xi_t + sum_{k<t} (1-p)^{t-k-1} p (xi_t - M xi_k).
ModelVector ExpandedInnovationDrift(std::span<const ModelVector> xi_history,
                                    double p, const Matrix& m, int t);

// E[q_0] = 0, E[q_{t+1}] = ((1-p) I + p(1-gamma) M) E[q_t] + p(1-gamma) h_t.
// Returns horizon + 1 entries (t = 0..horizon).
std::vector<ModelVector> ExpectedEstimationGap(
    std::span<const ModelVector> xi_history, double p, double gamma,
    const Matrix& m, int horizon);

// How the Cov(xi_tau) contribution enters V_t.
//   kPropagated: p(1-gamma) M Cov(xi_tau) M^T, which is what the error
//                recursion produces (the missed-interception branch applies M
//                to xi_tau).
//   kAsPublished: p(1-gamma) Cov(xi_tau).
enum class VtForm { kPropagated, kAsPublished };

struct VtResult {
  Matrix v;
  double trace = 0.0;
  // gamma is 0 or 1, so some terms vanish identically.
  bool degenerate = false;
};

// Top-left block of E[v_t v_t^T]:
//   p(1-p)(1-gamma)(s+r)(s+r)^T + p^2 gamma (1-gamma) s s^T
//   + p(1-p) gamma r r^T + p(1-gamma) [M] Cov(xi_tau) [M^T].
// Requires 0 < p <= 1 and 0 <= gamma <= 1.
absl::StatusOr<VtResult> ComputeVt(const ModelVector& s, const ModelVector& r,
                                   std::span<const ModelVector> xi_history,
                                   double p, double gamma, const Matrix& m,
                                   int t, VtForm form = VtForm::kPropagated);

// Rounds in the default tail window: the final 25%, at least one.
int DefaultTailWindow(int rounds);

// Minimum over the last `tail_window` entries; the finite-horizon stand-in
// for a liminf.
double TailMinimum(std::span<const double> values, int tail_window);

struct BoundInputs {
  std::vector<ModelVector> xi;        // xi_0 .. xi_{horizon-1}
  std::vector<ModelVector> zeta;      // zeta_0 .. zeta_{horizon-1}
  std::vector<ModelVector> zeta_hat;  // empty means zero
  double p = 0.5;
  double gamma = 0.5;
  Matrix m;
  ModelVector client_init;
  ModelVector adversary_init;
  int horizon = 0;
  int tail_window = 0;  // 0 selects DefaultTailWindow(horizon)
};

// Which expression supplies the mean-error term g_t.
//   kStatement: e0 + p sum_{k<=t} r_k
//               + p(1-gamma) (I - (1-gamma) M)^{-1} sum_{k<=t} h_k.
//   kTransient: e0 + p sum_{k<t} r_k
//               + p(1-gamma) (I - M2)^{-1} sum_{k<t} (p I - M1 M2^{t-1-k}) h_k
//               with M1 = p(1-gamma) M, M2 = (1-p) I + M1; this is E[e_t].
enum class MeanForm { kStatement, kTransient };

// Per-round terms of the protection lower bound, t = 0..horizon-1.
struct BoundSeries {
  std::vector<ModelVector> ell;
  std::vector<ModelVector> h;
  std::vector<ModelVector> q_mean;
  std::vector<ModelVector> s;
  std::vector<ModelVector> r;
  std::vector<ModelVector> g;
  std::vector<double> var;             // E||xi_tau - ell||^2
  std::vector<double> var_propagated;  // E||M (xi_tau - ell)||^2
  // (1-p)||s+r||^2 + p gamma ||s||^2 + (1-p) gamma/(1-gamma) ||r||^2
  //   + var + ||g||^2.
  std::vector<double> bound;
  // Same with var_propagated in place of var.
  std::vector<double> bound_propagated;
  // Finite-horizon diagnostic:
  //   sum_{k<t} (1-p+p gamma)^{t-1-k} tr V_k + ||E[e_t]||^2.
  std::vector<double> accumulated_bound;
  double tail_min = 0.0;
  double tail_min_propagated = 0.0;
  int tail_window = 0;
  // gamma == 1: every bound column holds the perfect-eavesdropping value.
  bool perfect_eavesdropping = false;
  StabilityReport stability;
  std::vector<std::string> warnings;
};

absl::StatusOr<BoundSeries> ComputeProtectionBound(
    const BoundInputs& inputs, MeanForm mean_form = MeanForm::kStatement);

// Mean error E[e_t] for t = 0..horizon by the transient closed form.
absl::StatusOr<std::vector<ModelVector>> TransientMeanError(
    const BoundInputs& inputs);

struct PerfectEavesdropSeries {
  // value[t] for t = 0..horizon.
  std::vector<double> value;
  double tail_min = 0.0;
  int tail_window = 0;
};

// Protection when every uplink is intercepted:
//   E||e_t||^2 = p(1-p) sum_{k<t} ||r_k||^2 + ||(x^c_0 - x^a_0) + p sum_{k<t}
//   r_k||^2.
// An equality at every round, not a bound.
absl::StatusOr<PerfectEavesdropSeries> PerfectEavesdropProtection(
    std::span<const ModelVector> r_history, double p,
    const ModelVector& client_init, const ModelVector& adversary_init,
    int horizon, int tail_window = 0);

struct OptimalParticipation {
  double p_star = 0.0;
  double value = 0.0;
  // The objective does not depend on p; p_star is 0 by convention.
  bool flat = false;
};

// Maximizes the perfect-eavesdropping protection at round `horizon` over
// p in [0, 1]. The objective is quadratic in p, so this is a clamped vertex
// or an endpoint.
absl::StatusOr<OptimalParticipation> OptimalParticipationProbability(
    std::span<const ModelVector> r_history, const ModelVector& client_init,
    const ModelVector& adversary_init, int horizon);

}  // namespace flprotect

#endif  // FLPROTECT_ANALYSIS_H_
