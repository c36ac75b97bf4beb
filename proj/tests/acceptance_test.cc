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

// Runs every acceptance criterion at full size and prints one PASS/FAIL line
// per criterion. Exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "flprotect/adversary.h"
#include "flprotect/analysis.h"
#include "flprotect/commands.h"
#include "flprotect/csv.h"
#include "flprotect/enumeration.h"
#include "flprotect/experiments.h"
#include "flprotect/fl_sim.h"
#include "flprotect/rng.h"

namespace flprotect {
namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double Uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

ModelVector RandomVector(Rng& rng, int d, double scale = 1.0) {
  ModelVector v(d);
  for (int i = 0; i < d; ++i) v[i] = Uniform(rng, -scale, scale);
  return v;
}

Matrix RandomMatrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = Uniform(rng, -scale, scale);
  }
  return m;
}

Scenario RandomScripted(Rng& rng, int d, int horizon) {
  Scenario s;
  s.p = Uniform(rng, 0.2, 0.9);
  s.gamma = Uniform(rng, 0.1, 0.9);
  s.m = RandomMatrix(rng, d, d, 0.8 / d);
  s.horizon = horizon;
  s.client_init = RandomVector(rng, d);
  s.adversary_init = RandomVector(rng, d);
  for (int t = 0; t < horizon; ++t) {
    s.xi.push_back(RandomVector(rng, d));
    s.zeta.push_back(RandomVector(rng, d, 0.5));
    s.zeta_hat.push_back(RandomVector(rng, d, 0.5));
  }
  return s;
}

Scenario ReferenceScenario(int horizon) {
  Scenario s;
  s.p = 0.5;
  s.gamma = 0.5;
  s.m = Matrix::Constant(1, 1, 0.5);
  s.horizon = horizon;
  s.client_init = ModelVector::Zero(1);
  s.adversary_init = ModelVector::Zero(1);
  for (int t = 0; t < horizon; ++t) {
    s.xi.push_back(ModelVector::Constant(1, std::pow(0.9, t)));
    s.zeta.push_back(ModelVector::Constant(1, 0.1));
  }
  return s;
}

BoundInputs InputsOf(const Scenario& s) {
  BoundInputs in;
  in.xi = s.xi;
  in.zeta = s.zeta;
  in.zeta_hat = s.zeta_hat;
  in.p = s.p;
  in.gamma = s.gamma;
  in.m = s.m;
  in.client_init = s.client_init;
  in.adversary_init = s.adversary_init;
  in.horizon = s.horizon;
  return in;
}

std::vector<ModelVector> Residuals(const Scenario& s) {
  std::vector<ModelVector> r;
  for (int t = 0; t < s.horizon; ++t) {
    r.push_back(s.zeta_hat.empty() ? s.zeta[t]
                                   : ModelVector(s.zeta[t] - s.zeta_hat[t]));
  }
  return r;
}

absl::StatusOr<Outcome> OperatorLOracle() {
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 3;
    const Matrix b = RandomMatrix(rng, 2 * d, 2 * d);
    const Matrix sigma = b * b.transpose();
    const double p = UniformUnit(rng), gamma = UniformUnit(rng);
    const Matrix m = RandomMatrix(rng, d, d);
    absl::StatusOr<Matrix> closed = ApplyOperatorL(sigma, p, gamma, m);
    if (!closed.ok()) return closed.status();
    Matrix brute = Matrix::Zero(2 * d, 2 * d);
    for (bool delta : {false, true}) {
      for (bool mu : {false, true}) {
        const double w = (delta ? p : 1.0 - p) * (mu ? gamma : 1.0 - gamma);
        const Matrix a = JointTransitionMatrix(delta, mu, m);
        brute += w * a * sigma * a.transpose();
      }
    }
    worst = std::max(worst, (*closed - brute).cwiseAbs().maxCoeff());
  }
  return Outcome{worst <= 1e-12,
                 absl::StrCat("max elementwise error ", FormatDouble(worst),
                              " over 100 instances (tol 1e-12)")};
}

absl::StatusOr<Outcome> StabilityDivergence() {
  const double threshold = StabilityThreshold(0.5, 0.5);
  Matrix sigma0(2, 2);
  sigma0 << 1.3, 0.4, 0.4, 0.7;
  absl::StatusOr<OperatorIteration> above = IterateOperatorL(
      sigma0, 0.5, 0.5, Matrix::Constant(1, 1, 1.01 * threshold), 10000, 1e12);
  if (!above.ok()) return above.status();
  absl::StatusOr<OperatorIteration> below = IterateOperatorL(
      sigma0, 0.5, 0.5, Matrix::Constant(1, 1, 0.5), 10000, 1e12);
  if (!below.ok()) return below.status();
  const bool ok = std::abs(threshold - 2.0 * std::sqrt(2.0)) < 1e-12 &&
                  above->diverged && !below->diverged && below->max_trace < 1e3;
  return Outcome{
      ok, absl::StrCat("threshold ", FormatDouble(threshold),
                       "; M=1.01*threshold exceeded trace 1e12 after ",
                       above->iterations, " iterations; M=0.5 max trace ",
                       FormatDouble(below->max_trace))};
}

absl::StatusOr<Outcome> TransitionExactness() {
  Rng rng(103);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Matrix b = RandomMatrix(rng, 3, 3);
    absl::StatusOr<QuadraticObjective> f =
        QuadraticObjective::Create(b * b.transpose(), RandomVector(rng, 3));
    if (!f.ok()) return f.status();
    const double eta = Uniform(rng, 0.05, 0.95) / f->MaxEigenvalue();
    const int steps = 1 + i % 10;
    absl::StatusOr<InnovationTransition> tr =
        ComputeInnovationTransition(*f, eta, steps);
    if (!tr.ok()) return tr.status();
    const ModelVector server = RandomVector(rng, 3, 2.0);
    absl::StatusOr<ModelVector> xi_prev = LocalUpdate(server, *f, eta, steps);
    if (!xi_prev.ok()) return xi_prev.status();
    const ModelVector zeta = RandomVector(rng, 3);
    absl::StatusOr<ModelVector> xi =
        LocalUpdate(server + *xi_prev + zeta, *f, eta, steps);
    if (!xi.ok()) return xi.status();
    const double residual =
        (*xi - (tr->a * *xi_prev + tr->b * zeta)).norm() / (1.0 + xi->norm());
    worst = std::max(worst, residual);
  }
  return Outcome{worst <= 1e-10,
                 absl::StrCat("max relative residual ", FormatDouble(worst),
                              " over 50 instances (tol 1e-10)")};
}

absl::StatusOr<Outcome> BoundBelowExact() {
  Rng rng(104);
  std::vector<Scenario> scenarios = {ReferenceScenario(13)};
  for (int i = 0; i < 10; ++i) {
    scenarios.push_back(RandomScripted(rng, 1 + i % 2, 13));
  }
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<std::string> violations;
  for (size_t i = 0; i < scenarios.size(); ++i) {
    const Scenario& s = scenarios[i];
    absl::StatusOr<ExactProtection> exact = BruteForceProtection(s);
    if (!exact.ok()) return exact.status();
    absl::StatusOr<BoundSeries> bound = ComputeProtectionBound(InputsOf(s));
    if (!bound.ok()) return bound.status();
    std::vector<int> rounds;
    for (int t = 0; t < s.horizon; ++t) {
      const double gap = bound->bound[t] - exact->value[t];
      worst = std::max(worst, gap);
      if (gap > 1e-9) rounds.push_back(t);
    }
    if (!rounds.empty()) {
      violations.push_back(absl::StrCat(
          i == 0 ? "reference" : "random ", i == 0 ? "" : absl::StrCat(i),
          " at t={", absl::StrJoin(rounds, ","), "}"));
    }
  }
  return Outcome{
      violations.empty(),
      absl::StrCat(
          "max bound_t - exact_t = ", FormatDouble(worst),
          " over 11 scenarios, t <= 12",
          violations.empty()
              ? ""
              : absl::StrCat("; violated in ", violations.size(),
                             " scenarios: ", absl::StrJoin(violations, "; ")))};
}

absl::StatusOr<Outcome> PerfectEavesdropEquality() {
  Rng rng(105);
  std::vector<std::string> notes;
  bool ok = true;
  for (double p : {0.3, 0.7}) {
    Scenario s = RandomScripted(rng, 2, 100);
    s.p = p;
    s.force_mu_one = true;
    absl::StatusOr<ProtectionEstimate> mc =
        MonteCarloProtection(s, 100000, DeriveSeed(105, p * 10));
    if (!mc.ok()) return mc.status();
    absl::StatusOr<PerfectEavesdropSeries> closed = PerfectEavesdropProtection(
        Residuals(s), p, s.client_init, s.adversary_init, s.horizon);
    if (!closed.ok()) return closed.status();
    int outside = 0;
    double worst_z = 0.0;
    for (int t = 0; t <= s.horizon; ++t) {
      const double diff = std::abs(mc->mean[t] - closed->value[t]);
      const double se = mc->standard_error[t];
      // A deterministic round has zero spread; allow rounding only.
      if (diff > 3.0 * se + 1e-12 * (1.0 + closed->value[t])) ++outside;
      if (se > 0.0) worst_z = std::max(worst_z, diff / se);
    }
    Scenario small = s;
    small.horizon = 12;
    small.xi.resize(12);
    small.zeta.resize(12);
    small.zeta_hat.resize(12);
    absl::StatusOr<ExactProtection> exact = BruteForceProtection(small);
    if (!exact.ok()) return exact.status();
    double enum_err = 0.0;
    for (int t = 0; t <= 12; ++t) {
      enum_err =
          std::max(enum_err, std::abs(exact->value[t] - closed->value[t]));
    }
    ok = ok && outside == 0 && enum_err <= 1e-9;
    notes.push_back(absl::StrFormat(
        "p=%.1f: %d/101 rounds outside 3se (max z %.2f), enumeration err %s", p,
        outside, worst_z, FormatDouble(enum_err)));
  }
  return Outcome{ok, absl::StrJoin(notes, "; ")};
}

absl::StatusOr<Outcome> FlopZeroProtection() {
  ObjectiveGeneratorOptions gen;
  gen.num_clients = 10;
  gen.dim = 4;
  absl::StatusOr<std::vector<QuadraticObjective>> objectives =
      GenerateClientObjectives(gen);
  if (!objectives.ok()) return objectives.status();
  Scenario s;
  s.mode = ScenarioMode::kFullFl;
  s.protocol = Protocol::kFlop;
  s.p = 0.5;
  s.gamma = 0.1;
  s.m = 0.5 * Matrix::Identity(4, 4);
  s.horizon = 200;
  s.client_init = ModelVector::Zero(4);
  s.adversary_init = ModelVector::Zero(4);
  s.federation.num_clients = 10;
  s.federation.num_sampled = 5;
  s.federation.objectives = *std::move(objectives);
  s.federation.server_init = ModelVector::Zero(4);

  int final_zero = 0;
  int reset_failures = 0;
  int resets = 0;
  for (int i = 0; i < 1000; ++i) {
    absl::StatusOr<TrialTrace> trace = RunTrial(s, DeriveSeed(106, i));
    if (!trace.ok()) return trace.status();
    if (trace->final_error_sq == 0.0) ++final_zero;
    for (int t = 0; t < s.horizon; ++t) {
      const RoundTrace& r = trace->rounds[t];
      if (!(r.delta && r.mu)) continue;
      ++resets;
      const double next = t + 1 < s.horizon ? trace->rounds[t + 1].error_sq
                                            : trace->final_error_sq;
      if (next != 0.0) ++reset_failures;
    }
  }
  const double fraction = final_zero / 1000.0;
  return Outcome{fraction >= 0.999 && reset_failures == 0,
                 absl::StrCat("final zero fraction ", FormatDouble(fraction),
                              " (need >= 0.999); ", reset_failures, " of ",
                              resets, " interceptions left a non-zero error")};
}

absl::StatusOr<Outcome> DriftIdentity() {
  Rng rng(107);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 3;
    std::vector<ModelVector> xi;
    for (int t = 0; t < 30; ++t) xi.push_back(RandomVector(rng, d));
    const double p = UniformUnit(rng);
    const Matrix m = RandomMatrix(rng, d, d);
    for (int t = 0; t < 30; ++t) {
      worst = std::max(worst, (InnovationDrift(xi, p, m, t) -
                               ExpandedInnovationDrift(xi, p, m, t))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  return Outcome{worst <= 1e-12,
                 absl::StrCat("max error ", FormatDouble(worst),
                              " over 100 histories (tol 1e-12)")};
}

absl::StatusOr<Outcome> VtOracle() {
  Rng rng(108);
  std::vector<Scenario> scenarios = {ReferenceScenario(10)};
  for (int i = 0; i < 4; ++i)
    scenarios.push_back(RandomScripted(rng, 1 + i % 3, 10));
  double worst = 0.0;
  for (const Scenario& s : scenarios) {
    absl::StatusOr<BoundSeries> series = ComputeProtectionBound(InputsOf(s));
    if (!series.ok()) return series.status();
    for (int t = 0; t < s.horizon; ++t) {
      absl::StatusOr<VtResult> vt =
          ComputeVt(series->s[t], series->r[t], s.xi, s.p, s.gamma, s.m, t);
      if (!vt.ok()) return vt.status();
      absl::StatusOr<ForcingMoments> exact = EnumerateForcingMoments(s, t);
      if (!exact.ok()) return exact.status();
      worst = std::max(worst, std::abs(vt->trace - exact->top_left_trace));
    }
  }
  return Outcome{worst <= 1e-9,
                 absl::StrCat("max |tr V_t - enumerated| ", FormatDouble(worst),
                              " over 5 scenarios, t < 10 (tol 1e-9)")};
}

absl::StatusOr<Outcome> ParticipationSweep() {
  Rng rng(109);
  constexpr int kHorizon = 40;
  constexpr int kActive = 12;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  std::vector<std::string> notes;
  bool ok = true;
  for (int script = 0; script < 5; ++script) {
    // Residuals stop after kActive rounds, so the tail window sees the
    // settled value.
    Scenario s;
    s.gamma = 0.5;
    s.force_mu_one = true;
    s.m = 0.5 * Matrix::Identity(2, 2);
    s.horizon = kHorizon;
    s.client_init = RandomVector(rng, 2, 0.5);
    s.adversary_init = ModelVector::Zero(2);
    for (int t = 0; t < kHorizon; ++t) {
      s.xi.push_back(RandomVector(rng, 2));
      s.zeta.push_back(t < kActive ? RandomVector(rng, 2)
                                   : ModelVector(ModelVector::Zero(2)));
    }
    absl::StatusOr<OptimalParticipation> best = OptimalParticipationProbability(
        Residuals(s), s.client_init, s.adversary_init, kHorizon);
    if (!best.ok()) return best.status();
    absl::StatusOr<std::vector<SweepRow>> rows = ProtectionSweep(
        s, SweepParameter::kP, grid, 20000, DeriveSeed(109, script));
    if (!rows.ok()) return rows.status();
    double argmax = 0.0, top = -1.0;
    for (const SweepRow& row : *rows) {
      if (row.mc_tail_mean > top) {
        top = row.mc_tail_mean;
        argmax = row.value;
      }
    }
    const bool match =
        best->flat || std::abs(argmax - best->p_star) <= 0.05 + 1e-12;
    ok = ok && match;
    notes.push_back(absl::StrFormat("%.2f/%.3f", argmax, best->p_star));
  }
  return Outcome{ok, absl::StrCat("empirical argmax / p* per script: ",
                                  absl::StrJoin(notes, ", "))};
}

absl::StatusOr<std::string> SimulateOnce(const char* threads) {
  setenv("FLPROTECT_THREADS", threads, 1);
  std::vector<std::string> args = {"flprotect", "simulate", "--seed",    "777",
                                   "--trials",  "2000",     "--horizon", "80",
                                   "--gamma",   "0.3"};
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  unsetenv("FLPROTECT_THREADS");
  if (code != kExitOk) {
    return absl::InternalError(
        absl::StrCat("simulate exited ", code, ": ", err.str()));
  }
  return out.str();
}

absl::StatusOr<Outcome> Determinism() {
  absl::StatusOr<std::string> a = SimulateOnce("1");
  if (!a.ok()) return a.status();
  absl::StatusOr<std::string> b = SimulateOnce("1");
  if (!b.ok()) return b.status();
  absl::StatusOr<std::string> c = SimulateOnce("4");
  if (!c.ok()) return c.status();
  return Outcome{*a == *b && *a == *c && !a->empty(),
                 absl::StrCat("repeat identical: ", *a == *b,
                              ", threads 1 vs 4 identical: ", *a == *c, " (",
                              a->size(), " bytes)")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<absl::StatusOr<Outcome>()> run;
};

int Main() {
  const std::vector<Criterion> criteria = {
      {1, "operator_l_oracle", 1, OperatorLOracle},
      {2, "stability_divergence", 1, StabilityDivergence},
      {3, "innovation_transition_exact", 1, TransitionExactness},
      {4, "bound_below_exact_enumeration", 30, BoundBelowExact},
      {5, "perfect_eavesdrop_equality", 60, PerfectEavesdropEquality},
      {6, "flop_zero_protection", 10, FlopZeroProtection},
      {7, "drift_identity", 1, DriftIdentity},
      {8, "vt_enumeration_oracle", 30, VtOracle},
      {9, "participation_sweep_argmax", 120, ParticipationSweep},
      {10, "simulate_determinism", 10, Determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    absl::StatusOr<Outcome> outcome = c.run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    bool passed = outcome.ok() && outcome->passed;
    std::string detail =
        outcome.ok() ? outcome->detail
                     : absl::StrCat("error: ", outcome.status().message());
    if (seconds > c.budget_seconds) {
      passed = false;
      detail += absl::StrFormat(" [over %.0fs budget]", c.budget_seconds);
    }
    if (!passed) ++failures;
    std::cout << absl::StrFormat("%s %2d %-30s %7.2fs  %s\n",
                                 passed ? "PASS" : "FAIL", c.id, c.name,
                                 seconds, detail)
              << std::flush;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size()
            << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace flprotect

int main() { return flprotect::Main(); }
