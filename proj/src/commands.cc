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

#include "flprotect/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "flprotect/analysis.h"
#include "flprotect/csv.h"
#include "flprotect/enumeration.h"
#include "flprotect/fl_sim.h"
#include "nlohmann/json.hpp"

namespace flprotect {
namespace {

// Rounds up to which `simulate` also reports the enumerated exact value.
constexpr int kSimulateExactHorizon = 12;

// Output goes to --out when given, else to `fallback`.
class OutputTarget {
 public:
  static absl::StatusOr<std::unique_ptr<OutputTarget>> Open(
      const std::string& path, std::ostream& fallback) {
    auto target = std::unique_ptr<OutputTarget>(new OutputTarget(fallback));
    if (!path.empty()) {
      target->file_.open(path, std::ios::out | std::ios::trunc);
      if (!target->file_) {
        return absl::PermissionDeniedError(
            absl::StrCat("out: cannot write '", path, "'"));
      }
      target->stream_ = &target->file_;
    }
    return target;
  }

  std::ostream& stream() { return *stream_; }

  absl::Status Close() {
    stream_->flush();
    if (!*stream_) return absl::DataLossError("failed writing output");
    if (file_.is_open()) file_.close();
    return absl::OkStatus();
  }

 private:
  explicit OutputTarget(std::ostream& fallback) : stream_(&fallback) {}

  std::ofstream file_;
  std::ostream* stream_;
};

std::vector<ModelVector> Residuals(const Scenario& s) {
  std::vector<ModelVector> r(s.horizon);
  for (int t = 0; t < s.horizon; ++t) {
    r[t] =
        s.zeta_hat.empty() ? s.zeta[t] : ModelVector(s.zeta[t] - s.zeta_hat[t]);
  }
  return r;
}

BoundInputs MakeBoundInputs(const Scenario& s, int tail_window) {
  BoundInputs in;
  in.xi = s.xi;
  in.zeta = s.zeta;
  in.zeta_hat = s.zeta_hat;
  in.p = s.p;
  in.gamma = s.force_mu_one ? 1.0 : s.gamma;
  in.m = s.m;
  in.client_init = s.client_init;
  in.adversary_init = s.adversary_init;
  in.horizon = s.horizon;
  in.tail_window = tail_window;
  return in;
}

std::string DescribeM(const RunConfig& c) {
  if (!c.m_file.empty()) return "file";
  if (!c.m_diagonal.empty()) {
    std::vector<std::string> parts;
    for (double v : c.m_diagonal) parts.push_back(FormatDouble(v));
    return absl::StrCat("diag(", absl::StrJoin(parts, ";"), ")");
  }
  return FormatDouble(c.m_scalar);
}

std::string RunDescription(absl::string_view command, const RunConfig& c,
                           const Scenario& s) {
  return absl::StrCat(
      kCsvSchema, " command=", command, " protocol=", ProtocolName(c.protocol),
      " mode=", s.mode == ScenarioMode::kScripted ? "scripted" : "full_fl",
      " N=", c.num_clients, " n=", c.num_sampled, " p=", FormatDouble(s.p),
      " gamma=", FormatDouble(s.gamma), " eta=", FormatDouble(c.eta),
      " steps=", c.local_steps, " horizon=", s.horizon, " d=", s.dim(),
      " M=", DescribeM(c), " seed=", c.seed, " trials=", c.trials,
      " force_mu_one=", s.force_mu_one ? 1 : 0);
}

}  // namespace

absl::Status CmdSimulate(const RunConfig& config, std::ostream& out,
                         std::ostream& err) {
  absl::StatusOr<Scenario> scenario = BuildScenario(config);
  if (!scenario.ok()) return scenario.status();
  const Scenario& s = *scenario;

  MonteCarloOptions options;
  options.tail_window = config.tail_window;
  absl::StatusOr<ProtectionEstimate> mc =
      MonteCarloProtection(s, config.trials, config.seed, options);
  if (!mc.ok()) return mc.status();
  absl::StatusOr<StabilityReport> stability =
      CheckTransitionMatrix(s.m, s.p, s.gamma);
  if (!stability.ok()) return stability.status();

  std::vector<std::string> warnings;
  std::optional<ExactProtection> exact;
  std::optional<BoundSeries> bound;
  std::optional<PerfectEavesdropSeries> perfect;
  if (s.mode == ScenarioMode::kScripted) {
    if (s.horizon <= kSimulateExactHorizon) {
      absl::StatusOr<ExactProtection> e = BruteForceProtection(s);
      if (!e.ok()) return e.status();
      exact = *std::move(e);
    }
    if (s.p > 0.0) {
      absl::StatusOr<BoundSeries> b =
          ComputeProtectionBound(MakeBoundInputs(s, config.tail_window));
      if (b.ok()) {
        bound = *std::move(b);
        for (const std::string& w : bound->warnings) warnings.push_back(w);
      } else {
        warnings.push_back(
            absl::StrCat("bound unavailable: ", b.status().message()));
      }
    }
    absl::StatusOr<PerfectEavesdropSeries> perfect_series =
        PerfectEavesdropProtection(Residuals(s), s.p, s.client_init,
                                   s.adversary_init, s.horizon,
                                   mc->tail_window);
    if (!perfect_series.ok()) return perfect_series.status();
    perfect = *std::move(perfect_series);
  }
  if (!stability->satisfied) {
    warnings.push_back(absl::StrCat("spectral radius of M (",
                                    FormatDouble(stability->spectral_radius),
                                    ") violates the stability threshold (",
                                    FormatDouble(stability->threshold), ")"));
  }

  absl::StatusOr<std::unique_ptr<OutputTarget>> target =
      OutputTarget::Open(config.out, out);
  if (!target.ok()) return target.status();
  CsvWriter csv((*target)->stream());
  csv.Comment(RunDescription("simulate", config, s));
  csv.Comment(absl::StrCat(
      "summary tail_window=", mc->tail_window,
      " tail_mean=", FormatDouble(mc->tail_mean),
      " tail_stderr=", FormatDouble(mc->tail_standard_error),
      " final_zero_fraction=", FormatDouble(mc->final_zero_fraction)));
  for (const std::string& w : warnings) {
    csv.Comment(absl::StrCat("warning: ", w));
    err << "warning: " << w << '\n';
  }
  csv.Header({"t", "mc_mean", "mc_stderr", "exact", "bound", "eq13_value",
              "lemma1_satisfied"});
  for (int t = 0; t <= s.horizon; ++t) {
    csv.Cell(t).Cell(mc->mean[t]).Cell(mc->standard_error[t]);
    csv.Cell(exact ? std::optional<double>(exact->value[t]) : std::nullopt);
    csv.Cell(bound && t < s.horizon ? std::optional<double>(bound->bound[t])
                                    : std::nullopt);
    csv.Cell(perfect ? std::optional<double>(perfect->value[t]) : std::nullopt);
    csv.Cell(stability->satisfied);
    if (absl::Status st = csv.EndRow(); !st.ok()) return st;
  }
  return (*target)->Close();
}

absl::Status CmdBound(const RunConfig& config, std::ostream& out,
                      std::ostream& err) {
  if (config.mode() != ScenarioMode::kScripted) {
    return absl::InvalidArgumentError(
        "bound: needs scripted inputs (--script-xi, optionally --script-zeta "
        "and --script-zeta-hat)");
  }
  absl::StatusOr<Scenario> scenario = BuildScenario(config);
  if (!scenario.ok()) return scenario.status();
  const Scenario& s = *scenario;
  absl::StatusOr<BoundSeries> bound =
      ComputeProtectionBound(MakeBoundInputs(s, config.tail_window));
  if (!bound.ok()) return bound.status();
  const BoundSeries& b = *bound;
  const int d = s.dim();

  absl::StatusOr<std::unique_ptr<OutputTarget>> target =
      OutputTarget::Open(config.out, out);
  if (!target.ok()) return target.status();
  CsvWriter csv((*target)->stream());
  csv.Comment(RunDescription("bound", config, s));
  csv.Comment(absl::StrCat(
      "summary tail_window=", b.tail_window,
      " tail_min=", FormatDouble(b.tail_min),
      " tail_min_propagated=", FormatDouble(b.tail_min_propagated),
      " perfect_eavesdropping=", b.perfect_eavesdropping ? 1 : 0,
      " spectral_radius=", FormatDouble(b.stability.spectral_radius),
      " threshold=", FormatDouble(b.stability.threshold)));
  for (const std::string& w : b.warnings) {
    csv.Comment(absl::StrCat("warning: ", w));
    err << "warning: " << w << '\n';
  }
  std::vector<std::string> columns = {"t"};
  for (const char* prefix : {"ell_", "h_", "q_mean_"}) {
    for (int i = 0; i < d; ++i) columns.push_back(absl::StrCat(prefix, i));
  }
  for (const char* name :
       {"s_norm", "r_norm", "g_norm", "var", "var_propagated", "bound",
        "bound_propagated", "accumulated_bound", "lemma1_satisfied"}) {
    columns.push_back(name);
  }
  csv.Header(columns);
  for (int t = 0; t < s.horizon; ++t) {
    csv.Cell(t);
    for (int i = 0; i < d; ++i) csv.Cell(b.ell[t][i]);
    for (int i = 0; i < d; ++i) csv.Cell(b.h[t][i]);
    for (int i = 0; i < d; ++i) csv.Cell(b.q_mean[t][i]);
    csv.Cell(b.s[t].norm()).Cell(b.r[t].norm()).Cell(b.g[t].norm());
    csv.Cell(b.var[t]).Cell(b.var_propagated[t]);
    csv.Cell(b.bound[t]).Cell(b.bound_propagated[t]);
    csv.Cell(b.accumulated_bound[t]);
    csv.Cell(b.stability.satisfied);
    if (absl::Status st = csv.EndRow(); !st.ok()) return st;
  }
  return (*target)->Close();
}

namespace {

double Uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

ModelVector RandomVector(Rng& rng, int d, double scale) {
  ModelVector v(d);
  for (int i = 0; i < d; ++i) v[i] = Uniform(rng, -scale, scale);
  return v;
}

Matrix RandomMatrix(Rng& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = Uniform(rng, -scale, scale);
  }
  return m;
}

Scenario RandomScripted(Rng& rng, int d, int horizon) {
  Scenario s;
  s.mode = ScenarioMode::kScripted;
  s.protocol = Protocol::kFlip;
  s.p = Uniform(rng, 0.2, 0.9);
  s.gamma = Uniform(rng, 0.1, 0.9);
  s.m = RandomMatrix(rng, d, d, 0.8 / d);
  s.horizon = horizon;
  s.client_init = RandomVector(rng, d, 1.0);
  s.adversary_init = RandomVector(rng, d, 1.0);
  for (int t = 0; t < horizon; ++t) {
    s.xi.push_back(RandomVector(rng, d, 1.0));
    s.zeta.push_back(RandomVector(rng, d, 0.5));
    s.zeta_hat.push_back(RandomVector(rng, d, 0.5));
  }
  return s;
}

Scenario ReferenceScenario(int horizon) {
  Scenario s;
  s.mode = ScenarioMode::kScripted;
  s.protocol = Protocol::kFlip;
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

using CheckFn = std::function<absl::Status(Rng&, CheckResult&)>;

CheckResult RunCheck(const std::string& name, bool informational, uint64_t seed,
                     const CheckFn& fn) {
  CheckResult result;
  result.name = name;
  result.informational = informational;
  Rng rng(seed);
  const auto start = std::chrono::steady_clock::now();
  absl::Status status = fn(rng, result);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (!status.ok()) {
    result.passed = false;
    result.detail = absl::StrCat("error: ", status.message());
  }
  return result;
}

absl::Status CheckOperatorL(Rng& rng, CheckResult& r) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 3;
    const Matrix b = RandomMatrix(rng, 2 * d, 2 * d, 1.0);
    const Matrix sigma = b * b.transpose();
    const double p = UniformUnit(rng);
    const double gamma = UniformUnit(rng);
    const Matrix m = RandomMatrix(rng, d, d, 1.0);
    absl::StatusOr<Matrix> fast = ApplyOperatorL(sigma, p, gamma, m);
    if (!fast.ok()) return fast.status();
    absl::StatusOr<Matrix> slow = EnumerateOperatorL(sigma, p, gamma, m);
    if (!slow.ok()) return slow.status();
    worst = std::max(worst, (*fast - *slow).cwiseAbs().maxCoeff());
  }
  r.measured = worst;
  r.tolerance = 1e-12;
  r.passed = worst <= r.tolerance;
  r.detail = "max elementwise error over 100 random instances";
  return absl::OkStatus();
}

absl::Status CheckStability(Rng&, CheckResult& r) {
  const double p = 0.5, gamma = 0.5;
  const double threshold = StabilityThreshold(p, gamma);
  Matrix sigma0(2, 2);
  sigma0 << 1.0, 0.3, 0.3, 1.0;
  absl::StatusOr<OperatorIteration> unstable = IterateOperatorL(
      sigma0, p, gamma, Matrix::Constant(1, 1, 1.01 * threshold));
  if (!unstable.ok()) return unstable.status();
  absl::StatusOr<OperatorIteration> stable =
      IterateOperatorL(sigma0, p, gamma, Matrix::Constant(1, 1, 0.5));
  if (!stable.ok()) return stable.status();
  r.measured = unstable->iterations;
  r.tolerance = 10000;
  r.passed = unstable->diverged && !stable->diverged &&
             std::isfinite(stable->max_trace);
  r.detail =
      absl::StrCat("M=1.01*threshold diverged=", unstable->diverged, " after ",
                   unstable->iterations, " iterations; M=0.5 max trace ",
                   FormatDouble(stable->max_trace));
  return absl::OkStatus();
}

absl::Status CheckTransitionExactness(Rng& rng, CheckResult& r) {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Matrix b = RandomMatrix(rng, 3, 3, 1.0);
    const Matrix q = b * b.transpose();
    absl::StatusOr<QuadraticObjective> obj =
        QuadraticObjective::Create(q, RandomVector(rng, 3, 1.0));
    if (!obj.ok()) return obj.status();
    const double eta = Uniform(rng, 0.1, 0.95) / obj->MaxEigenvalue();
    const int steps = 1 + static_cast<int>(UniformUnit(rng) * 10);
    absl::StatusOr<InnovationTransition> tr =
        ComputeInnovationTransition(*obj, eta, steps);
    if (!tr.ok()) return tr.status();
    const ModelVector server_prev = RandomVector(rng, 3, 2.0);
    absl::StatusOr<ModelVector> xi_prev =
        LocalUpdate(server_prev, *obj, eta, steps);
    if (!xi_prev.ok()) return xi_prev.status();
    const ModelVector zeta = RandomVector(rng, 3, 1.0);
    const ModelVector server_now = server_prev + *xi_prev + zeta;
    absl::StatusOr<ModelVector> xi = LocalUpdate(server_now, *obj, eta, steps);
    if (!xi.ok()) return xi.status();
    const ModelVector predicted = tr->a * *xi_prev + tr->b * zeta;
    worst = std::max(worst, (*xi - predicted).norm() / (1.0 + xi->norm()));
  }
  r.measured = worst;
  r.tolerance = 1e-10;
  r.passed = worst <= r.tolerance;
  r.detail = "max relative residual over 50 random d=3 quadratics";
  return absl::OkStatus();
}

// Largest bound_t - exact_t over t < horizon, and the violating rounds.
absl::StatusOr<std::pair<double, std::vector<int>>> BoundViolation(
    const Scenario& s, bool accumulated) {
  absl::StatusOr<ExactProtection> exact = BruteForceProtection(s);
  if (!exact.ok()) return exact.status();
  absl::StatusOr<BoundSeries> bound =
      ComputeProtectionBound(MakeBoundInputs(s, 0));
  if (!bound.ok()) return bound.status();
  const std::vector<double>& values =
      accumulated ? bound->accumulated_bound : bound->bound;
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<int> rounds;
  for (int t = 0; t < s.horizon; ++t) {
    const double gap = values[t] - exact->value[t];
    worst = std::max(worst, gap);
    if (gap > 1e-9) rounds.push_back(t);
  }
  return std::make_pair(worst, rounds);
}

absl::Status CheckLowerBound(Rng& rng, CheckResult& r, bool accumulated) {
  std::vector<Scenario> scenarios = {ReferenceScenario(13)};
  for (int i = 0; i < 10; ++i) {
    scenarios.push_back(RandomScripted(rng, 1 + i % 2, 10));
  }
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
  for (size_t i = 0; i < scenarios.size(); ++i) {
    absl::StatusOr<std::pair<double, std::vector<int>>> v =
        BoundViolation(scenarios[i], accumulated);
    if (!v.ok()) return v.status();
    worst = std::max(worst, v->first);
    if (!v->second.empty()) {
      notes.push_back(absl::StrCat("scenario ", i, " rounds {",
                                   absl::StrJoin(v->second, ","), "}"));
    }
  }
  r.measured = worst;
  r.tolerance = 1e-9;
  r.passed = worst <= r.tolerance;
  r.detail = notes.empty() ? "bound below exact value in all 11 scenarios"
                           : absl::StrCat("bound exceeds exact value: ",
                                          absl::StrJoin(notes, "; "));
  return absl::OkStatus();
}

absl::Status CheckVt(Rng& rng, CheckResult& r, VtForm form) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Scenario s = RandomScripted(rng, 1 + i, 9);
    absl::StatusOr<BoundSeries> series =
        ComputeProtectionBound(MakeBoundInputs(s, 0));
    if (!series.ok()) return series.status();
    for (int t = 0; t <= 8; ++t) {
      absl::StatusOr<VtResult> vt = ComputeVt(series->s[t], series->r[t], s.xi,
                                              s.p, s.gamma, s.m, t, form);
      if (!vt.ok()) return vt.status();
      absl::StatusOr<ForcingMoments> exact = EnumerateForcingMoments(s, t);
      if (!exact.ok()) return exact.status();
      worst = std::max(worst, std::abs(vt->trace - exact->top_left_trace));
    }
  }
  r.measured = worst;
  r.tolerance = 1e-9;
  r.passed = worst <= r.tolerance;
  r.detail = "max |tr V_t - enumerated trace| over 3 scenarios, t <= 8";
  return absl::OkStatus();
}

Scenario PerfectEavesdropScenario(Rng& rng, double p, int horizon) {
  Scenario s = RandomScripted(rng, 2, horizon);
  s.p = p;
  s.force_mu_one = true;
  return s;
}

absl::Status CheckPerfectEavesdropExact(Rng& rng, CheckResult& r) {
  double worst = 0.0;
  for (double p : {0.3, 0.7}) {
    const Scenario s = PerfectEavesdropScenario(rng, p, 12);
    absl::StatusOr<ExactProtection> exact = BruteForceProtection(s);
    if (!exact.ok()) return exact.status();
    absl::StatusOr<PerfectEavesdropSeries> closed = PerfectEavesdropProtection(
        Residuals(s), p, s.client_init, s.adversary_init, s.horizon);
    if (!closed.ok()) return closed.status();
    for (int t = 0; t <= s.horizon; ++t) {
      worst = std::max(worst, std::abs(exact->value[t] - closed->value[t]));
    }
  }
  r.measured = worst;
  r.tolerance = 1e-9;
  r.passed = worst <= r.tolerance;
  r.detail = "max |enumerated - closed form|, p in {0.3, 0.7}, horizon 12";
  return absl::OkStatus();
}

absl::Status CheckPerfectEavesdropMonteCarlo(Rng& rng, CheckResult& r,
                                             uint64_t seed) {
  constexpr int kTrials = 20000;
  double worst = 0.0;
  for (double p : {0.3, 0.7}) {
    const Scenario s = PerfectEavesdropScenario(rng, p, 50);
    absl::StatusOr<ProtectionEstimate> mc =
        MonteCarloProtection(s, kTrials, seed);
    if (!mc.ok()) return mc.status();
    absl::StatusOr<PerfectEavesdropSeries> closed = PerfectEavesdropProtection(
        Residuals(s), p, s.client_init, s.adversary_init, s.horizon);
    if (!closed.ok()) return closed.status();
    for (int t = 0; t <= s.horizon; ++t) {
      const double diff = std::abs(mc->mean[t] - closed->value[t]);
      const double se = mc->standard_error[t];
      if (se > 0.0) {
        worst = std::max(worst, diff / se);
      } else if (diff > 1e-12) {
        worst = std::numeric_limits<double>::infinity();
      }
    }
  }
  r.measured = worst;
  r.tolerance = 3.0;
  r.passed = worst <= r.tolerance;
  r.detail = absl::StrCat("max |MC - closed form| in standard errors, ",
                          kTrials, " trials, horizon 50");
  return absl::OkStatus();
}

absl::Status CheckDriftIdentity(Rng& rng, CheckResult& r) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + i % 3;
    const int horizon = 1 + static_cast<int>(UniformUnit(rng) * 30);
    std::vector<ModelVector> xi;
    for (int t = 0; t < horizon; ++t) xi.push_back(RandomVector(rng, d, 1.0));
    const double p = UniformUnit(rng);
    const Matrix m = RandomMatrix(rng, d, d, 1.0);
    for (int t = 0; t < horizon; ++t) {
      worst = std::max(worst, (InnovationDrift(xi, p, m, t) -
                               ExpandedInnovationDrift(xi, p, m, t))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  r.measured = worst;
  r.tolerance = 1e-12;
  r.passed = worst <= r.tolerance;
  r.detail = "max elementwise difference over 100 random histories";
  return absl::OkStatus();
}

absl::Status CheckFlopZeroProtection(Rng&, CheckResult& r, uint64_t seed) {
  RunConfig c;
  c.protocol = Protocol::kFlop;
  c.gamma = 0.1;
  c.horizon = 200;
  c.horizon_set = true;
  if (absl::Status s = FinalizeConfig(c); !s.ok()) return s;
  absl::StatusOr<Scenario> s = BuildScenario(c);
  if (!s.ok()) return s.status();
  absl::StatusOr<ProtectionEstimate> mc = MonteCarloProtection(*s, 1000, seed);
  if (!mc.ok()) return mc.status();
  r.measured = mc->final_zero_fraction;
  r.tolerance = 0.999;
  r.passed = r.measured >= r.tolerance;
  r.detail = absl::StrCat(
      "fraction of 1000 trials with zero final error; "
      "final mean ",
      FormatDouble(mc->mean.back()));
  return absl::OkStatus();
}

absl::Status CheckCrossTerm(Rng&, CheckResult& r, uint64_t seed) {
  const Scenario s = ReferenceScenario(10);
  double worst = 0.0;
  for (int t = 0; t < s.horizon; ++t) {
    absl::StatusOr<ForcingMoments> f = EnumerateForcingMoments(s, t);
    if (!f.ok()) return f.status();
    worst = std::max(worst, f->cross_term.norm());
  }
  absl::StatusOr<CrossTermEstimate> probe = CrossTermProbe(s, 20000, seed);
  if (!probe.ok()) return probe.status();
  const int quiet = static_cast<int>(
      std::count(probe->within_noise.begin(), probe->within_noise.end(), true));
  r.measured = worst;
  r.tolerance = 0.0;
  r.passed = true;
  r.detail = absl::StrCat("largest exact ||E[A sigma~ v^T]|| over t < 10; ",
                          "Monte Carlo within 3 stderr of zero in ", quiet, "/",
                          s.horizon, " rounds");
  return absl::OkStatus();
}

}  // namespace

std::vector<CheckResult> RunVerifyChecks(const RunConfig& config) {
  const uint64_t seed = config.seed;
  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, bool info, uint64_t index,
                 const CheckFn& fn) {
    out.push_back(RunCheck(name, info, DeriveSeed(seed, index), fn));
  };
  add("operator_l_matches_enumeration", false, 1, CheckOperatorL);
  add("stability_threshold_divergence", false, 2, CheckStability);
  add("innovation_transition_exact", false, 3, CheckTransitionExactness);
  add("drift_identity", false, 4, CheckDriftIdentity);
  add("lower_bound_below_exact", false, 5,
      [](Rng& rng, CheckResult& r) { return CheckLowerBound(rng, r, false); });
  add("vt_matches_enumeration", false, 6, [](Rng& rng, CheckResult& r) {
    return CheckVt(rng, r, VtForm::kPropagated);
  });
  add("perfect_eavesdrop_matches_enumeration", false, 7,
      CheckPerfectEavesdropExact);
  add("perfect_eavesdrop_matches_monte_carlo", false, 8,
      [seed](Rng& rng, CheckResult& r) {
        return CheckPerfectEavesdropMonteCarlo(rng, r, DeriveSeed(seed, 108));
      });
  add("flop_zero_protection", false, 9, [seed](Rng& rng, CheckResult& r) {
    return CheckFlopZeroProtection(rng, r, DeriveSeed(seed, 109));
  });
  add("vt_unpropagated_form_vs_enumeration", true, 6,
      [](Rng& rng, CheckResult& r) {
        absl::Status s = CheckVt(rng, r, VtForm::kAsPublished);
        r.passed = true;
        return s;
      });
  add("accumulated_bound_below_exact", true, 5, [](Rng& rng, CheckResult& r) {
    absl::Status s = CheckLowerBound(rng, r, true);
    r.passed = true;
    return s;
  });
  add("cross_term", true, 10, [seed](Rng& rng, CheckResult& r) {
    return CheckCrossTerm(rng, r, DeriveSeed(seed, 110));
  });
  return out;
}

bool CmdVerify(const RunConfig& config, bool json, std::ostream& out) {
  const std::vector<CheckResult> results = RunVerifyChecks(config);
  bool all_passed = true;
  for (const CheckResult& r : results) {
    if (!r.informational && !r.passed) all_passed = false;
  }
  if (json) {
    nlohmann::json report;
    report["schema"] = "flprotect-verify v1";
    report["seed"] = config.seed;
    report["passed"] = all_passed;
    nlohmann::json checks = nlohmann::json::array();
    for (const CheckResult& r : results) {
      checks.push_back({
          {"name", r.name},
          {"status", r.informational ? "INFO" : (r.passed ? "PASS" : "FAIL")},
          {"measured", std::isfinite(r.measured) ? nlohmann::json(r.measured)
                                                 : nlohmann::json(nullptr)},
          {"tolerance", r.tolerance},
          {"detail", r.detail},
          {"seconds", r.seconds},
      });
    }
    report["checks"] = std::move(checks);
    out << report.dump(2) << '\n';
  } else {
    for (const CheckResult& r : results) {
      out << (r.informational ? "INFO" : (r.passed ? "PASS" : "FAIL")) << ' '
          << r.name << " measured=" << FormatDouble(r.measured)
          << " tolerance=" << FormatDouble(r.tolerance) << " ("
          << absl::StrFormat("%.2f", r.seconds) << "s) " << r.detail << '\n';
    }
    out << (all_passed ? "all checks passed" : "some checks FAILED") << '\n';
  }
  return all_passed;
}

absl::StatusOr<std::vector<double>> ParseGrid(absl::string_view text) {
  std::vector<double> grid;
  std::vector<absl::string_view> range = absl::StrSplit(text, ':');
  if (range.size() == 3) {
    double start, stop, step;
    if (!absl::SimpleAtod(range[0], &start) ||
        !absl::SimpleAtod(range[1], &stop) ||
        !absl::SimpleAtod(range[2], &step) || !(step > 0.0) ||
        !std::isfinite(start) || !std::isfinite(stop) || stop < start) {
      return absl::InvalidArgumentError(
          absl::StrCat("grid: bad range '", text, "' (start:stop:step)"));
    }
    const int count =
        static_cast<int>(std::floor((stop - start) / step + 1e-9));
    if (count > 100000) {
      return absl::InvalidArgumentError("grid: more than 100000 points");
    }
    for (int i = 0; i <= count; ++i) {
      grid.push_back(std::round((start + i * step) * 1e12) / 1e12);
    }
    return grid;
  }
  if (range.size() != 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("grid: bad range '", text, "' (start:stop:step)"));
  }
  for (absl::string_view token : absl::StrSplit(text, ',')) {
    double v;
    if (!absl::SimpleAtod(token, &v) || !std::isfinite(v)) {
      return absl::InvalidArgumentError(
          absl::StrCat("grid: bad value '", token, "'"));
    }
    grid.push_back(v);
  }
  return grid;
}

absl::Status CmdSweep(const RunConfig& config, SweepParameter parameter,
                      const std::vector<double>& grid, std::ostream& out,
                      std::ostream& err) {
  absl::StatusOr<Scenario> scenario = BuildScenario(config);
  if (!scenario.ok()) return scenario.status();
  const Scenario& s = *scenario;
  MonteCarloOptions options;
  options.tail_window = config.tail_window;
  absl::StatusOr<std::vector<SweepRow>> rows =
      ProtectionSweep(s, parameter, grid, config.trials, config.seed, options);
  if (!rows.ok()) return rows.status();

  absl::StatusOr<std::unique_ptr<OutputTarget>> target =
      OutputTarget::Open(config.out, out);
  if (!target.ok()) return target.status();
  CsvWriter csv((*target)->stream());
  csv.Comment(RunDescription("sweep", config, s));
  if (parameter == SweepParameter::kP && s.mode == ScenarioMode::kScripted) {
    absl::StatusOr<OptimalParticipation> best = OptimalParticipationProbability(
        Residuals(s), s.client_init, s.adversary_init, s.horizon);
    if (!best.ok()) return best.status();
    csv.Comment(absl::StrCat(
        "perfect_eavesdrop_optimal_p=", FormatDouble(best->p_star),
        " value=", FormatDouble(best->value), " flat=", best->flat ? 1 : 0));
  }
  for (const SweepRow& row : *rows) {
    if (!row.stability_satisfied) {
      err << "warning: " << SweepParameterName(parameter) << "="
          << FormatDouble(row.value)
          << " violates the stability threshold on M\n";
    }
  }
  csv.Header({"param", "value", "mc_tail_mean", "mc_tail_stderr", "mc_tail_min",
              "bound_tail", "eq13_tail", "lemma1_satisfied"});
  for (const SweepRow& row : *rows) {
    csv.Cell(SweepParameterName(parameter)).Cell(row.value);
    csv.Cell(row.mc_tail_mean).Cell(row.mc_tail_stderr).Cell(row.mc_tail_min);
    csv.Cell(row.bound_tail)
        .Cell(row.perfect_eavesdrop_tail)
        .Cell(row.stability_satisfied);
    if (absl::Status st = csv.EndRow(); !st.ok()) return st;
  }
  return (*target)->Close();
}

namespace {

std::string FlagHelp(const std::string& key) {
  static const auto* const kHelp = new std::map<std::string, std::string>{
      {"protocol", "flip or flop"},
      {"N", "number of clients"},
      {"n", "clients sampled per round"},
      {"p", "participation probability; sets n = p * N"},
      {"gamma", "eavesdropping probability"},
      {"eta", "local learning rate"},
      {"steps", "local gradient steps per round"},
      {"horizon", "number of rounds"},
      {"d", "model dimension (full-FL mode)"},
      {"M-scalar", "adversary transition M = c * I"},
      {"M-diag", "comma-separated diagonal of M"},
      {"M-file", "CSV file holding M, one row per line"},
      {"seed", "root seed of the Monte Carlo trials"},
      {"trials", "Monte Carlo trials"},
      {"tail-window", "rounds in the tail average; 0 for the last 25%"},
      {"out", "write CSV here instead of stdout"},
      {"flop-memory", "innovation or model-proxy"},
      {"script-xi", "CSV of xi_t rows; selects scripted mode"},
      {"script-zeta", "CSV of zeta_t rows"},
      {"script-zeta-hat", "CSV of the adversary's zeta_t estimates"},
      {"objective-seed", "seed of the generated client objectives"},
      {"curvature-min", "smallest Hessian eigenvalue"},
      {"curvature-max", "largest Hessian eigenvalue"},
      {"heterogeneity", "spread of client minimizers"},
      {"center-scale", "scale of the shared minimizer"},
      {"shared-curvature", "all clients share one Hessian (true/false)"},
      {"diagonal-hessian", "diagonal Hessians (true/false)"},
      {"server-init", "value of every entry of the initial server model"},
      {"client-init", "value of every entry of the initial client model"},
      {"adversary-init",
       "value of every entry of the initial adversary estimate"},
  };
  const auto it = kHelp->find(key);
  return it == kHelp->end() ? std::string() : it->second;
}

// Config-key flags shared by every subcommand.
struct CommonFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool force_mu_one = false;

  void Register(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file");
    for (const std::string& key : ConfigKeys()) {
      if (key == "force-mu-one") {
        app->add_flag("--force-mu-one", force_mu_one,
                      "intercept every uplink of a participating client");
        continue;
      }
      app->add_option("--" + key, values[key], FlagHelp(key));
    }
  }

  // Config file first, then flags.
  absl::StatusOr<RunConfig> Resolve(CLI::App* app) const {
    RunConfig config;
    if (!config_path.empty()) {
      if (absl::Status s = ApplyConfigFile(config, config_path); !s.ok()) {
        return s;
      }
    }
    for (const std::string& key : ConfigKeys()) {
      if (key == "force-mu-one") {
        if (force_mu_one) config.force_mu_one = true;
        continue;
      }
      if (app->count("--" + key) == 0) continue;
      if (absl::Status s = ApplyConfigValue(config, key, values.at(key));
          !s.ok()) {
        return s;
      }
    }
    if (absl::Status s = FinalizeConfig(config); !s.ok()) return s;
    return config;
  }
};

int ReportError(const absl::Status& status, std::ostream& err) {
  err << "error: " << status.message() << '\n';
  return status.code() == absl::StatusCode::kInvalidArgument ||
                 status.code() == absl::StatusCode::kNotFound
             ? kExitUsage
             : kExitFailure;
}

}  // namespace

int RunCli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{
      "Protection of federated-learning clients against an "
      "eavesdropping adversary"};
  app.name("flprotect");
  app.require_subcommand(1);

  CommonFlags simulate_flags, bound_flags, verify_flags, sweep_flags;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo protection per round");
  simulate_flags.Register(simulate);
  CLI::App* bound =
      app.add_subcommand("bound", "per-round protection lower bound");
  bound_flags.Register(bound);
  CLI::App* verify =
      app.add_subcommand("verify", "cross-check closed forms against oracles");
  verify_flags.Register(verify);
  bool json = false;
  verify->add_flag("--json", json, "JSON report");
  CLI::App* sweep =
      app.add_subcommand("sweep", "tail protection over a parameter grid");
  sweep_flags.Register(sweep);
  std::string param = "p";
  std::string grid_text;
  sweep->add_option("--param", param, "p, gamma or M_scale");
  sweep->add_option("--grid", grid_text, "a,b,c or start:stop:step")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (simulate->parsed()) {
    absl::StatusOr<RunConfig> config = simulate_flags.Resolve(simulate);
    if (!config.ok()) return ReportError(config.status(), err);
    absl::Status s = CmdSimulate(*config, out, err);
    return s.ok() ? kExitOk : ReportError(s, err);
  }
  if (bound->parsed()) {
    absl::StatusOr<RunConfig> config = bound_flags.Resolve(bound);
    if (!config.ok()) return ReportError(config.status(), err);
    absl::Status s = CmdBound(*config, out, err);
    return s.ok() ? kExitOk : ReportError(s, err);
  }
  if (verify->parsed()) {
    absl::StatusOr<RunConfig> config = verify_flags.Resolve(verify);
    if (!config.ok()) return ReportError(config.status(), err);
    return CmdVerify(*config, json, out) ? kExitOk : kExitFailure;
  }
  absl::StatusOr<RunConfig> config = sweep_flags.Resolve(sweep);
  if (!config.ok()) return ReportError(config.status(), err);
  absl::StatusOr<SweepParameter> parameter = ParseSweepParameter(param);
  if (!parameter.ok()) return ReportError(parameter.status(), err);
  absl::StatusOr<std::vector<double>> grid = ParseGrid(grid_text);
  if (!grid.ok()) return ReportError(grid.status(), err);
  absl::Status s = CmdSweep(*config, *parameter, *grid, out, err);
  return s.ok() ? kExitOk : ReportError(s, err);
}

}  // namespace flprotect
