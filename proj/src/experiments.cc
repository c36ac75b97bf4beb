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

#include "flprotect/experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>
#include <utility>

#include "absl/strings/str_cat.h"
#include "flprotect/analysis.h"
#include "flprotect/enumeration.h"

namespace flprotect {
namespace {

constexpr int kChunkSize = 256;

bool IsProbability(double x) { return x >= 0.0 && x <= 1.0; }

absl::Status CheckSequence(const std::vector<ModelVector>& seq, int horizon,
                           int dim, absl::string_view name) {
  if (static_cast<int>(seq.size()) != horizon) {
    return absl::InvalidArgumentError(absl::StrCat(
        "scenario: ", name, " has ", seq.size(), " rows, expected ", horizon));
  }
  for (int t = 0; t < horizon; ++t) {
    if (seq[t].size() != dim) {
      return absl::InvalidArgumentError(
          absl::StrCat("scenario: ", name, "[", t, "] has dimension ",
                       seq[t].size(), ", expected ", dim));
    }
    if (!seq[t].allFinite()) {
      return absl::InvalidArgumentError(
          absl::StrCat("scenario: ", name, "[", t, "] is not finite"));
    }
  }
  return absl::OkStatus();
}

// Running mean and sum of squared deviations for a fixed-length vector of
// observables. Merging is order dependent in floating point, so callers
// merge in a fixed order.
struct MomentAccumulator {
  int64_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;
  int64_t events = 0;

  explicit MomentAccumulator(size_t size = 0)
      : mean(size, 0.0), m2(size, 0.0) {}

  void Add(std::span<const double> x) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  void Merge(const MomentAccumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    for (size_t i = 0; i < mean.size(); ++i) {
      const double delta = other.mean[i] - mean[i];
      mean[i] += delta * nb / n;
      m2[i] += other.m2[i] + delta * delta * na * nb / n;
    }
    count += other.count;
    events += other.events;
  }

  double StandardError(size_t i) const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    return std::sqrt(std::max(0.0, m2[i]) / (n - 1.0) / n);
  }
};

// Splits [0, trials) into fixed chunks, runs them on `threads` workers and
// merges the per-chunk results in chunk order.
absl::StatusOr<MomentAccumulator> ChunkedReduce(
    int trials, int threads, size_t width,
    const std::function<absl::Status(int, MomentAccumulator&)>& run_trial) {
  const int chunks = (trials + kChunkSize - 1) / kChunkSize;
  std::vector<MomentAccumulator> partial(chunks, MomentAccumulator(width));
  std::vector<absl::Status> status(chunks);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      const int end = std::min(trials, (c + 1) * kChunkSize);
      for (int i = c * kChunkSize; i < end; ++i) {
        status[c] = run_trial(i, partial[c]);
        if (!status[c].ok()) break;
      }
    }
  };
  const int workers = std::max(1, std::min(threads, chunks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  MomentAccumulator total(width);
  for (int c = 0; c < chunks; ++c) {
    if (!status[c].ok()) return status[c];
    total.Merge(partial[c]);
  }
  return total;
}

}  // namespace

absl::Status Scenario::Validate() const {
  const int d = dim();
  if (horizon < 1) {
    return absl::InvalidArgumentError("scenario: horizon must be at least 1");
  }
  if (d < 1) {
    return absl::InvalidArgumentError("scenario: dimension must be positive");
  }
  if (adversary_init.size() != d || !client_init.allFinite() ||
      !adversary_init.allFinite()) {
    return absl::InvalidArgumentError(
        "scenario: client and adversary initial models must be finite and of "
        "equal dimension");
  }
  if (!IsProbability(p)) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: p must lie in [0, 1], got ", p));
  }
  if (!IsProbability(gamma)) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: gamma must lie in [0, 1], got ", gamma));
  }
  if (m.rows() != d || m.cols() != d || !m.allFinite()) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: M must be a finite ", d, "x", d, " matrix"));
  }
  if (!zeta_hat.empty()) {
    if (absl::Status s = CheckSequence(zeta_hat, horizon, d, "zeta_hat");
        !s.ok()) {
      return s;
    }
  }
  if (mode == ScenarioMode::kScripted) {
    if (absl::Status s = CheckSequence(xi, horizon, d, "xi"); !s.ok()) {
      return s;
    }
    return CheckSequence(zeta, horizon, d, "zeta");
  }
  const FederationSetup& fed = federation;
  if (fed.num_clients < 1) {
    return absl::InvalidArgumentError("scenario: N must be at least 1");
  }
  if (fed.num_sampled < 0 || fed.num_sampled > fed.num_clients) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: n must lie in [0, N], got n=", fed.num_sampled,
                     " N=", fed.num_clients));
  }
  if (p != static_cast<double>(fed.num_sampled) / fed.num_clients) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: p (", p, ") must equal n/N = ", fed.num_sampled,
                     "/", fed.num_clients));
  }
  if (fed.local_steps < 1) {
    return absl::InvalidArgumentError("scenario: steps must be at least 1");
  }
  if (static_cast<int>(fed.objectives.size()) != fed.num_clients) {
    return absl::InvalidArgumentError(
        absl::StrCat("scenario: ", fed.objectives.size(),
                     " objectives for N=", fed.num_clients, " clients"));
  }
  for (int i = 0; i < fed.num_clients; ++i) {
    if (fed.objectives[i].dim() != d) {
      return absl::InvalidArgumentError(
          absl::StrCat("scenario: objective ", i, " has dimension ",
                       fed.objectives[i].dim(), ", expected ", d));
    }
    if (absl::Status s = fed.objectives[i].CheckLearningRate(fed.eta);
        !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("scenario: client ", i, ": ", s.message()));
    }
  }
  if (fed.server_init.size() != d || !fed.server_init.allFinite()) {
    return absl::InvalidArgumentError(
        "scenario: server initial model must be finite with dimension d");
  }
  return absl::OkStatus();
}

TrialSimulator::TrialSimulator(const Scenario& scenario, uint64_t seed)
    : scenario_(&scenario),
      rng_(seed),
      client_(scenario.client_init),
      adversary_(AdversaryState::Initial(scenario.adversary_init, scenario.m)) {
  if (scenario.mode == ScenarioMode::kFullFl) {
    const FederationSetup& fed = scenario.federation;
    server_ = fed.server_init;
    others_.assign(fed.num_clients - 1, fed.server_init);
    pool_.resize(fed.num_clients - 1);
    for (int i = 0; i < fed.num_clients - 1; ++i) pool_[i] = i;
  }
}

absl::StatusOr<TrialSimulator> TrialSimulator::Create(const Scenario& scenario,
                                                      uint64_t seed) {
  if (absl::Status s = scenario.Validate(); !s.ok()) return s;
  return TrialSimulator(scenario, seed);
}

absl::Status TrialSimulator::StepScripted(RoundTrace& trace) {
  const int t = round_;
  trace.xi = scenario_->xi[t];
  trace.zeta = scenario_->zeta[t];
  ModelVector next = client_;
  if (trace.delta) {
    next += scenario_->xi[t] + scenario_->zeta[t];
    trace.uplink =
        scenario_->protocol == Protocol::kFlip ? scenario_->xi[t] : next;
  }
  if (absl::Status s = StepAdversary(trace, next); !s.ok()) return s;
  client_ = std::move(next);
  return absl::OkStatus();
}

absl::Status TrialSimulator::StepFederation(RoundTrace& trace) {
  const FederationSetup& fed = scenario_->federation;
  const Protocol protocol = scenario_->protocol;
  trace.zeta = server_ - client_;

  // The target's participation is the delta draw; the remaining seats go to
  // a uniform sample of the other clients.
  const int pool_size = static_cast<int>(pool_.size());
  const int others =
      std::clamp(fed.num_sampled - (trace.delta ? 1 : 0), 0, pool_size);
  for (int i = 0; i < others; ++i) {
    const int span = pool_size - i;
    const int j =
        i + std::min(span - 1, static_cast<int>(UniformUnit(rng_) * span));
    std::swap(pool_[i], pool_[j]);
  }

  std::vector<ModelVector> uplinks;
  uplinks.reserve(others + 1);
  ModelVector next = client_;
  if (trace.delta) {
    absl::StatusOr<ClientRoundResult> mine =
        ClientRound(client_, server_, true, fed.objectives[0], fed.eta,
                    fed.local_steps, protocol);
    if (!mine.ok()) return mine.status();
    next = mine->new_client_model;
    trace.xi = mine->innovation;
    trace.uplink = mine->uplink;
    uplinks.push_back(*mine->uplink);
  }
  for (int i = 0; i < others; ++i) {
    const int k = pool_[i];
    absl::StatusOr<ClientRoundResult> theirs =
        ClientRound(others_[k], server_, true, fed.objectives[k + 1], fed.eta,
                    fed.local_steps, protocol);
    if (!theirs.ok()) return theirs.status();
    others_[k] = theirs->new_client_model;
    uplinks.push_back(*theirs->uplink);
  }
  absl::StatusOr<ModelVector> server = ServerRound(server_, uplinks, protocol);
  if (!server.ok()) return server.status();

  if (absl::Status s = StepAdversary(trace, next); !s.ok()) return s;
  server_ = *std::move(server);
  client_ = std::move(next);
  return absl::OkStatus();
}

absl::Status TrialSimulator::StepAdversary(const RoundTrace& trace,
                                           const ModelVector& new_client) {
  const bool seen = trace.delta && trace.mu;
  const ModelVector zeta_hat = scenario_->zeta_hat.empty()
                                   ? ModelVector::Zero(client_.size())
                                   : scenario_->zeta_hat[round_];
  absl::StatusOr<AdversaryState> next;
  if (scenario_->protocol == Protocol::kFlip) {
    next = AdversaryStepFlip(adversary_, trace.delta, trace.mu,
                             seen ? trace.xi : std::nullopt, zeta_hat);
  } else {
    next = AdversaryStepFlop(
        adversary_, trace.delta, trace.mu,
        seen ? std::optional<ModelVector>(new_client) : std::nullopt,
        seen ? trace.xi : std::nullopt, zeta_hat, scenario_->flop_memory);
  }
  if (!next.ok()) return next.status();
  adversary_ = *std::move(next);
  return absl::OkStatus();
}

absl::StatusOr<RoundTrace> TrialSimulator::Step() {
  if (round_ >= scenario_->horizon) {
    return absl::OutOfRangeError(
        absl::StrCat("trial already ran all ", scenario_->horizon, " rounds"));
  }
  RoundTrace trace;
  trace.t = round_;
  const RoundDraw draw =
      SampleRoundRandomness(rng_, scenario_->p, scenario_->gamma);
  trace.delta = draw.delta;
  trace.mu = draw.delta && (draw.mu || scenario_->force_mu_one);
  trace.client_model = client_;
  trace.error_sq = error_sq();

  absl::Status status = scenario_->mode == ScenarioMode::kScripted
                            ? StepScripted(trace)
                            : StepFederation(trace);
  if (!status.ok()) {
    return absl::Status(status.code(),
                        absl::StrCat("round ", round_, ": ", status.message()));
  }
  if (!client_.allFinite() || !adversary_.estimate.allFinite()) {
    return absl::InternalError(
        absl::StrCat("trial diverged at round ", round_));
  }
  ++round_;
  return trace;
}

absl::StatusOr<TrialTrace> RunTrial(const Scenario& scenario, uint64_t seed) {
  absl::StatusOr<TrialSimulator> sim = TrialSimulator::Create(scenario, seed);
  if (!sim.ok()) return sim.status();
  TrialTrace out;
  out.rounds.reserve(scenario.horizon);
  for (int t = 0; t < scenario.horizon; ++t) {
    absl::StatusOr<RoundTrace> round = sim->Step();
    if (!round.ok()) return round.status();
    out.rounds.push_back(*std::move(round));
  }
  out.final_error_sq = sim->error_sq();
  return out;
}

int ResolveThreadCount(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FLPROTECT_THREADS"); env != nullptr) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) {
      return static_cast<int>(std::min(value, 1024L));
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

absl::StatusOr<ProtectionEstimate> MonteCarloProtection(
    const Scenario& scenario, int trials, uint64_t root_seed,
    const MonteCarloOptions& options) {
  if (trials < 1) {
    return absl::InvalidArgumentError("trials must be at least 1");
  }
  if (absl::Status s = scenario.Validate(); !s.ok()) return s;
  const int rounds = scenario.horizon + 1;
  const int window = options.tail_window > 0
                         ? std::min(options.tail_window, rounds)
                         : DefaultTailWindow(rounds);
  // Slots: error at t = 0..horizon, then the per-trial tail average.
  const size_t width = rounds + 1;

  auto run = [&](int index, MomentAccumulator& acc) -> absl::Status {
    absl::StatusOr<TrialSimulator> sim =
        TrialSimulator::Create(scenario, DeriveSeed(root_seed, index));
    if (!sim.ok()) return sim.status();
    std::vector<double> row(width, 0.0);
    for (int t = 0; t < scenario.horizon; ++t) {
      row[t] = sim->error_sq();
      absl::StatusOr<RoundTrace> step = sim->Step();
      if (!step.ok()) {
        return absl::Status(
            step.status().code(),
            absl::StrCat("trial ", index, ": ", step.status().message()));
      }
    }
    row[rounds - 1] = sim->error_sq();
    double tail = 0.0;
    for (int t = rounds - window; t < rounds; ++t) tail += row[t];
    row[rounds] = tail / window;
    acc.Add(row);
    if (row[rounds - 1] == 0.0) ++acc.events;
    return absl::OkStatus();
  };

  absl::StatusOr<MomentAccumulator> total =
      ChunkedReduce(trials, ResolveThreadCount(options.threads), width, run);
  if (!total.ok()) return total.status();

  ProtectionEstimate out;
  out.trials = trials;
  out.mean.assign(total->mean.begin(), total->mean.begin() + rounds);
  out.standard_error.resize(rounds);
  for (int t = 0; t < rounds; ++t) {
    out.standard_error[t] = total->StandardError(t);
  }
  out.final_zero_count = total->events;
  out.final_zero_fraction = static_cast<double>(total->events) / trials;
  out.tail_window = window;
  out.tail_mean = total->mean[rounds];
  out.tail_standard_error = total->StandardError(rounds);
  return out;
}

absl::StatusOr<CrossTermEstimate> CrossTermProbe(
    const Scenario& scenario, int trials, uint64_t root_seed,
    const MonteCarloOptions& options) {
  if (trials < 1) {
    return absl::InvalidArgumentError("trials must be at least 1");
  }
  if (absl::Status s = scenario.Validate(); !s.ok()) return s;
  if (scenario.mode != ScenarioMode::kScripted ||
      scenario.protocol != Protocol::kFlip) {
    return absl::InvalidArgumentError(
        "cross-term probe needs a scripted FLIP scenario");
  }
  const int d = scenario.dim();
  const int horizon = scenario.horizon;
  const double p = scenario.p;
  const double gamma = scenario.force_mu_one ? 1.0 : scenario.gamma;
  const Matrix& m = scenario.m;

  std::vector<ModelVector> r(horizon);
  for (int t = 0; t < horizon; ++t) {
    r[t] = scenario.zeta_hat.empty()
               ? scenario.zeta[t]
               : ModelVector(scenario.zeta[t] - scenario.zeta_hat[t]);
  }

  // Mean path: sigma-bar_{t+1} = A-bar sigma-bar_t + u-bar_t.
  Matrix a_bar = Matrix::Zero(2 * d, 2 * d);
  a_bar.topLeftCorner(d, d).setIdentity();
  a_bar.topRightCorner(d, d) = p * (1.0 - gamma) * m;
  a_bar.bottomRightCorner(d, d) =
      (1.0 - p) * Matrix::Identity(d, d) + p * (1.0 - gamma) * m;
  std::vector<ModelVector> sigma_bar(horizon), u_bar(horizon);
  ModelVector sb(2 * d);
  sb << scenario.client_init - scenario.adversary_init, ModelVector::Zero(d);
  for (int t = 0; t < horizon; ++t) {
    const ModelVector h = InnovationDrift(scenario.xi, p, m, t);
    ModelVector ub(2 * d);
    ub << p * r[t] + p * (1.0 - gamma) * h, p * (1.0 - gamma) * h;
    sigma_bar[t] = sb;
    u_bar[t] = ub;
    sb = a_bar * sb + ub;
  }

  const int block = 4 * d * d;
  const size_t width = static_cast<size_t>(horizon) * block;
  auto run = [&](int index, MomentAccumulator& acc) -> absl::Status {
    Rng rng(DeriveSeed(root_seed, index));
    std::vector<double> row(width, 0.0);
    ModelVector e = scenario.client_init - scenario.adversary_init;
    ModelVector q = ModelVector::Zero(d);
    int tau = -1;
    for (int t = 0; t < horizon; ++t) {
      const RoundDraw draw =
          SampleRoundRandomness(rng, scenario.p, scenario.gamma);
      const bool delta = draw.delta;
      const bool mu = delta && (draw.mu || scenario.force_mu_one);
      const ModelVector xi_tau =
          tau < 0 ? ModelVector::Zero(d) : scenario.xi[tau];
      const ModelVector w = scenario.xi[t] - m * xi_tau;
      const double miss = delta && !mu ? 1.0 : 0.0;
      ModelVector u(2 * d);
      u << (delta ? 1.0 : 0.0) * r[t] + miss * w, miss * w;
      const Matrix a = JointTransitionMatrix(delta, mu, m);
      ModelVector sigma(2 * d);
      sigma << e, q;
      const ModelVector v = (a - a_bar) * sigma_bar[t] + (u - u_bar[t]);
      const Matrix cross = a * (sigma - sigma_bar[t]) * v.transpose();
      std::copy(cross.data(), cross.data() + block,
                row.begin() + static_cast<size_t>(t) * block);
      const ModelVector next = a * sigma + u;
      e = next.head(d);
      q = next.tail(d);
      if (delta) tau = t;
    }
    acc.Add(row);
    return absl::OkStatus();
  };

  absl::StatusOr<MomentAccumulator> total =
      ChunkedReduce(trials, ResolveThreadCount(options.threads), width, run);
  if (!total.ok()) return total.status();

  CrossTermEstimate out;
  out.trials = trials;
  for (int t = 0; t < horizon; ++t) {
    double norm_sq = 0.0;
    double se_sq = 0.0;
    for (int i = 0; i < block; ++i) {
      const size_t k = static_cast<size_t>(t) * block + i;
      norm_sq += total->mean[k] * total->mean[k];
      const double se = total->StandardError(k);
      se_sq += se * se;
    }
    out.norm.push_back(std::sqrt(norm_sq));
    out.standard_error.push_back(std::sqrt(se_sq));
    out.within_noise.push_back(out.norm.back() <=
                               3.0 * out.standard_error.back());
  }
  return out;
}

absl::StatusOr<SweepParameter> ParseSweepParameter(absl::string_view name) {
  if (name == "p") return SweepParameter::kP;
  if (name == "gamma") return SweepParameter::kGamma;
  if (name == "M_scale" || name == "M-scale") return SweepParameter::kMScale;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown sweep parameter '", name, "' (expected p, gamma or M_scale)"));
}

absl::string_view SweepParameterName(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::kP:
      return "p";
    case SweepParameter::kGamma:
      return "gamma";
    case SweepParameter::kMScale:
      return "M_scale";
  }
  return "unknown";
}

absl::StatusOr<Scenario> ApplySweepValue(const Scenario& base,
                                         SweepParameter parameter,
                                         double value) {
  if (!std::isfinite(value)) {
    return absl::InvalidArgumentError("sweep value must be finite");
  }
  Scenario s = base;
  switch (parameter) {
    case SweepParameter::kP: {
      if (!IsProbability(value)) {
        return absl::InvalidArgumentError(
            absl::StrCat("sweep: p must lie in [0, 1], got ", value));
      }
      if (s.mode == ScenarioMode::kFullFl) {
        const int n_clients = s.federation.num_clients;
        const int n = static_cast<int>(std::lround(value * n_clients));
        if (std::abs(static_cast<double>(n) / n_clients - value) > 1e-12) {
          return absl::InvalidArgumentError(
              absl::StrCat("sweep: p=", value,
                           " is not a multiple of 1/N with N=", n_clients));
        }
        s.federation.num_sampled = n;
        s.p = static_cast<double>(n) / n_clients;
      } else {
        s.p = value;
      }
      break;
    }
    case SweepParameter::kGamma:
      if (!IsProbability(value)) {
        return absl::InvalidArgumentError(
            absl::StrCat("sweep: gamma must lie in [0, 1], got ", value));
      }
      s.gamma = value;
      break;
    case SweepParameter::kMScale:
      s.m = value * base.m;
      break;
  }
  return s;
}

absl::StatusOr<std::vector<SweepRow>> ProtectionSweep(
    const Scenario& base, SweepParameter parameter,
    std::span<const double> grid, int trials, uint64_t root_seed,
    const MonteCarloOptions& options) {
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double value : grid) {
    absl::StatusOr<Scenario> scenario = ApplySweepValue(base, parameter, value);
    if (!scenario.ok()) return scenario.status();
    absl::StatusOr<ProtectionEstimate> mc =
        MonteCarloProtection(*scenario, trials, root_seed, options);
    if (!mc.ok()) return mc.status();
    SweepRow row;
    row.value = value;
    row.mc_tail_mean = mc->tail_mean;
    row.mc_tail_stderr = mc->tail_standard_error;
    row.mc_tail_min = TailMinimum(mc->mean, mc->tail_window);
    absl::StatusOr<StabilityReport> stability =
        CheckTransitionMatrix(scenario->m, scenario->p, scenario->gamma);
    if (!stability.ok()) return stability.status();
    row.stability_satisfied = stability->satisfied;

    if (scenario->mode == ScenarioMode::kScripted) {
      std::vector<ModelVector> r(scenario->horizon);
      for (int t = 0; t < scenario->horizon; ++t) {
        r[t] = scenario->zeta_hat.empty()
                   ? scenario->zeta[t]
                   : ModelVector(scenario->zeta[t] - scenario->zeta_hat[t]);
      }
      absl::StatusOr<PerfectEavesdropSeries> perfect =
          PerfectEavesdropProtection(r, scenario->p, scenario->client_init,
                                     scenario->adversary_init,
                                     scenario->horizon, mc->tail_window);
      if (perfect.ok()) {
        double tail = 0.0;
        const int n = static_cast<int>(perfect->value.size());
        for (int t = n - mc->tail_window; t < n; ++t) tail += perfect->value[t];
        row.perfect_eavesdrop_tail = tail / mc->tail_window;
      }
      if (scenario->p > 0.0) {
        BoundInputs in;
        in.xi = scenario->xi;
        in.zeta = scenario->zeta;
        in.zeta_hat = scenario->zeta_hat;
        in.p = scenario->p;
        in.gamma = scenario->force_mu_one ? 1.0 : scenario->gamma;
        in.m = scenario->m;
        in.client_init = scenario->client_init;
        in.adversary_init = scenario->adversary_init;
        in.horizon = scenario->horizon;
        in.tail_window = std::min(mc->tail_window, scenario->horizon);
        absl::StatusOr<BoundSeries> bound = ComputeProtectionBound(in);
        if (bound.ok()) row.bound_tail = bound->tail_min;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace flprotect
