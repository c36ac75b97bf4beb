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

#include "flprotect/config.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_replace.h"
#include "absl/strings/str_split.h"
#include "flprotect/csv.h"
#include "flprotect/fl_sim.h"

namespace flprotect {
namespace {

absl::Status BadValue(absl::string_view key, absl::string_view value,
                      absl::string_view expected) {
  return absl::InvalidArgumentError(absl::StrCat(
      key, ": invalid value '", value, "' (expected ", expected, ")"));
}

absl::Status ParseReal(absl::string_view key, absl::string_view value,
                       double& out) {
  double parsed;
  if (!absl::SimpleAtod(value, &parsed) || !std::isfinite(parsed)) {
    return BadValue(key, value, "a finite number");
  }
  out = parsed;
  return absl::OkStatus();
}

absl::Status ParseInt(absl::string_view key, absl::string_view value,
                      int& out) {
  int parsed;
  if (!absl::SimpleAtoi(value, &parsed)) {
    return BadValue(key, value, "an integer");
  }
  out = parsed;
  return absl::OkStatus();
}

absl::Status ParseSeed(absl::string_view key, absl::string_view value,
                       uint64_t& out) {
  uint64_t parsed;
  if (!absl::SimpleAtoi(value, &parsed)) {
    return BadValue(key, value, "an unsigned 64-bit integer");
  }
  out = parsed;
  return absl::OkStatus();
}

absl::Status ParseBool(absl::string_view key, absl::string_view value,
                       bool& out) {
  bool parsed;
  if (!absl::SimpleAtob(value, &parsed)) {
    return BadValue(key, value, "true or false");
  }
  out = parsed;
  return absl::OkStatus();
}

absl::Status CheckRows(const std::vector<ModelVector>& rows, int horizon,
                       absl::string_view name) {
  if (static_cast<int>(rows.size()) < horizon) {
    return absl::InvalidArgumentError(absl::StrCat(
        name, ": ", rows.size(), " rows but the horizon is ", horizon));
  }
  return absl::OkStatus();
}

}  // namespace

const std::vector<std::string>& ConfigKeys() {
  static const auto* keys = new std::vector<std::string>{
      "protocol",
      "N",
      "n",
      "p",
      "gamma",
      "eta",
      "steps",
      "horizon",
      "d",
      "M-scalar",
      "M-diag",
      "M-file",
      "seed",
      "trials",
      "force-mu-one",
      "tail-window",
      "out",
      "flop-memory",
      "script-xi",
      "script-zeta",
      "script-zeta-hat",
      "objective-seed",
      "curvature-min",
      "curvature-max",
      "heterogeneity",
      "center-scale",
      "shared-curvature",
      "diagonal-hessian",
      "server-init",
      "client-init",
      "adversary-init",
  };
  return *keys;
}

absl::Status ApplyConfigValue(RunConfig& c, absl::string_view raw_key,
                              absl::string_view raw_value) {
  const std::string key =
      absl::StrReplaceAll(absl::StripAsciiWhitespace(raw_key), {{"_", "-"}});
  const absl::string_view value = absl::StripAsciiWhitespace(raw_value);
  if (key == "protocol") {
    absl::StatusOr<Protocol> protocol = ParseProtocol(value);
    if (!protocol.ok()) return BadValue(key, value, "flip or flop");
    c.protocol = *protocol;
    return absl::OkStatus();
  }
  if (key == "N") return ParseInt(key, value, c.num_clients);
  if (key == "n") return ParseInt(key, value, c.num_sampled);
  if (key == "p") {
    double p = 0.0;
    if (absl::Status s = ParseReal(key, value, p); !s.ok()) return s;
    c.p_request = p;
    return absl::OkStatus();
  }
  if (key == "gamma") return ParseReal(key, value, c.gamma);
  if (key == "eta") return ParseReal(key, value, c.eta);
  if (key == "steps") return ParseInt(key, value, c.local_steps);
  if (key == "horizon") {
    c.horizon_set = true;
    return ParseInt(key, value, c.horizon);
  }
  if (key == "d") {
    c.dim_set = true;
    return ParseInt(key, value, c.dim);
  }
  if (key == "M-scalar") {
    c.m_diagonal.clear();
    c.m_file.clear();
    return ParseReal(key, value, c.m_scalar);
  }
  if (key == "M-diag") {
    c.m_diagonal.clear();
    for (absl::string_view token : absl::StrSplit(value, ',')) {
      double entry;
      if (absl::Status s = ParseReal(key, token, entry); !s.ok()) return s;
      c.m_diagonal.push_back(entry);
    }
    return absl::OkStatus();
  }
  if (key == "M-file") {
    c.m_file = std::string(value);
    return absl::OkStatus();
  }
  if (key == "seed") return ParseSeed(key, value, c.seed);
  if (key == "trials") return ParseInt(key, value, c.trials);
  if (key == "force-mu-one") return ParseBool(key, value, c.force_mu_one);
  if (key == "tail-window") return ParseInt(key, value, c.tail_window);
  if (key == "out") {
    c.out = std::string(value);
    return absl::OkStatus();
  }
  if (key == "flop-memory") {
    if (value == "innovation") {
      c.flop_memory = FlopXiMemory::kInnovation;
    } else if (value == "model-proxy") {
      c.flop_memory = FlopXiMemory::kModelProxy;
    } else {
      return BadValue(key, value, "innovation or model-proxy");
    }
    return absl::OkStatus();
  }
  if (key == "script-xi") {
    c.script_xi = std::string(value);
    return absl::OkStatus();
  }
  if (key == "script-zeta") {
    c.script_zeta = std::string(value);
    return absl::OkStatus();
  }
  if (key == "script-zeta-hat") {
    c.script_zeta_hat = std::string(value);
    return absl::OkStatus();
  }
  if (key == "objective-seed") return ParseSeed(key, value, c.objective_seed);
  if (key == "curvature-min") return ParseReal(key, value, c.curvature_min);
  if (key == "curvature-max") return ParseReal(key, value, c.curvature_max);
  if (key == "heterogeneity") return ParseReal(key, value, c.heterogeneity);
  if (key == "center-scale") return ParseReal(key, value, c.center_scale);
  if (key == "shared-curvature") {
    return ParseBool(key, value, c.shared_curvature);
  }
  if (key == "diagonal-hessian") {
    return ParseBool(key, value, c.diagonal_hessian);
  }
  if (key == "server-init") return ParseReal(key, value, c.server_init);
  if (key == "client-init") {
    double v = 0.0;
    if (absl::Status s = ParseReal(key, value, v); !s.ok()) return s;
    c.client_init = v;
    return absl::OkStatus();
  }
  if (key == "adversary-init") return ParseReal(key, value, c.adversary_init);
  return absl::InvalidArgumentError(
      absl::StrCat("unknown configuration key '", raw_key, "'"));
}

absl::Status ApplyConfigText(RunConfig& config, absl::string_view text) {
  int line_number = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_number;
    if (const size_t hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": expected key = value"));
    }
    if (absl::Status s =
            ApplyConfigValue(config, line.substr(0, eq), line.substr(eq + 1));
        !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_number, ": ", s.message()));
    }
  }
  return absl::OkStatus();
}

absl::Status ApplyConfigFile(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open config file '", path, "'"));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (absl::Status s = ApplyConfigText(config, buffer.str()); !s.ok()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": ", s.message()));
  }
  return absl::OkStatus();
}

absl::Status FinalizeConfig(RunConfig& c) {
  if (c.num_clients < 1) {
    return absl::InvalidArgumentError("N: must be at least 1");
  }
  if (c.p_request.has_value()) {
    const double p = *c.p_request;
    if (p < 0.0 || p > 1.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("p: must lie in [0, 1], got ", p));
    }
    const long n = std::lround(p * c.num_clients);
    if (std::abs(static_cast<double>(n) / c.num_clients - p) > 1e-12) {
      return absl::InvalidArgumentError(absl::StrCat(
          "p: ", p, " is not a multiple of 1/N with N=", c.num_clients,
          "; p is n/N"));
    }
    c.num_sampled = static_cast<int>(n);
    c.p_request.reset();
  }
  if (c.num_sampled < 0 || c.num_sampled > c.num_clients) {
    return absl::InvalidArgumentError(absl::StrCat(
        "n: must lie in [0, N=", c.num_clients, "], got ", c.num_sampled));
  }
  if (c.gamma < 0.0 || c.gamma > 1.0) {
    return absl::InvalidArgumentError(
        absl::StrCat("gamma: must lie in [0, 1], got ", c.gamma));
  }
  if (c.eta <= 0.0) {
    return absl::InvalidArgumentError(
        absl::StrCat("eta: must be positive, got ", c.eta));
  }
  if (c.local_steps < 1) {
    return absl::InvalidArgumentError("steps: must be at least 1");
  }
  if (c.horizon < 1) {
    return absl::InvalidArgumentError("horizon: must be at least 1");
  }
  if (c.dim < 1) return absl::InvalidArgumentError("d: must be at least 1");
  if (c.trials < 1) {
    return absl::InvalidArgumentError("trials: must be at least 1");
  }
  if (c.tail_window < 0) {
    return absl::InvalidArgumentError("tail-window: must be positive");
  }
  if (c.curvature_min < 0.0 || c.curvature_max < c.curvature_min) {
    return absl::InvalidArgumentError(
        "curvature-min/curvature-max: need 0 <= min <= max");
  }
  if (c.heterogeneity < 0.0 || c.center_scale < 0.0) {
    return absl::InvalidArgumentError(
        "heterogeneity and center-scale must be nonnegative");
  }
  if (c.script_xi.empty() && (!c.script_zeta.empty())) {
    return absl::InvalidArgumentError(
        "script-zeta: needs script-xi (scripted mode)");
  }
  return absl::OkStatus();
}

absl::StatusOr<Scenario> BuildScenario(const RunConfig& c) {
  Scenario s;
  s.mode = c.mode();
  s.protocol = c.protocol;
  s.p = c.p();
  s.gamma = c.gamma;
  s.force_mu_one = c.force_mu_one;
  s.flop_memory = c.flop_memory;
  int d = c.dim;
  s.horizon = c.horizon;

  if (s.mode == ScenarioMode::kScripted) {
    absl::StatusOr<std::vector<ModelVector>> xi =
        ReadVectorCsv(c.script_xi, c.dim_set ? c.dim : 0);
    if (!xi.ok()) return xi.status();
    if (xi->empty()) {
      return absl::InvalidArgumentError("script-xi: no rows");
    }
    d = static_cast<int>(xi->front().size());
    if (!c.horizon_set) s.horizon = static_cast<int>(xi->size());
    if (absl::Status st = CheckRows(*xi, s.horizon, "script-xi"); !st.ok()) {
      return st;
    }
    xi->resize(s.horizon);
    s.xi = *std::move(xi);
    if (c.script_zeta.empty()) {
      s.zeta.assign(s.horizon, ModelVector::Zero(d));
    } else {
      absl::StatusOr<std::vector<ModelVector>> zeta =
          ReadVectorCsv(c.script_zeta, d);
      if (!zeta.ok()) return zeta.status();
      if (absl::Status st = CheckRows(*zeta, s.horizon, "script-zeta");
          !st.ok()) {
        return st;
      }
      zeta->resize(s.horizon);
      s.zeta = *std::move(zeta);
    }
  } else {
    ObjectiveGeneratorOptions gen;
    gen.num_clients = c.num_clients;
    gen.dim = d;
    gen.curvature_min = c.curvature_min;
    gen.curvature_max = c.curvature_max;
    gen.shared_curvature = c.shared_curvature;
    gen.diagonal = c.diagonal_hessian;
    gen.center_scale = c.center_scale;
    gen.heterogeneity = c.heterogeneity;
    gen.seed = c.objective_seed;
    absl::StatusOr<std::vector<QuadraticObjective>> objectives =
        GenerateClientObjectives(gen);
    if (!objectives.ok()) return objectives.status();
    s.federation.num_clients = c.num_clients;
    s.federation.num_sampled = c.num_sampled;
    s.federation.eta = c.eta;
    s.federation.local_steps = c.local_steps;
    s.federation.objectives = *std::move(objectives);
    s.federation.server_init = ModelVector::Constant(d, c.server_init);
  }

  if (!c.script_zeta_hat.empty()) {
    absl::StatusOr<std::vector<ModelVector>> zeta_hat =
        ReadVectorCsv(c.script_zeta_hat, d);
    if (!zeta_hat.ok()) return zeta_hat.status();
    if (absl::Status st = CheckRows(*zeta_hat, s.horizon, "script-zeta-hat");
        !st.ok()) {
      return st;
    }
    zeta_hat->resize(s.horizon);
    s.zeta_hat = *std::move(zeta_hat);
  }

  if (!c.m_file.empty()) {
    absl::StatusOr<std::vector<ModelVector>> rows = ReadVectorCsv(c.m_file, d);
    if (!rows.ok()) return rows.status();
    if (static_cast<int>(rows->size()) != d) {
      return absl::InvalidArgumentError(
          absl::StrCat("M-file: ", rows->size(), " rows, expected ", d));
    }
    s.m.resize(d, d);
    for (int i = 0; i < d; ++i) s.m.row(i) = (*rows)[i].transpose();
  } else if (!c.m_diagonal.empty()) {
    if (static_cast<int>(c.m_diagonal.size()) != d) {
      return absl::InvalidArgumentError(absl::StrCat(
          "M-diag: ", c.m_diagonal.size(), " entries, expected ", d));
    }
    s.m = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) s.m(i, i) = c.m_diagonal[i];
  } else {
    s.m = c.m_scalar * Matrix::Identity(d, d);
  }

  s.client_init =
      ModelVector::Constant(d, c.client_init.value_or(c.server_init));
  s.adversary_init = ModelVector::Constant(d, c.adversary_init);
  if (absl::Status st = s.Validate(); !st.ok()) return st;
  return s;
}

}  // namespace flprotect
