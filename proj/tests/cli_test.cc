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

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/match.h"
#include "absl/strings/str_split.h"
#include "flprotect/commands.h"
#include "flprotect/config.h"
#include "flprotect/csv.h"
#include "gtest/gtest.h"
#include "nlohmann/json.hpp"
#include "test_util.h"

namespace flprotect {
namespace {

using ::flprotect::testing::Vec;

std::string TempPath(const std::string& name) {
  return ::testing::TempDir() + "flprotect_cli_test_" + name;
}

std::string WriteFile(const std::string& name, const std::string& contents) {
  const std::string path = TempPath(name);
  std::ofstream(path) << contents;
  return path;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "flprotect");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int Column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    ADD_FAILURE() << "no column " << name;
    return 0;
  }
};

Table ParseTable(const std::string& text) {
  Table t;
  for (absl::string_view line : absl::StrSplit(text, '\n', absl::SkipEmpty())) {
    if (absl::StartsWith(line, "#")) {
      t.comments.emplace_back(line);
    } else if (t.header.empty()) {
      t.header = absl::StrSplit(line, ',');
    } else {
      t.rows.push_back(absl::StrSplit(line, ','));
    }
  }
  return t;
}

TEST(FormatDoubleTest, RoundTrips) {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(FormatDouble(v)), v);
  }
  EXPECT_EQ(FormatDouble(0.0), "0");
  EXPECT_EQ(FormatDouble(0.5), "0.5");
}

TEST(CsvTest, ParsesVectorsWithHeaderAndComments) {
  absl::StatusOr<std::vector<ModelVector>> rows =
      ParseVectorCsv("# comment\nx0,x1\n1,2\n\n3.5,-4\n");
  FLPROTECT_ASSERT_OK(rows);
  ASSERT_EQ(rows->size(), 2u);
  EXPECT_EQ((*rows)[1], Vec({3.5, -4.0}));
}

TEST(CsvTest, RejectsMalformedInput) {
  EXPECT_FALSE(ParseVectorCsv("1,2\n3\n").ok());
  EXPECT_FALSE(ParseVectorCsv("1,2\n3,nan\n").ok());
  EXPECT_FALSE(ParseVectorCsv("1,2\n3,x\n").ok());
  EXPECT_FALSE(ParseVectorCsv("1,2\n", 3).ok());
  EXPECT_EQ(ReadVectorCsv(TempPath("missing.csv")).status().code(),
            absl::StatusCode::kNotFound);
}

TEST(CsvTest, WriterFormatsCells) {
  std::ostringstream out;
  CsvWriter csv(out);
  csv.Comment("hello");
  csv.Header({"a", "b", "c", "d"});
  csv.Cell(1).Cell(0.25).Cell(std::optional<double>()).Cell(true);
  FLPROTECT_ASSERT_OK(csv.EndRow());
  EXPECT_EQ(out.str(), "# hello\na,b,c,d\n1,0.25,,1\n");
  csv.Cell(std::numeric_limits<double>::infinity());
  EXPECT_FALSE(csv.EndRow().ok());
}

TEST(ConfigTest, AppliesKnownKeys) {
  RunConfig c;
  FLPROTECT_ASSERT_OK(ApplyConfigText(c, R"(
# comment
protocol = flop
N = 20
n = 4
gamma = 0.25
M_scalar = 0.3
seed = 7
flop-memory = model-proxy
)"));
  EXPECT_EQ(c.protocol, Protocol::kFlop);
  EXPECT_EQ(c.num_clients, 20);
  EXPECT_EQ(c.num_sampled, 4);
  EXPECT_EQ(c.gamma, 0.25);
  EXPECT_EQ(c.m_scalar, 0.3);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.flop_memory, FlopXiMemory::kModelProxy);
  FLPROTECT_ASSERT_OK(FinalizeConfig(c));
  EXPECT_DOUBLE_EQ(c.p(), 0.2);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_FALSE(ApplyConfigValue(c, "colour", "blue").ok());
  EXPECT_FALSE(ApplyConfigValue(c, "gamma", "lots").ok());
  EXPECT_FALSE(ApplyConfigValue(c, "protocol", "flap").ok());
  EXPECT_FALSE(ApplyConfigText(c, "gamma 0.5\n").ok());
  EXPECT_EQ(ApplyConfigFile(c, TempPath("missing.cfg")).code(),
            absl::StatusCode::kNotFound);
}

TEST(ConfigTest, ResolvesParticipationProbability) {
  RunConfig c;
  FLPROTECT_ASSERT_OK(ApplyConfigValue(c, "p", "0.3"));
  FLPROTECT_ASSERT_OK(FinalizeConfig(c));
  EXPECT_EQ(c.num_sampled, 3);

  RunConfig bad;
  FLPROTECT_ASSERT_OK(ApplyConfigValue(bad, "p", "0.35"));
  EXPECT_FALSE(FinalizeConfig(bad).ok());

  RunConfig range;
  FLPROTECT_ASSERT_OK(ApplyConfigValue(range, "gamma", "1.5"));
  EXPECT_FALSE(FinalizeConfig(range).ok());

  RunConfig orphan;
  FLPROTECT_ASSERT_OK(ApplyConfigValue(orphan, "script-zeta", "z.csv"));
  EXPECT_FALSE(FinalizeConfig(orphan).ok());
}

TEST(ConfigTest, BuildsScriptedScenario) {
  RunConfig c;
  c.script_xi = WriteFile("xi.csv", "x0,x1\n1,0\n0,1\n1,1\n");
  c.script_zeta = WriteFile("zeta.csv", "0.1,0.1\n0.2,0.2\n0.3,0.3\n");
  c.m_diagonal = {0.1, 0.2};
  FLPROTECT_ASSERT_OK(FinalizeConfig(c));
  absl::StatusOr<Scenario> s = BuildScenario(c);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ(s->mode, ScenarioMode::kScripted);
  EXPECT_EQ(s->dim(), 2);
  EXPECT_EQ(s->horizon, 3);
  EXPECT_EQ(s->m(1, 1), 0.2);
  EXPECT_EQ(s->m(0, 1), 0.0);
  EXPECT_EQ(s->zeta[2], Vec({0.3, 0.3}));

  RunConfig shorter = c;
  shorter.horizon = 2;
  shorter.horizon_set = true;
  EXPECT_EQ(BuildScenario(shorter)->horizon, 2);

  RunConfig longer = c;
  longer.horizon = 5;
  longer.horizon_set = true;
  EXPECT_FALSE(BuildScenario(longer).ok());
}

TEST(ConfigTest, ReadsTransitionMatrixFile) {
  RunConfig c;
  c.script_xi = WriteFile("xi2.csv", "1,0\n0,1\n");
  c.m_file = WriteFile("m.csv", "0.1,0.2\n0.3,0.4\n");
  FLPROTECT_ASSERT_OK(FinalizeConfig(c));
  absl::StatusOr<Scenario> s = BuildScenario(c);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ(s->m(1, 0), 0.3);
  // No zeta script means zero drift.
  EXPECT_EQ(s->zeta[0], Vec({0.0, 0.0}));
}

TEST(ConfigTest, BuildsFederation) {
  RunConfig c;
  c.dim = 3;
  c.horizon = 10;
  FLPROTECT_ASSERT_OK(FinalizeConfig(c));
  absl::StatusOr<Scenario> s = BuildScenario(c);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ(s->mode, ScenarioMode::kFullFl);
  EXPECT_EQ(s->federation.objectives.size(), 10u);
  EXPECT_EQ(s->dim(), 3);
  EXPECT_DOUBLE_EQ(s->p, 0.5);
}

TEST(GridTest, ListsAndRanges) {
  EXPECT_EQ(*ParseGrid("0.1,0.5,0.9"), (std::vector<double>{0.1, 0.5, 0.9}));
  EXPECT_EQ(*ParseGrid("0:1:0.25"),
            (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(ParseGrid("0:1:0.1")->size(), 11u);
  EXPECT_EQ(ParseGrid("0:1:0.1")->back(), 1.0);
  EXPECT_FALSE(ParseGrid("1:0:0.1").ok());
  EXPECT_FALSE(ParseGrid("0:1:0").ok());
  EXPECT_FALSE(ParseGrid("a,b").ok());
  EXPECT_FALSE(ParseGrid("").ok());
}

TEST(RunCliTest, SimulateWithoutParticipationIsConstant) {
  const CliResult r =
      Invoke({"simulate", "--p", "0", "--horizon", "20", "--trials", "50",
              "--d", "2", "--client-init", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  ASSERT_EQ(t.rows.size(), 21u);
  ASSERT_FALSE(t.comments.empty());
  EXPECT_TRUE(absl::StrContains(t.comments[0], "flprotect-csv v1"));
  const int mean = t.Column("mc_mean");
  const int se = t.Column("mc_stderr");
  for (const auto& row : t.rows) {
    EXPECT_EQ(row[mean], "2");
    EXPECT_EQ(row[se], "0");
  }
}

TEST(RunCliTest, SimulateIsReproducible) {
  const std::vector<std::string> args = {
      "simulate", "--horizon", "15", "--trials", "600", "--seed", "5"};
  setenv("FLPROTECT_THREADS", "1", 1);
  const CliResult a = Invoke(args);
  setenv("FLPROTECT_THREADS", "3", 1);
  const CliResult b = Invoke(args);
  unsetenv("FLPROTECT_THREADS");
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  const CliResult c =
      Invoke({"simulate", "--horizon", "15", "--trials", "600", "--seed", "6"});
  EXPECT_NE(a.out, c.out);
}

TEST(RunCliTest, ConfigFileThenFlags) {
  const std::string cfg =
      WriteFile("run.cfg", "horizon = 7\ntrials = 10\ngamma = 0.9\n");
  const CliResult r = Invoke({"simulate", "--config", cfg, "--gamma", "0.1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  EXPECT_EQ(t.rows.size(), 8u);
  EXPECT_TRUE(absl::StrContains(t.comments[0], "gamma=0.1"));
}

TEST(RunCliTest, ScriptedSimulateFillsExactAndBound) {
  const std::string xi = WriteFile("sim_xi.csv", "1\n0.9\n0.81\n0.729\n");
  const std::string zeta = WriteFile("sim_zeta.csv", "0.1\n0.1\n0.1\n0.1\n");
  const CliResult r = Invoke({"simulate", "--script-xi", xi, "--script-zeta",
                              zeta, "--trials", "100"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "mc_mean", "mc_stderr",
                                                "exact", "bound", "eq13_value",
                                                "lemma1_satisfied"}));
  EXPECT_EQ(t.rows[0][t.Column("exact")], "0");
  EXPECT_FALSE(t.rows[1][t.Column("bound")].empty());
  EXPECT_EQ(t.rows[1][t.Column("lemma1_satisfied")], "1");
}

TEST(RunCliTest, BoundColumnsAndWarnings) {
  const std::string xi = WriteFile("b_xi.csv", "1\n1\n1\n");
  const CliResult r = Invoke({"bound", "--script-xi", xi, "--M-scalar", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  ASSERT_EQ(t.rows.size(), 3u);
  for (const char* column :
       {"t", "ell_0", "h_0", "q_mean_0", "s_norm", "r_norm", "g_norm", "var",
        "var_propagated", "bound", "bound_propagated", "accumulated_bound",
        "lemma1_satisfied"}) {
    t.Column(column);
  }
  EXPECT_EQ(t.rows[0][t.Column("lemma1_satisfied")], "0");
  EXPECT_TRUE(absl::StrContains(r.err, "warning"));
}

TEST(RunCliTest, BoundNeedsScript) {
  const CliResult r = Invoke({"bound"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_TRUE(absl::StrContains(r.err, "error"));
}

TEST(RunCliTest, UsageErrors) {
  EXPECT_EQ(Invoke({"simulate", "--no-such-flag", "1"}).code, kExitUsage);
  EXPECT_EQ(Invoke({}).code, kExitUsage);
  EXPECT_EQ(Invoke({"simulate", "--p", "0.35"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"simulate", "--script-xi", TempPath("none.csv")}).code,
            kExitUsage);
  EXPECT_EQ(Invoke({"sweep", "--param", "p"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"sweep", "--param", "eta", "--grid", "0.1"}).code,
            kExitUsage);
}

TEST(RunCliTest, SweepRows) {
  const CliResult r = Invoke({"sweep", "--param", "p", "--grid", "0.2:0.6:0.2",
                              "--horizon", "12", "--trials", "40"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][t.Column("param")], "p");
  EXPECT_EQ(t.rows[2][t.Column("value")], "0.6");
  EXPECT_TRUE(t.rows[0][t.Column("bound_tail")].empty());
}

TEST(RunCliTest, ScriptedSweepReportsOptimalParticipation) {
  const std::string xi = WriteFile("sw_xi.csv", "1\n1\n1\n1\n");
  const std::string zeta = WriteFile("sw_zeta.csv", "1\n-1\n1\n1\n");
  const CliResult r =
      Invoke({"sweep", "--param", "p", "--grid", "0.1,0.9", "--script-xi", xi,
              "--script-zeta", zeta, "--trials", "40", "--gamma", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Table t = ParseTable(r.out);
  bool found = false;
  for (const std::string& c : t.comments) {
    found |= absl::StrContains(c, "perfect_eavesdrop_optimal_p=");
  }
  EXPECT_TRUE(found);
  EXPECT_FALSE(t.rows[0][t.Column("eq13_tail")].empty());
}

TEST(RunCliTest, VerifyJsonReport) {
  const CliResult r = Invoke({"verify", "--json"});
  const nlohmann::json report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report["schema"], "flprotect-verify v1");
  bool all = true;
  std::vector<std::string> names;
  for (const auto& check : report["checks"]) {
    names.push_back(check["name"]);
    if (check["status"] == "FAIL") all = false;
  }
  EXPECT_EQ(report["passed"], all);
  EXPECT_EQ(r.code, all ? kExitOk : kExitFailure);
  EXPECT_GE(names.size(), 9u);
  for (const char* n :
       {"operator_l_matches_enumeration", "stability_threshold_divergence",
        "innovation_transition_exact", "drift_identity",
        "vt_matches_enumeration", "perfect_eavesdrop_matches_enumeration",
        "perfect_eavesdrop_matches_monte_carlo", "flop_zero_protection"}) {
    bool present = false;
    for (const auto& check : report["checks"]) {
      if (check["name"] == n) {
        present = true;
        EXPECT_EQ(check["status"], "PASS") << n;
      }
    }
    EXPECT_TRUE(present) << n;
  }
}

TEST(RunCliTest, OutFlagWritesFile) {
  const std::string path = TempPath("out.csv");
  std::remove(path.c_str());
  const CliResult r =
      Invoke({"simulate", "--horizon", "3", "--trials", "5", "--out", path});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::stringstream contents;
  contents << in.rdbuf();
  EXPECT_EQ(ParseTable(contents.str()).rows.size(), 4u);
}

}  // namespace
}  // namespace flprotect
