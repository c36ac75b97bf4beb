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
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace flprotect {
namespace {

using ::flprotect::testing::RandomPsd;
using ::flprotect::testing::RandomVector;
using ::flprotect::testing::Vec;

QuadraticObjective Scalar(double q, double b = 0.0) {
  return *QuadraticObjective::Create(Matrix::Constant(1, 1, q),
                                     ModelVector::Constant(1, b));
}

TEST(QuadraticObjectiveTest, RejectsBadHessians) {
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_EQ(
      QuadraticObjective::Create(asym, ModelVector::Zero(2)).status().code(),
      absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(QuadraticObjective::Create(Matrix::Constant(1, 1, -1.0),
                                          ModelVector::Zero(1))
                   .ok());
  EXPECT_FALSE(
      QuadraticObjective::Create(Matrix::Identity(2, 2), ModelVector::Zero(3))
          .ok());
}

TEST(QuadraticObjectiveTest, GradientAndLearningRateBound) {
  const QuadraticObjective f = Scalar(2.0, 1.0);
  EXPECT_DOUBLE_EQ(f.Gradient(Vec({3.0}))[0], 7.0);
  EXPECT_DOUBLE_EQ(f.Value(Vec({1.0})), 2.0);
  FLPROTECT_EXPECT_OK(f.CheckLearningRate(0.49));
  EXPECT_FALSE(f.CheckLearningRate(0.5).ok());
  EXPECT_FALSE(f.CheckLearningRate(0.0).ok());
}

TEST(LocalUpdateTest, SingleStepIsScaledGradient) {
  absl::StatusOr<ModelVector> xi = LocalUpdate(Vec({1.0}), Scalar(1.0), 0.1, 1);
  FLPROTECT_ASSERT_OK(xi);
  EXPECT_NEAR((*xi)[0], -0.1, 1e-15);
}

TEST(LocalUpdateTest, TwoStepsByHand) {
  absl::StatusOr<ModelVector> xi = LocalUpdate(Vec({1.0}), Scalar(1.0), 0.1, 2);
  FLPROTECT_ASSERT_OK(xi);
  EXPECT_NEAR((*xi)[0], -0.19, 1e-15);
}

TEST(LocalUpdateTest, ZeroAtMinimizer) {
  // f = 0.5 x^2 - 2x has its minimizer at 2.
  absl::StatusOr<ModelVector> xi =
      LocalUpdate(Vec({2.0}), Scalar(1.0, -2.0), 0.3, 7);
  FLPROTECT_ASSERT_OK(xi);
  EXPECT_EQ((*xi)[0], 0.0);
}

TEST(LocalUpdateTest, EqualsNegativeScaledGradientSum) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = RandomPsd(rng, 3);
    const ModelVector b = RandomVector(rng, 3);
    const QuadraticObjective f = *QuadraticObjective::Create(q, b);
    const double eta = 0.9 / f.MaxEigenvalue();
    const ModelVector x0 = RandomVector(rng, 3, 2.0);
    const int steps = 1 + trial % 6;
    ModelVector x = x0;
    ModelVector grad_sum = ModelVector::Zero(3);
    for (int k = 0; k < steps; ++k) {
      const ModelVector g = q * x + b;
      grad_sum += g;
      x -= eta * g;
    }
    absl::StatusOr<ModelVector> xi = LocalUpdate(x0, f, eta, steps);
    FLPROTECT_ASSERT_OK(xi);
    EXPECT_LE((*xi + eta * grad_sum).norm(), 1e-12 * (1.0 + xi->norm()));
  }
}

TEST(LocalUpdateTest, ContractsTowardMinimizer) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = RandomPsd(rng, 3) + 0.1 * Matrix::Identity(3, 3);
    const ModelVector b = RandomVector(rng, 3);
    const QuadraticObjective f = *QuadraticObjective::Create(q, b);
    const ModelVector minimizer = -q.ldlt().solve(b);
    const double eta = 0.95 / f.MaxEigenvalue();
    ModelVector x = RandomVector(rng, 3, 5.0);
    double distance = (x - minimizer).norm();
    for (int k = 0; k < 10; ++k) {
      x += *LocalUpdate(x, f, eta, 1);
      const double next = (x - minimizer).norm();
      EXPECT_LE(next, distance + 1e-12);
      distance = next;
    }
  }
}

TEST(LocalUpdateTest, RejectsBadArguments) {
  EXPECT_EQ(LocalUpdate(Vec({1.0}), Scalar(1.0), 0.1, 0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(LocalUpdate(Vec({1.0}), Scalar(1.0), 1.0, 1).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(LocalUpdate(Vec({1.0, 2.0}), Scalar(1.0), 0.1, 1).ok());
}

TEST(LocalUpdateTest, NonFiniteGradientIsAFault) {
  absl::StatusOr<ModelVector> xi =
      LocalUpdate(Vec({1e308}), Scalar(0.9, 1e308), 0.5, 3);
  EXPECT_EQ(xi.status().code(), absl::StatusCode::kInternal);
}

TEST(ClientRoundTest, AbsentClientKeepsItsModel) {
  absl::StatusOr<ClientRoundResult> r = ClientRound(
      Vec({0.3}), Vec({1.0}), false, Scalar(1.0), 0.1, 3, Protocol::kFlip);
  FLPROTECT_ASSERT_OK(r);
  EXPECT_EQ(r->new_client_model[0], 0.3);
  EXPECT_FALSE(r->uplink.has_value());
  EXPECT_FALSE(r->innovation.has_value());
}

TEST(ClientRoundTest, FlipUplinksTheIncrementExactly) {
  Rng rng(3);
  const QuadraticObjective f =
      *QuadraticObjective::Create(RandomPsd(rng, 4), RandomVector(rng, 4));
  const double eta = 0.5 / f.MaxEigenvalue();
  for (int trial = 0; trial < 20; ++trial) {
    const ModelVector server = RandomVector(rng, 4, 3.0);
    absl::StatusOr<ClientRoundResult> r = ClientRound(
        RandomVector(rng, 4), server, true, f, eta, 5, Protocol::kFlip);
    FLPROTECT_ASSERT_OK(r);
    ASSERT_TRUE(r->uplink.has_value());
    EXPECT_EQ(*r->uplink, r->new_client_model - server);
    EXPECT_EQ(*r->uplink, *r->innovation);
  }
}

TEST(ClientRoundTest, ParticipantRestartsFromServer) {
  // zeta = server - client, so the new model is client + xi + zeta.
  const ModelVector client = Vec({-1.0});
  const ModelVector server = Vec({2.0});
  absl::StatusOr<ClientRoundResult> r =
      ClientRound(client, server, true, Scalar(1.0), 0.25, 1, Protocol::kFlop);
  FLPROTECT_ASSERT_OK(r);
  EXPECT_DOUBLE_EQ((*r->innovation)[0], -0.5);
  EXPECT_DOUBLE_EQ((*r->uplink)[0], 1.5);
  EXPECT_DOUBLE_EQ(r->new_client_model[0],
                   client[0] + (*r->innovation)[0] + (server - client)[0]);
}

TEST(ServerRoundTest, FlipWithoutParticipantsIsUnchanged) {
  absl::StatusOr<ModelVector> s =
      ServerRound(Vec({1.0, 2.0}), {}, Protocol::kFlip);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ(*s, Vec({1.0, 2.0}));
}

TEST(ServerRoundTest, SymmetricIncrementsCancel) {
  const std::vector<ModelVector> up = {Vec({1.0, 0.0}), Vec({-1.0, 0.0})};
  absl::StatusOr<ModelVector> s =
      ServerRound(Vec({0.5, -0.5}), up, Protocol::kFlip);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ(*s, Vec({0.5, -0.5}));
}

TEST(ServerRoundTest, FlopAveragesModels) {
  const std::vector<ModelVector> up = {Vec({2.0}), Vec({4.0})};
  absl::StatusOr<ModelVector> s = ServerRound(Vec({0.0}), up, Protocol::kFlop);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_DOUBLE_EQ((*s)[0], 3.0);
}

TEST(ServerRoundTest, FlopWithoutParticipantsIsUnchanged) {
  absl::StatusOr<ModelVector> s = ServerRound(Vec({7.0}), {}, Protocol::kFlop);
  FLPROTECT_ASSERT_OK(s);
  EXPECT_EQ((*s)[0], 7.0);
}

TEST(ServerRoundTest, RejectsMismatchedDimensions) {
  const std::vector<ModelVector> up = {Vec({1.0}), Vec({1.0, 2.0})};
  EXPECT_EQ(ServerRound(Vec({0.0}), up, Protocol::kFlip).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(StableMeanTest, IdenticalInputsAverageToThemselves) {
  const ModelVector v = Vec({0.1, 1.0 / 3.0, -7.25e-3});
  const std::vector<ModelVector> copies(7, v);
  EXPECT_EQ(StableMean(copies), v);
}

TEST(SampleRoundRandomnessTest, DegenerateProbabilities) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(SampleRoundRandomness(rng, 1.0, 0.5).delta);
    EXPECT_FALSE(SampleRoundRandomness(rng, 0.5, 0.0).mu);
    EXPECT_FALSE(SampleRoundRandomness(rng, 0.0, 1.0).delta);
  }
}

TEST(SampleRoundRandomnessTest, EmpiricalFrequencies) {
  Rng rng(kDefaultSeed);
  constexpr int kDraws = 100000;
  int deltas = 0, mus = 0, both = 0;
  for (int i = 0; i < kDraws; ++i) {
    const RoundDraw d = SampleRoundRandomness(rng, 0.5, 0.3);
    deltas += d.delta;
    mus += d.mu;
    both += d.delta && d.mu;
  }
  EXPECT_NEAR(deltas / double(kDraws), 0.5, 0.01);
  EXPECT_NEAR(mus / double(kDraws), 0.3, 0.01);
  EXPECT_NEAR(both / double(kDraws), 0.15, 0.01);
}

TEST(SampleRoundRandomnessTest, DeterministicGivenSeed) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const RoundDraw x = SampleRoundRandomness(a, 0.4, 0.6);
    const RoundDraw y = SampleRoundRandomness(b, 0.4, 0.6);
    EXPECT_EQ(x.delta, y.delta);
    EXPECT_EQ(x.mu, y.mu);
  }
}

TEST(GenerateClientObjectivesTest, SharedCurvatureHomogeneous) {
  ObjectiveGeneratorOptions options;
  options.num_clients = 5;
  options.dim = 3;
  absl::StatusOr<std::vector<QuadraticObjective>> objs =
      GenerateClientObjectives(options);
  FLPROTECT_ASSERT_OK(objs);
  ASSERT_EQ(objs->size(), 5u);
  for (const QuadraticObjective& f : *objs) {
    EXPECT_EQ(f.dim(), 3);
    EXPECT_EQ(f.hessian(), (*objs)[0].hessian());
    EXPECT_EQ(f.linear(), (*objs)[0].linear());
    EXPECT_GE(f.MinEigenvalue(), options.curvature_min - 1e-12);
    EXPECT_LE(f.MaxEigenvalue(), options.curvature_max + 1e-12);
  }
}

TEST(GenerateClientObjectivesTest, HeterogeneousRotatedObjectives) {
  ObjectiveGeneratorOptions options;
  options.num_clients = 4;
  options.dim = 3;
  options.shared_curvature = false;
  options.diagonal = false;
  options.heterogeneity = 0.5;
  absl::StatusOr<std::vector<QuadraticObjective>> objs =
      GenerateClientObjectives(options);
  FLPROTECT_ASSERT_OK(objs);
  for (const QuadraticObjective& f : *objs) {
    EXPECT_TRUE(IsSymmetric(f.hessian()));
    EXPECT_GE(f.MinEigenvalue(), options.curvature_min - 1e-9);
  }
  EXPECT_NE((*objs)[0].linear(), (*objs)[1].linear());

  absl::StatusOr<std::vector<QuadraticObjective>> again =
      GenerateClientObjectives(options);
  for (size_t i = 0; i < objs->size(); ++i) {
    EXPECT_EQ((*objs)[i].hessian(), (*again)[i].hessian());
    EXPECT_EQ((*objs)[i].linear(), (*again)[i].linear());
  }
}

TEST(ProtocolTest, NamesRoundTrip) {
  for (Protocol p : {Protocol::kFlip, Protocol::kFlop}) {
    absl::StatusOr<Protocol> parsed = ParseProtocol(ProtocolName(p));
    FLPROTECT_ASSERT_OK(parsed);
    EXPECT_EQ(*parsed, p);
  }
  EXPECT_FALSE(ParseProtocol("fedavg").ok());
}

}  // namespace
}  // namespace flprotect
