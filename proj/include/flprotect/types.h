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

#ifndef FLPROTECT_TYPES_H_
#define FLPROTECT_TYPES_H_

#include <Eigen/Dense>
#include <optional>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace flprotect {

// A point in parameter space. Client, server and adversary models, the
// innovation xi and the server-client mismatch zeta all share this type.
using ModelVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// What a participating client sends upstream.
//   kFlip: the model increment xi_t = x^c_{t+1} - x^s_t.
//   kFlop: the full updated local model x^c_{t+1}.
enum class Protocol { kFlip, kFlop };

absl::string_view ProtocolName(Protocol protocol);
absl::StatusOr<Protocol> ParseProtocol(absl::string_view name);

inline bool AllFinite(const ModelVector& v) { return v.allFinite(); }

// Symmetric within an absolute tolerance relative to the largest entry.
bool IsSymmetric(const Matrix& m, double tolerance = 1e-12);

}  // namespace flprotect

#endif  // FLPROTECT_TYPES_H_
