// Copyright 2026 The margincon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace margincon {

struct GradcheckOptions {
  std::uint64_t seed = 7;
  std::size_t instances = 50;  // random instances per operation
  double h = 1e-5;             // central-difference step
  double tolerance = 1e-4;
  std::string corrupt;  // test hook: name of a kernel whose analytic
                        // gradient is deliberately perturbed
};

struct GradcheckResult {
  std::string op;
  std::size_t instances = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Central-difference verification of every analytic gradient: the
/// contrastive losses, the margin softmax, the combined loss (embeddings,
/// classifier weights and class vectors) and the encoder backprop. Unit-norm
/// parameter groups are differentiated through renormalization, matching
/// the tangent-space gradient convention. Relative error is measured
/// against the largest finite-difference component of each group.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace margincon
