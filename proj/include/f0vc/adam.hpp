// Copyright 2026 The f0vc Authors.
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
#include <vector>

#include "f0vc/tensor.hpp"

namespace f0vc {

/// Adam moments for one group of parameters. m and v are allocated on the
/// first step, one array per parameter.
struct AdamState {
  std::int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<ad::Array> m;
  std::vector<ad::Array> v;
};

/// One bias-corrected Adam update; zeroes the grads afterwards.
/// ContractError if a parameter carries no grad.
void adam_step(std::vector<ad::Tensor>& params, AdamState& state);

void zero_grads(std::vector<ad::Tensor>& params);

}  // namespace f0vc
