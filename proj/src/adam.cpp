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

#include "f0vc/adam.hpp"

#include <cmath>

#include "f0vc/error.hpp"

namespace f0vc {

void adam_step(std::vector<ad::Tensor>& params, AdamState& state) {
  for (const ad::Tensor& p : params) {
    if (!p.requires_grad() || p.grad().size() != p.size())
      throw ContractError("adam_step: parameter has no gradient");
  }
  if (state.m.empty()) {
    for (const ad::Tensor& p : params) {
      state.m.push_back(ad::Array::Zero(p.size()));
      state.v.push_back(ad::Array::Zero(p.size()));
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adam_step: parameter list changed between steps");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor& p = params[i];
    const ad::Array& g = p.grad();
    ad::Array& m = state.m[i];
    ad::Array& v = state.v[i];
    if (m.size() != p.size())
      throw ContractError("adam_step: moment size mismatch");
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    p.value_mut() -= state.lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    p.zero_grad();
  }
}

void zero_grads(std::vector<ad::Tensor>& params) {
  for (ad::Tensor& p : params) p.zero_grad();
}

}  // namespace f0vc
