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

// Central-difference gradient checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "f0vc/tensor.hpp"

namespace f0vc::testing {

struct GradCheckResult {
  double worst_excess = 0.0;  // max over entries of |a-n| - tolerance (<= 0 ok)
  std::string worst_where;
  long checked = 0;
  long kinks = 0;  // entries left unchecked: non-smooth within the step
  bool ok() const { return worst_excess <= 0.0 && kinks * 20 <= checked; }
};

/// Compares backward() against central differences for every entry of every
/// parameter. `loss` rebuilds the graph from the current parameter values.
/// An entry passes when |a - n| <= max(rel * max(|a|, |n|), abs_floor).
/// A failing entry is retried with smaller steps; if its one-sided slopes
/// still disagree it sits on a kink (ReLU, max, |x|) and is counted in
/// `kinks` instead. More than 5% kinks fails the check.
inline GradCheckResult check_gradients(
    const std::function<ad::Tensor()>& loss, std::vector<ad::Tensor> params,
    double step = 1e-5, double rel = 1e-3, double abs_floor = 1e-5,
    long max_entries_per_param = -1, std::uint64_t seed = 0) {
  for (ad::Tensor& p : params) p.zero_grad();
  ad::backward(loss());
  std::vector<ad::Array> analytic;
  for (const ad::Tensor& p : params) analytic.push_back(p.grad());
  for (ad::Tensor& p : params) p.zero_grad();

  GradCheckResult result;
  result.worst_excess = -1.0;
  std::mt19937_64 rng(seed);
  auto value = [&] {
    ad::NoGradGuard guard;
    return loss().item();
  };
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Array& v = params[pi].value_mut();
    std::vector<ad::Index> entries(static_cast<std::size_t>(v.size()));
    for (ad::Index i = 0; i < v.size(); ++i) entries[i] = i;
    if (max_entries_per_param > 0 &&
        static_cast<long>(entries.size()) > max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(max_entries_per_param));
    }
    for (ad::Index i : entries) {
      const double saved = v[i];
      const double a = analytic[pi][i];
      double numeric = 0.0, excess = 0.0, centre = 0.0;
      bool kink = false;
      for (int attempt = 0; attempt < 3; ++attempt) {
        const double h = step * std::pow(0.1, attempt);
        v[i] = saved + h;
        const double up = value();
        v[i] = saved - h;
        const double down = value();
        v[i] = saved;
        numeric = (up - down) / (2.0 * h);
        const double tol =
            std::max(rel * std::max(std::abs(a), std::abs(numeric)), abs_floor);
        excess = std::abs(a - numeric) - tol;
        if (excess <= 0.0) {
          kink = false;
          break;
        }
        if (attempt == 0) centre = value();
        const double fwd = (up - centre) / h, bwd = (centre - down) / h;
        kink = std::abs(fwd - bwd) >
               std::max(rel * std::max(std::abs(fwd), std::abs(bwd)), abs_floor);
        if (!kink) break;
      }
      ++result.checked;
      if (kink) {
        ++result.kinks;
        continue;
      }
      if (excess > result.worst_excess) {
        result.worst_excess = excess;
        result.worst_where = "param " + std::to_string(pi) + " entry " +
                             std::to_string(i) + ": analytic " +
                             std::to_string(a) + " numeric " +
                             std::to_string(numeric);
      }
    }
  }
  return result;
}

inline ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng,
                                bool requires_grad, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  ad::Array v(ad::shape_size(shape));
  for (ad::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  return ad::Tensor(std::move(v), std::move(shape), requires_grad);
}

}  // namespace f0vc::testing
