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

// Independent dense-grid continuous wavelet transform round trip, written
// with plain loops (no tensors, no FFT) for use as a test oracle.

#include <cmath>
#include <cstdint>
#include <vector>

namespace f0vc::testing {

inline double oracle_ricker(double t, double s) {
  const double u = t / s;
  return 2.0 / std::sqrt(3.0) * std::pow(M_PI, -0.25) * (1 - u * u) * std::exp(-0.5 * u * u);
}

/// Torrence & Compo reconstruction (DOG(2), dt = 1 sample) from a log-spaced
/// grid lo * 2^(j dj) <= hi. Input: log-F0 over the valid region and the
/// voicing flags used for the mean. Returns the reconstructed log-F0.
inline std::vector<double> dense_cwt_roundtrip(const std::vector<double>& x,
                                               const std::vector<std::uint8_t>& voiced,
                                               double lo, double hi, double dj = 0.125) {
  const long n = static_cast<long>(x.size());
  double mean = 0.0;
  long count = 0;
  for (long i = 0; i < n; ++i)
    if (voiced[i]) {
      mean += x[i];
      ++count;
    }
  mean /= static_cast<double>(count);
  std::vector<double> xc(x.size());
  for (long i = 0; i < n; ++i) xc[i] = x[i] - mean;

  std::vector<double> acc(x.size(), 0.0);
  const double span = std::log2(hi / lo);
  for (int j = 0; j * dj <= span + 1e-9; ++j) {
    const double s = lo * std::exp2(j * dj);
    const long half = static_cast<long>(std::ceil(5.0 * s));
    std::vector<double> psi(2 * half + 1);
    for (long k = -half; k <= half; ++k) psi[k + half] = oracle_ricker(static_cast<double>(k), s);
    for (long t = 0; t < n; ++t) {
      double w = 0.0;
      const long k0 = std::max(-half, -t), k1 = std::min(half, n - 1 - t);
      for (long k = k0; k <= k1; ++k) w += xc[t + k] * psi[k + half];
      // W = w / sqrt(s); reconstruction uses W / sqrt(s)
      acc[t] += w / s;
    }
  }
  const double pre = dj / (3.541 * 0.867);
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) out[i] = pre * acc[i] + mean;
  return out;
}

}  // namespace f0vc::testing
