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

#include "selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "f0vc/corpus.hpp"
#include "f0vc/gradcheck.hpp"
#include "f0vc/training.hpp"
#include "f0vc/wavelet.hpp"

namespace f0vc::cli {
namespace {

using ad::Tensor;

struct Reporter {
  std::ostream& log;
  int failures = 0;
  void operator()(const std::string& name, bool ok, const std::string& detail) {
    log << (ok ? "ok    " : "FAIL  ") << name << "  " << detail << '\n';
    failures += !ok;
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double direct_ricker(double t, double s) {
  const double u = t / s;
  return 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25)) * (1.0 - u * u) *
         std::exp(-0.5 * u * u);
}

void kernel_checks(Reporter& report) {
  double worst = 0.0;
  for (double s : {0.7, 5.0, 33.3, 400.0}) {
    const Index support = kernel_support(s, 4001);
    const WaveletKernel k = ricker_kernel(s, support);
    const double half = static_cast<double>(support - 1) / 2.0;
    for (Index i = 0; i < support; ++i)
      worst = std::max(worst, std::abs(k.taps[i] - direct_ricker(static_cast<double>(i) - half, s)));
  }
  report("ricker kernel", worst <= 1e-12, "max error " + sci(worst));
}

void reconstruct_checks(Reporter& report, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const Index rows = 7, cols = 50;
  ad::Array values(rows * cols);
  for (Index i = 0; i < values.size(); ++i) values[i] = nd(rng);
  const double mean = 4.9;
  const ReconstructionConstants rc;
  const Tensor x = reconstruct(CoefficientPlane{Tensor(values, {rows, cols}), mean}, rc);
  const double prefactor = 0.125 * std::sqrt(1.2) / (3.541 * 0.867);
  double worst = 0.0;
  for (Index t = 0; t < cols; ++t) {
    double sum = 0.0;
    for (Index r = 0; r < rows; ++r) sum += values[r * cols + t];
    worst = std::max(worst, std::abs(x.value()[t] - (prefactor * sum + mean)));
  }
  report("reconstruction", worst <= 1e-12, "max error " + sci(worst));
}

void gradient_checks(Reporter& report, std::uint64_t seed) {
  corpus::SkeletonSpec sk;
  sk.min_syllables = 3;
  sk.max_syllables = 3;
  sk.syllable_ms_lo = 40;
  sk.syllable_ms_hi = 60;
  sk.max_duration_ms = 200;
  corpus::AttitudeProfile a, b;
  a.name = "a";
  b.name = "b";
  b.range_semitones = 14.4;
  const ParallelPair raw = corpus::synth_pair(corpus::random_skeleton(sk, seed), a, b, seed);
  const train::ArchConfig arch = train::ArchConfig::tiny(4, 64, 256);
  train::ModelBundle bundle(arch, seed);
  bundle.config = 'B';
  const auto prepared = train::prepare_pairs({raw}, arch.padded_length);
  const train::PreparedPair& pair = prepared.front();
  train::TrainConfig cfg = train::TrainConfig::for_config('B');
  // Identity-initialized generators leave the cycle residual on the L1 kink.
  {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (Tensor& t : bundle.generator_parameters())
      for (Index i = 0; i < t.size(); ++i) t.value_mut()[i] += nd(rng);
  }

  auto concat = [](std::vector<Tensor> x, const std::vector<Tensor>& y) {
    x.insert(x.end(), y.begin(), y.end());
    return x;
  };
  auto check = [&](const std::string& name, const std::function<Tensor()>& loss,
                   const std::vector<Tensor>& params) {
    const auto r = testing::check_gradients(loss, params, 1e-5, 1e-3, 1e-5, 6, seed);
    report(name, r.ok(), std::to_string(r.checked) + " entries, " + std::to_string(r.kinks) + " on kinks" +
                             (r.ok() ? "" : ", " + r.worst_where));
  };
  const std::uint64_t stream = train::derive_seed(seed, 1);
  check("pretrain objective",
        [&] {
          nn::Rng rng(stream);
          return train::pretrain_losses(bundle, pair, cfg, rng).total;
        },
        concat(bundle.encoder.parameters(), bundle.classifier.parameters()));
  check("generator objective",
        [&] {
          nn::Rng rng(stream);
          return train::generator_losses(bundle, pair, cfg, train::dualgan_forward(bundle, pair, rng)).total;
        },
        concat(concat(bundle.encoder.parameters(), bundle.generator_parameters()),
               bundle.discriminator_parameters()));
  check("discriminator objective",
        [&] {
          nn::Rng rng(stream);
          return train::discriminator_loss(bundle, train::dualgan_forward(bundle, pair, rng));
        },
        bundle.discriminator_parameters());
}

}  // namespace

int run_selftest(std::ostream& log, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Reporter report{log};
  std::mt19937_64 rng(seed);
  kernel_checks(report);
  reconstruct_checks(report, rng);
  gradient_checks(report, seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << (report.failures ? "selftest failed" : "selftest passed") << " in " << secs << " s\n";
  return report.failures;
}

}  // namespace f0vc::cli
