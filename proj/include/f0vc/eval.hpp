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

// Objective evaluation: reconstruction and transformation RMSE in Hz, the
// identity and CWT-AS baselines, and the learned-scale distribution plot.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "f0vc/corpus.hpp"
#include "f0vc/pipeline.hpp"
#include "f0vc/training.hpp"

namespace f0vc::eval {

/// RMS of pred - ref over frames voiced in both. EvalError when lengths
/// differ or no frame is voiced in both.
double rmse_hz(const F0Track& pred, const F0Track& ref);

/// Fixed-grid wavelet analysis keeping the scales that best separate the
/// two attitudes on average.
struct CwtAsBaseline {
  std::vector<double> grid;
  std::vector<Index> selected;  // indices into grid, best first
  ReconstructionConstants constants;
  Index padded_length = kPaddedLength;

  static CwtAsBaseline fit(const std::vector<ParallelPair>& pairs, Index count = 10,
                           double lo = 5.0, double hi = 2000.0, double dj = 0.125,
                           Index padded_length = kPaddedLength);
  std::vector<double> selected_scales() const;
  /// exp(reconstruct(encode)) with only the selected rows.
  F0Track round_trip(const F0Track& track) const;
};

struct UtteranceMetrics {
  std::string utterance_id;
  double rec_a = 0, rec_b = 0;            // learned encoder round trip
  double baseline_rec_a = 0, baseline_rec_b = 0;
  double trans_ab = 0, trans_ba = 0;      // converted vs aligned target
  double identity = 0;                    // aligned source vs target
};

struct EvalReport {
  std::vector<UtteranceMetrics> rows;
  double reconstruction = 0;           // mean over utterances and sides
  double baseline_reconstruction = 0;  // NaN without a baseline
  double transformation_ab = 0, transformation_ba = 0, transformation = 0;
  double identity = 0;
  std::vector<double> learned_scales, baseline_scales;
  char config = 'A';
  bool untrained = false;
};

/// Replaceable pieces, for stubbing in tests.
struct EvalHooks {
  std::function<F0Track(const F0Track&, train::Direction, std::uint64_t)> convert;
  std::function<F0Track(const F0Track&)> reconstruct;
};

/// Warns on stderr (and still evaluates) when the bundle never saw a
/// dualgan step. baseline may be null.
EvalReport evaluate(const train::ModelBundle& bundle, const std::vector<ParallelPair>& pairs,
                    const CwtAsBaseline* baseline, std::uint64_t seed, EvalHooks hooks = {});

/// report.csv (per utterance), summary.csv and table.txt.
void write_report(const EvalReport& report, const std::string& out_dir);
std::string format_table(const EvalReport& report);

double spread(const std::vector<double>& scales);

/// scales.csv (one row per learned scale) and scales.svg with P, SY, W and
/// SE markers; baseline_scales are drawn as a second strip when given.
void scale_histogram(const std::vector<double>& scales, const corpus::DurationMarkers& markers,
                     const std::string& out_dir, const std::vector<double>& baseline_scales = {});

}  // namespace f0vc::eval
