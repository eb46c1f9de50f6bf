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

// From raw F0 tracks to network inputs: log transform, interpolation of
// unvoiced gaps, syllable-wise alignment of parallel pairs, zero padding and
// slicing of coefficient planes into fixed-width windows.

#include <cstdint>
#include <string>
#include <vector>

#include "f0vc/tensor.hpp"
#include "f0vc/wavelet.hpp"

namespace f0vc {

inline constexpr Index kPaddedLength = 4000;
inline constexpr Index kWindowWidth = 512;
inline constexpr double kSamplePeriodMs = 1.0;

struct Syllable {
  double start_ms = 0.0;
  double end_ms = 0.0;
  bool operator==(const Syllable&) const = default;
};

/// F0 sampled every millisecond. f0_hz is 0 on unvoiced frames.
struct F0Track {
  std::vector<double> f0_hz;
  std::vector<std::uint8_t> voicing;
  std::vector<Syllable> syllables;
  std::string attitude;
  std::string utterance_id;
  std::string speaker_id;

  Index length() const { return static_cast<Index>(f0_hz.size()); }
  Index voiced_count() const;
  /// PipelineError naming the broken invariant.
  void validate() const;
};

struct ParallelPair {
  F0Track source;
  F0Track target;
};

/// The network's view of one utterance.
struct ModelInput {
  ad::Array signal;         // log-F0, interpolated, zero past valid_length
  ad::Array voicing_mask;   // 1 voiced, 0 unvoiced or padding
  double mean_logf0 = 0.0;  // over voiced frames
  Index valid_length = 0;
};

/// PipelineError for all-unvoiced tracks or tracks longer than
/// padded_length (they are rejected, never truncated).
ModelInput prepare(const F0Track& track, Index padded_length = kPaddedLength);

/// Warps the source onto the target timeline so each source syllable spans
/// the matching target syllable. AlignmentError on syllable count mismatch.
ParallelPair align_pair(const ParallelPair& pair);

/// One fixed-width slice of a coefficient plane; `width` columns are real,
/// the rest zero padding.
struct Window {
  ad::Tensor block;  // [N x window_width]
  Index width = 0;
};

std::vector<Window> slice_windows(const ad::Tensor& plane, Index valid_length,
                                  Index window_width = kWindowWidth);
inline std::vector<Window> slice_windows(const CoefficientPlane& plane,
                                         Index valid_length,
                                         Index window_width = kWindowWidth) {
  return slice_windows(plane.coeffs, valid_length, window_width);
}
/// Inverse of slice_windows on the valid region: [N x sum(widths)].
ad::Tensor unslice(const std::vector<Window>& windows);
/// Same as unslice but with the block tensors replaced (e.g. by generator
/// outputs) while keeping the recorded widths.
ad::Tensor unslice(const std::vector<ad::Tensor>& blocks,
                   const std::vector<Window>& layout);

/// Resamples (time_ms, f0, voiced) samples onto a 1 ms grid starting at 0:
/// voicing by nearest neighbour, F0 linearly between voiced neighbours.
F0Track resample_to_1ms(const std::vector<double>& time_ms,
                        const std::vector<double>& f0_hz,
                        const std::vector<std::uint8_t>& voiced);

// CSV formats: "time_ms,f0_hz,voiced" and "syl_index,start_ms,end_ms".
// Malformed input raises PipelineError naming the file and line.
F0Track read_f0_csv(const std::string& path);
void write_f0_csv(const std::string& path, const F0Track& track);
std::vector<Syllable> read_syllable_csv(const std::string& path);
void write_syllable_csv(const std::string& path,
                        const std::vector<Syllable>& syllables);

}  // namespace f0vc
