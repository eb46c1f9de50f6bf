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

// Synthetic parallel corpora of expressive F0 contours, and loading of any
// corpus described by a manifest.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "f0vc/pipeline.hpp"

namespace f0vc::corpus {

/// A family of contours. All semitone quantities are relative to base_hz.
struct AttitudeProfile {
  std::string name;
  double base_hz = 200.0;
  double range_semitones = 12.0;  // scales every accent; 12 is neutral
  double declination_st_per_s = -2.0;
  double accent_amplitude_st = 3.0;
  double accent_width_ms = 60.0;
  double jitter_st = 0.1;

  void validate() const;  // ContractError
  bool operator==(const AttitudeProfile&) const = default;
};

struct UtteranceSkeleton {
  Index syllable_count = 0;
  std::vector<double> syllable_durations_ms;
  std::vector<Index> accent_positions;   // syllable indices
  std::vector<double> accent_strengths;  // one per accent, around 1
  std::vector<std::pair<double, double>> voicing_gaps;  // (start_ms, len_ms)
  std::vector<Index> phones_per_syllable;
  std::vector<Index> word_lengths;  // syllables per word

  double duration_ms() const;
  void validate(double max_duration_ms = 3800.0) const;  // ContractError
};

struct SkeletonSpec {
  Index min_syllables = 3;
  Index max_syllables = 20;
  double syllable_ms_lo = 120.0;
  double syllable_ms_hi = 260.0;
  double accent_probability = 0.35;
  double gap_probability = 0.3;  // per syllable boundary
  double gap_ms_lo = 20.0;
  double gap_ms_hi = 60.0;
  double max_duration_ms = 3800.0;
};

/// Draws a skeleton; syllables are dropped from the end until it fits.
UtteranceSkeleton random_skeleton(const SkeletonSpec& spec, std::uint64_t seed);

/// st(t) = declination * t + (range / 12) * sum_k strength_k * amplitude *
/// exp(-(t - c_k)^2 / (2 width^2)) + jitter * e(t), f0 = base * 2^(st / 12).
/// e is a unit-variance AR(1) sequence drawn from `seed` alone, so two
/// profiles share the same micro-variation.
F0Track synth_track(const UtteranceSkeleton& skeleton, const AttitudeProfile& profile,
                    std::uint64_t seed);

ParallelPair synth_pair(const UtteranceSkeleton& skeleton, const AttitudeProfile& a,
                        const AttitudeProfile& b, std::uint64_t seed,
                        const std::string& utterance_id = "utt0000",
                        const std::string& speaker_id = "spk0");

/// Mean phone, syllable, word and sentence durations in ms. Zero when
/// unknown.
struct DurationMarkers {
  double phone_ms = 0.0;
  double syllable_ms = 0.0;
  double word_ms = 0.0;
  double sentence_ms = 0.0;
};

struct CorpusSpec {
  Index utterances = 10;
  std::vector<AttitudeProfile> profiles;  // exactly two, distinct
  std::uint64_t seed = 1;
  SkeletonSpec skeleton;
  std::string speaker_id = "spk0";
  double valid_fraction = 0.2;
};

/// Writes f0/<id>_<attitude>.csv, syl/<id>_<attitude>.csv and manifest.json
/// under out_dir. Returns the manifest path. IoError when unwritable.
std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

std::vector<AttitudeProfile> read_profiles(const std::string& path);
void write_profiles(const std::string& path, const std::vector<AttitudeProfile>& profiles);

struct Corpus {
  std::vector<ParallelPair> pairs;  // source = attitude_a, as loaded
  std::vector<std::string> split;   // "train" or "valid", one per pair
  std::string attitude_a, attitude_b;
  DurationMarkers markers;
  std::vector<std::string> warnings;

  std::vector<ParallelPair> subset(const std::string& which) const;
};

/// Groups manifest entries into pairs by (speaker, utterance). Incomplete
/// or inconsistent pairs are skipped with a warning; malformed files raise
/// PipelineError naming the file and line.
Corpus load_corpus(const std::string& manifest_path);

inline std::vector<ParallelPair> import_corpus(const std::string& manifest_path) {
  return load_corpus(manifest_path).pairs;
}

}  // namespace f0vc::corpus
