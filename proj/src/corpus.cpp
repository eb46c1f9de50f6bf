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

#include "f0vc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "f0vc/error.hpp"

namespace f0vc::corpus {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// splitmix64, for deriving per-utterance seeds
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

Index uniform_int(std::mt19937_64& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

json profile_json(const AttitudeProfile& p) {
  return {{"name", p.name},
          {"base_hz", p.base_hz},
          {"range_semitones", p.range_semitones},
          {"declination_st_per_s", p.declination_st_per_s},
          {"accent_amplitude_st", p.accent_amplitude_st},
          {"accent_width_ms", p.accent_width_ms},
          {"jitter_st", p.jitter_st}};
}

AttitudeProfile profile_from(const json& j) {
  AttitudeProfile p;
  p.name = j.at("name").get<std::string>();
  p.base_hz = j.value("base_hz", p.base_hz);
  p.range_semitones = j.value("range_semitones", p.range_semitones);
  p.declination_st_per_s = j.value("declination_st_per_s", p.declination_st_per_s);
  p.accent_amplitude_st = j.value("accent_amplitude_st", p.accent_amplitude_st);
  p.accent_width_ms = j.value("accent_width_ms", p.accent_width_ms);
  p.jitter_st = j.value("jitter_st", p.jitter_st);
  p.validate();
  return p;
}

std::string id_for(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%04lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

void AttitudeProfile::validate() const {
  if (name.empty()) throw ContractError("profile needs a name");
  if (!(base_hz > 0) || !(range_semitones > 0) || !(accent_amplitude_st > 0) ||
      !(accent_width_ms > 0) || !(jitter_st >= 0) || !std::isfinite(declination_st_per_s))
    throw ContractError("profile '" + name + "': out-of-range field");
}

double UtteranceSkeleton::duration_ms() const {
  return std::accumulate(syllable_durations_ms.begin(), syllable_durations_ms.end(), 0.0);
}

void UtteranceSkeleton::validate(double max_duration_ms) const {
  if (syllable_count < 1 || static_cast<Index>(syllable_durations_ms.size()) != syllable_count)
    throw ContractError("skeleton: syllable durations do not match the count");
  for (double d : syllable_durations_ms)
    if (!(d >= 1.0)) throw ContractError("skeleton: syllable shorter than 1 ms");
  if (duration_ms() > max_duration_ms)
    throw ContractError("skeleton: " + std::to_string(duration_ms()) + " ms exceeds " +
                        std::to_string(max_duration_ms) + " ms");
  if (accent_positions.size() != accent_strengths.size())
    throw ContractError("skeleton: one strength per accent");
  for (Index a : accent_positions)
    if (a < 0 || a >= syllable_count) throw ContractError("skeleton: accent out of range");
  for (const auto& [start, len] : voicing_gaps)
    if (start < 0 || len <= 0 || start + len > duration_ms())
      throw ContractError("skeleton: voicing gap outside the utterance");
}

UtteranceSkeleton random_skeleton(const SkeletonSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed));
  UtteranceSkeleton s;
  const Index lo = std::clamp<Index>(spec.min_syllables, 1, 20);
  const Index hi = std::clamp<Index>(spec.max_syllables, lo, 20);
  s.syllable_count = uniform_int(rng, lo, hi);
  for (Index i = 0; i < s.syllable_count; ++i)
    s.syllable_durations_ms.push_back(
        std::round(uniform(rng, spec.syllable_ms_lo, spec.syllable_ms_hi)));
  while (s.syllable_count > 1 && s.duration_ms() > spec.max_duration_ms) {
    s.syllable_durations_ms.pop_back();
    --s.syllable_count;
  }
  for (Index i = 0; i < s.syllable_count; ++i) {
    s.phones_per_syllable.push_back(uniform_int(rng, 2, 4));
    if (uniform(rng, 0, 1) < spec.accent_probability) {
      s.accent_positions.push_back(i);
      s.accent_strengths.push_back(uniform(rng, 0.6, 1.4));
    }
  }
  if (s.accent_positions.empty()) {
    s.accent_positions.push_back(uniform_int(rng, 0, s.syllable_count - 1));
    s.accent_strengths.push_back(1.0);
  }
  for (Index left = s.syllable_count; left > 0;) {
    const Index w = std::min(left, uniform_int(rng, 1, 3));
    s.word_lengths.push_back(w);
    left -= w;
  }
  double t = 0.0;
  for (Index i = 0; i + 1 < s.syllable_count; ++i) {
    t += s.syllable_durations_ms[i];
    if (uniform(rng, 0, 1) < spec.gap_probability) {
      const double len = std::round(uniform(rng, spec.gap_ms_lo, spec.gap_ms_hi));
      s.voicing_gaps.emplace_back(std::max(0.0, t - std::round(len / 2)), len);
    }
  }
  s.validate(spec.max_duration_ms);
  return s;
}

F0Track synth_track(const UtteranceSkeleton& skeleton, const AttitudeProfile& profile,
                    std::uint64_t seed) {
  skeleton.validate(static_cast<double>(kPaddedLength));
  profile.validate();
  const auto len = static_cast<Index>(std::round(skeleton.duration_ms()));
  std::vector<double> centres;
  std::vector<double> starts{0.0};
  for (double d : skeleton.syllable_durations_ms) starts.push_back(starts.back() + d);
  for (Index a : skeleton.accent_positions) centres.push_back(0.5 * (starts[a] + starts[a + 1]));

  std::mt19937_64 rng(mix(seed ^ 0x6a09e667f3bcc909ULL));
  std::normal_distribution<double> nd;
  const double rho = 0.95, innov = std::sqrt(1 - rho * rho);
  double e = nd(rng);

  F0Track track;
  track.f0_hz.resize(len);
  track.voicing.assign(len, 1);
  const double accent_scale = profile.range_semitones / 12.0 * profile.accent_amplitude_st;
  for (Index k = 0; k < len; ++k) {
    const double t = static_cast<double>(k);
    double st = profile.declination_st_per_s * t / 1000.0;
    for (std::size_t j = 0; j < centres.size(); ++j) {
      const double u = (t - centres[j]) / profile.accent_width_ms;
      st += accent_scale * skeleton.accent_strengths[j] * std::exp(-0.5 * u * u);
    }
    if (k > 0) e = rho * e + innov * nd(rng);
    st += profile.jitter_st * e;
    track.f0_hz[k] = profile.base_hz * std::exp2(st / 12.0);
  }
  for (const auto& [start, glen] : skeleton.voicing_gaps)
    for (auto k = static_cast<Index>(start); k < static_cast<Index>(start + glen) && k < len; ++k) {
      track.voicing[k] = 0;
      track.f0_hz[k] = 0.0;
    }
  for (std::size_t i = 0; i + 1 < starts.size(); ++i)
    track.syllables.push_back({starts[i], starts[i + 1]});
  track.attitude = profile.name;
  track.validate();
  return track;
}

ParallelPair synth_pair(const UtteranceSkeleton& skeleton, const AttitudeProfile& a,
                        const AttitudeProfile& b, std::uint64_t seed,
                        const std::string& utterance_id, const std::string& speaker_id) {
  ParallelPair pair{synth_track(skeleton, a, seed), synth_track(skeleton, b, seed)};
  for (F0Track* t : {&pair.source, &pair.target}) {
    t->utterance_id = utterance_id;
    t->speaker_id = speaker_id;
  }
  return pair;
}

std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  if (spec.utterances < 1) throw ContractError("generate_corpus: need at least one utterance");
  if (spec.profiles.size() != 2) throw ContractError("generate_corpus: need exactly two profiles");
  for (const auto& p : spec.profiles) p.validate();
  if (spec.profiles[0] == spec.profiles[1] || spec.profiles[0].name == spec.profiles[1].name)
    throw ContractError("generate_corpus: the two profiles must differ");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "f0", ec);
  fs::create_directories(fs::path(out_dir) / "syl", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const Index n = spec.utterances;
  Index n_valid = static_cast<Index>(std::llround(spec.valid_fraction * static_cast<double>(n)));
  n_valid = std::clamp<Index>(n_valid, n > 1 ? 1 : 0, n - 1);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(mix(spec.seed ^ 0x510e527fade682d1ULL));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<bool> is_valid(n, false);
  for (Index i = 0; i < n_valid; ++i) is_valid[order[i]] = true;

  double phones = 0, syl = 0, words = 0, total = 0;
  Index n_phones = 0, n_syl = 0, n_words = 0;
  json entries = json::array();
  for (Index i = 0; i < n; ++i) {
    const std::uint64_t useed = mix(spec.seed + 0x9e37ULL * static_cast<std::uint64_t>(i + 1));
    const UtteranceSkeleton sk = random_skeleton(spec.skeleton, useed);
    const std::string id = id_for(i);
    const ParallelPair pair = synth_pair(sk, spec.profiles[0], spec.profiles[1], useed, id,
                                         spec.speaker_id);
    for (const F0Track* t : {&pair.source, &pair.target}) {
      const std::string stem = id + "_" + t->attitude + ".csv";
      write_f0_csv((fs::path(out_dir) / "f0" / stem).string(), *t);
      write_syllable_csv((fs::path(out_dir) / "syl" / stem).string(), t->syllables);
      entries.push_back({{"utterance_id", id},
                         {"speaker_id", spec.speaker_id},
                         {"attitude", t->attitude},
                         {"f0_path", "f0/" + stem},
                         {"syl_path", "syl/" + stem},
                         {"split", is_valid[i] ? "valid" : "train"}});
    }
    for (Index s = 0; s < sk.syllable_count; ++s) {
      phones += sk.syllable_durations_ms[s];
      n_phones += sk.phones_per_syllable[s];
      syl += sk.syllable_durations_ms[s];
      ++n_syl;
    }
    Index first = 0;
    for (Index w : sk.word_lengths) {
      for (Index s = first; s < first + w; ++s) words += sk.syllable_durations_ms[s];
      first += w;
      ++n_words;
    }
    total += sk.duration_ms();
  }
  json manifest = {
      {"version", 1},
      {"seed", spec.seed},
      {"profiles", {profile_json(spec.profiles[0]), profile_json(spec.profiles[1])}},
      {"markers",
       {{"phone_ms", phones / static_cast<double>(n_phones)},
        {"syllable_ms", syl / static_cast<double>(n_syl)},
        {"word_ms", words / static_cast<double>(n_words)},
        {"sentence_ms", total / static_cast<double>(n)}}},
      {"entries", entries}};
  const std::string path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << manifest.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path);
  return path;
}

std::vector<AttitudeProfile> read_profiles(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const json& list = j.is_array() ? j : j.at("profiles");
  std::vector<AttitudeProfile> out;
  for (const auto& p : list) out.push_back(profile_from(p));
  return out;
}

void write_profiles(const std::string& path, const std::vector<AttitudeProfile>& profiles) {
  json list = json::array();
  for (const auto& p : profiles) list.push_back(profile_json(p));
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << json{{"profiles", list}}.dump(2) << '\n';
}

std::vector<ParallelPair> Corpus::subset(const std::string& which) const {
  std::vector<ParallelPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (split[i] == which) out.push_back(pairs[i]);
  return out;
}

Corpus load_corpus(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open " + manifest_path);
  json m;
  try {
    m = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path + ": " + e.what());
  }
  const fs::path root = fs::path(manifest_path).parent_path();
  Corpus c;
  auto warn = [&c](std::string msg) {
    std::cerr << "warning: " << msg << '\n';
    c.warnings.push_back(std::move(msg));
  };

  const json entries = m.is_array() ? m : m.value("entries", json::array());
  // attitude order = first appearance
  std::vector<std::string> attitudes;
  for (const auto& e : entries) {
    const auto a = e.at("attitude").get<std::string>();
    if (std::find(attitudes.begin(), attitudes.end(), a) == attitudes.end()) attitudes.push_back(a);
  }
  if (attitudes.size() > 2) warn("more than two attitudes; using '" + attitudes[0] + "' and '" + attitudes[1] + "'");
  if (attitudes.size() >= 1) c.attitude_a = attitudes[0];
  if (attitudes.size() >= 2) c.attitude_b = attitudes[1];

  struct Slot {
    const json* a = nullptr;
    const json* b = nullptr;
  };
  std::map<std::pair<std::string, std::string>, Slot> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& e : entries) {
    const auto key = std::make_pair(e.value("speaker_id", std::string()),
                                    e.at("utterance_id").get<std::string>());
    if (!groups.count(key)) order.push_back(key);
    Slot& s = groups[key];
    const auto att = e.at("attitude").get<std::string>();
    if (att == c.attitude_a) s.a = &e;
    else if (att == c.attitude_b) s.b = &e;
  }
  auto load = [&root](const json& e) {
    auto resolve = [&root](const std::string& p) {
      const fs::path path(p);
      return (path.is_absolute() ? path : root / path).string();
    };
    F0Track t = read_f0_csv(resolve(e.at("f0_path").get<std::string>()));
    t.syllables = read_syllable_csv(resolve(e.at("syl_path").get<std::string>()));
    t.attitude = e.at("attitude").get<std::string>();
    t.utterance_id = e.at("utterance_id").get<std::string>();
    t.speaker_id = e.value("speaker_id", std::string());
    return t;
  };
  for (const auto& key : order) {
    const Slot& s = groups[key];
    const std::string name = key.first + "/" + key.second;
    if (!s.a || !s.b) {
      warn("utterance " + name + " lacks one attitude; skipped");
      continue;
    }
    ParallelPair pair{load(*s.a), load(*s.b)};
    if (pair.source.syllables.size() != pair.target.syllables.size()) {
      warn("utterance " + name + " has mismatched syllable counts; skipped");
      continue;
    }
    try {
      pair.source.validate();
      pair.target.validate();
    } catch (const PipelineError& e) {
      warn("utterance " + name + ": " + e.what() + "; skipped");
      continue;
    }
    c.split.push_back(s.a->value("split", std::string("train")));
    c.pairs.push_back(std::move(pair));
  }
  if (m.is_object() && m.contains("markers")) {
    const json& k = m["markers"];
    c.markers = {k.value("phone_ms", 0.0), k.value("syllable_ms", 0.0), k.value("word_ms", 0.0),
                 k.value("sentence_ms", 0.0)};
  } else if (!c.pairs.empty()) {
    double syl = 0, total = 0;
    Index n_syl = 0;
    for (const auto& p : c.pairs) {
      for (const auto& s : p.source.syllables) syl += s.end_ms - s.start_ms;
      n_syl += static_cast<Index>(p.source.syllables.size());
      total += static_cast<double>(p.source.length());
    }
    c.markers.syllable_ms = n_syl ? syl / static_cast<double>(n_syl) : 0.0;
    c.markers.sentence_ms = total / static_cast<double>(c.pairs.size());
  }
  return c;
}

}  // namespace f0vc::corpus
