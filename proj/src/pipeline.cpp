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

#include "f0vc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc {

Index F0Track::voiced_count() const {
  return static_cast<Index>(std::count(voicing.begin(), voicing.end(), 1));
}

void F0Track::validate() const {
  const std::string who = "track '" + utterance_id + "/" + attitude + "': ";
  if (f0_hz.size() != voicing.size())
    throw PipelineError(who + "f0 and voicing lengths differ");
  for (std::size_t i = 0; i < f0_hz.size(); ++i) {
    if (voicing[i] > 1) throw PipelineError(who + "voicing must be 0 or 1");
    if (voicing[i] && !(f0_hz[i] > 0.0 && std::isfinite(f0_hz[i])))
      throw PipelineError(who + "voiced frame " + std::to_string(i) +
                          " has non-positive F0");
  }
  double prev_end = 0.0;
  for (const Syllable& s : syllables) {
    if (!(s.end_ms > s.start_ms) || s.start_ms < prev_end ||
        s.end_ms > static_cast<double>(length()) * kSamplePeriodMs)
      throw PipelineError(who + "syllables must be sorted, non-overlapping "
                                "and inside the track");
    prev_end = s.end_ms;
  }
}

ModelInput prepare(const F0Track& track, Index padded_length) {
  track.validate();
  const Index len = track.length();
  if (len > padded_length)
    throw PipelineError("track '" + track.utterance_id + "' is " +
                        std::to_string(len) + " ms, longer than " +
                        std::to_string(padded_length) + " ms");
  std::vector<Index> voiced;
  for (Index i = 0; i < len; ++i)
    if (track.voicing[i]) voiced.push_back(i);
  if (voiced.empty())
    throw PipelineError("track '" + track.utterance_id + "' has no voiced frame");

  ModelInput in;
  in.signal = ad::Array::Zero(padded_length);
  in.voicing_mask = ad::Array::Zero(padded_length);
  in.valid_length = len;
  double sum = 0.0;
  for (Index i : voiced) {
    in.signal[i] = std::log(track.f0_hz[i]);
    in.voicing_mask[i] = 1.0;
    sum += in.signal[i];
  }
  in.mean_logf0 = sum / static_cast<double>(voiced.size());
  for (Index i = 0; i < voiced.front(); ++i) in.signal[i] = in.signal[voiced.front()];
  for (Index i = voiced.back() + 1; i < len; ++i) in.signal[i] = in.signal[voiced.back()];
  for (std::size_t j = 0; j + 1 < voiced.size(); ++j) {
    const Index a = voiced[j], b = voiced[j + 1];
    const double la = in.signal[a], lb = in.signal[b];
    for (Index i = a + 1; i < b; ++i)
      in.signal[i] = la + (lb - la) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  return in;
}

namespace {

struct Knot {
  double target;
  double source;
};

void check_pair(const ParallelPair& pair) {
  const F0Track& s = pair.source;
  const F0Track& t = pair.target;
  if (s.utterance_id != t.utterance_id || s.speaker_id != t.speaker_id)
    throw ContractError("pair members differ in utterance or speaker");
  if (s.attitude == t.attitude)
    throw ContractError("pair members share attitude '" + s.attitude + "'");
  if (s.syllables.size() != t.syllables.size())
    throw AlignmentError("utterance '" + s.utterance_id + "': " +
                         std::to_string(s.syllables.size()) + " vs " +
                         std::to_string(t.syllables.size()) + " syllables");
}

}  // namespace

ParallelPair align_pair(const ParallelPair& pair) {
  check_pair(pair);
  pair.source.validate();
  pair.target.validate();
  const F0Track& src = pair.source;
  const F0Track& tgt = pair.target;
  if (src.length() == 0 || tgt.length() == 0)
    throw PipelineError("cannot align an empty track");

  std::vector<Knot> raw{{0.0, 0.0}};
  for (std::size_t i = 0; i < src.syllables.size(); ++i) {
    raw.push_back({tgt.syllables[i].start_ms, src.syllables[i].start_ms});
    raw.push_back({tgt.syllables[i].end_ms, src.syllables[i].end_ms});
  }
  raw.push_back({static_cast<double>(tgt.length()), static_cast<double>(src.length())});
  std::vector<Knot> knots;
  for (const Knot& k : raw)
    if (knots.empty() || k.target > knots.back().target) knots.push_back(k);
  if (knots.size() < 2) throw AlignmentError("degenerate syllable timing");

  ParallelPair out;
  out.target = tgt;
  F0Track& w = out.source;
  w.attitude = src.attitude;
  w.utterance_id = src.utterance_id;
  w.speaker_id = src.speaker_id;
  w.syllables = tgt.syllables;
  const Index len = tgt.length();
  w.f0_hz.assign(static_cast<std::size_t>(len), 0.0);
  w.voicing.assign(static_cast<std::size_t>(len), 0);
  const double last = static_cast<double>(src.length() - 1);
  std::size_t seg = 0;
  for (Index t = 0; t < len; ++t) {
    const double tt = static_cast<double>(t);
    while (seg + 2 < knots.size() && tt >= knots[seg + 1].target) ++seg;
    const Knot& a = knots[seg];
    const Knot& b = knots[seg + 1];
    double u = a.source + (tt - a.target) * (b.source - a.source) / (b.target - a.target);
    u = std::clamp(u, 0.0, last);
    const auto nearest = static_cast<Index>(std::lround(u));
    if (!src.voicing[nearest]) continue;
    w.voicing[t] = 1;
    const auto i0 = static_cast<Index>(std::floor(u));
    const Index i1 = std::min<Index>(i0 + 1, src.length() - 1);
    const double frac = u - static_cast<double>(i0);
    if (src.voicing[i0] && src.voicing[i1])
      w.f0_hz[t] = src.f0_hz[i0] + frac * (src.f0_hz[i1] - src.f0_hz[i0]);
    else
      w.f0_hz[t] = src.f0_hz[nearest];
  }
  return out;
}

std::vector<Window> slice_windows(const ad::Tensor& plane, Index valid_length,
                                  Index window_width) {
  if (valid_length <= 0) throw ContractError("slice_windows: valid_length must be positive");
  if (window_width <= 0) throw ContractError("slice_windows: window width must be positive");
  if (plane.rank() != 2 || valid_length > plane.dim(1))
    throw DimensionError("slice_windows: valid_length exceeds the plane");
  std::vector<Window> out;
  for (Index start = 0; start < valid_length; start += window_width) {
    const Index width = std::min(window_width, valid_length - start);
    // Columns past the valid region are zeroed even if the plane has data.
    ad::Tensor block = ad::slice_cols(plane, start, window_width);
    if (width < window_width) {
      ad::Array keep = ad::Array::Zero(block.size());
      for (Index r = 0; r < block.dim(0); ++r)
        keep.segment(r * window_width, width).setOnes();
      block = ad::mul_const(block, keep);
    }
    out.push_back({block, width});
  }
  return out;
}

ad::Tensor unslice(const std::vector<Window>& windows) {
  std::vector<ad::Tensor> blocks;
  for (const Window& w : windows) blocks.push_back(w.block);
  return unslice(blocks, windows);
}

ad::Tensor unslice(const std::vector<ad::Tensor>& blocks,
                   const std::vector<Window>& layout) {
  if (blocks.size() != layout.size() || blocks.empty())
    throw ContractError("unslice: block count mismatch");
  std::vector<Index> widths;
  for (const Window& w : layout) widths.push_back(w.width);
  return ad::concat_cols(blocks, widths);
}

F0Track resample_to_1ms(const std::vector<double>& time_ms,
                        const std::vector<double>& f0_hz,
                        const std::vector<std::uint8_t>& voiced) {
  if (time_ms.size() != f0_hz.size() || time_ms.size() != voiced.size())
    throw PipelineError("resample: column lengths differ");
  F0Track track;
  if (time_ms.empty()) return track;
  for (std::size_t i = 1; i < time_ms.size(); ++i)
    if (!(time_ms[i] > time_ms[i - 1]))
      throw PipelineError("resample: times must increase");
  bool already = time_ms.front() == 0.0;
  for (std::size_t i = 0; already && i < time_ms.size(); ++i)
    already = time_ms[i] == static_cast<double>(i);
  if (already) {
    track.f0_hz = f0_hz;
    track.voicing = voiced;
    for (std::size_t i = 0; i < voiced.size(); ++i)
      if (!voiced[i]) track.f0_hz[i] = 0.0;
    return track;
  }
  const auto len = static_cast<Index>(std::floor(time_ms.back())) + 1;
  track.f0_hz.assign(static_cast<std::size_t>(len), 0.0);
  track.voicing.assign(static_cast<std::size_t>(len), 0);
  std::size_t j = 0;
  for (Index k = 0; k < len; ++k) {
    const double t = static_cast<double>(k);
    while (j + 1 < time_ms.size() && time_ms[j + 1] <= t) ++j;
    if (t < time_ms.front()) continue;
    const std::size_t j1 = std::min(j + 1, time_ms.size() - 1);
    const bool right = j1 != j && (time_ms[j1] - t) < (t - time_ms[j]);
    const std::size_t near = right ? j1 : j;
    if (!voiced[near]) continue;
    track.voicing[k] = 1;
    if (voiced[j] && voiced[j1] && j1 != j) {
      const double f = (t - time_ms[j]) / (time_ms[j1] - time_ms[j]);
      track.f0_hz[k] = f0_hz[j] + f * (f0_hz[j1] - f0_hz[j]);
    } else {
      track.f0_hz[k] = f0_hz[near];
    }
  }
  return track;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw PipelineError(path + ":" + std::to_string(line) + ": bad number '" + cell + "'");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return is;
}

void expect_header(std::istream& is, const std::string& path,
                   const std::string& header) {
  std::string line;
  if (!std::getline(is, line)) throw PipelineError(path + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw PipelineError(path + ":1: expected header '" + header + "'");
}

}  // namespace

F0Track read_f0_csv(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_header(is, path, "time_ms,f0_hz,voiced");
  std::vector<double> t, f;
  std::vector<std::uint8_t> v;
  std::string line;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw PipelineError(path + ":" + std::to_string(n) + ": expected 3 columns");
    t.push_back(parse_number(cells[0], path, n));
    f.push_back(parse_number(cells[1], path, n));
    const double vv = parse_number(cells[2], path, n);
    if (vv != 0.0 && vv != 1.0)
      throw PipelineError(path + ":" + std::to_string(n) + ": voiced must be 0 or 1");
    v.push_back(static_cast<std::uint8_t>(vv));
    if (v.back() && !(f.back() > 0.0))
      throw PipelineError(path + ":" + std::to_string(n) + ": voiced frame with F0 <= 0");
  }
  try {
    return resample_to_1ms(t, f, v);
  } catch (const PipelineError& e) {
    throw PipelineError(path + ": " + e.what());
  }
}

void write_f0_csv(const std::string& path, const F0Track& track) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "time_ms,f0_hz,voiced\n" << std::setprecision(17);
  for (Index i = 0; i < track.length(); ++i)
    os << i << ',' << track.f0_hz[i] << ',' << int(track.voicing[i]) << '\n';
  if (!os) throw IoError("failed writing " + path);
}

std::vector<Syllable> read_syllable_csv(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_header(is, path, "syl_index,start_ms,end_ms");
  std::vector<Syllable> out;
  std::string line;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw PipelineError(path + ":" + std::to_string(n) + ": expected 3 columns");
    const double idx = parse_number(cells[0], path, n);
    if (idx != static_cast<double>(out.size()))
      throw PipelineError(path + ":" + std::to_string(n) + ": syllable index out of order");
    Syllable s{parse_number(cells[1], path, n), parse_number(cells[2], path, n)};
    if (!(s.end_ms > s.start_ms))
      throw PipelineError(path + ":" + std::to_string(n) + ": empty syllable");
    out.push_back(s);
  }
  return out;
}

void write_syllable_csv(const std::string& path,
                        const std::vector<Syllable>& syllables) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "syl_index,start_ms,end_ms\n" << std::setprecision(17);
  for (std::size_t i = 0; i < syllables.size(); ++i)
    os << i << ',' << syllables[i].start_ms << ',' << syllables[i].end_ms << '\n';
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace f0vc
