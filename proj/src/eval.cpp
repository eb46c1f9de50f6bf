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

#include "f0vc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc::eval {
namespace fs = std::filesystem;
using ad::Tensor;
using train::Direction;

double rmse_hz(const F0Track& pred, const F0Track& ref) {
  if (pred.length() != ref.length())
    throw EvalError("rmse_hz: tracks differ in length (" + std::to_string(pred.length()) + " vs " +
                    std::to_string(ref.length()) + ")");
  double sum = 0.0;
  Index n = 0;
  for (Index k = 0; k < pred.length(); ++k) {
    if (!pred.voicing[k] || !ref.voicing[k]) continue;
    const double d = pred.f0_hz[k] - ref.f0_hz[k];
    sum += d * d;
    ++n;
  }
  if (n == 0) throw EvalError("rmse_hz: no frame is voiced in both tracks");
  return std::sqrt(sum / static_cast<double>(n));
}

// ------------------------------------------------------------------ CWT-AS

namespace {

CoefficientPlane fixed_encode(const ModelInput& in, const std::vector<double>& scales,
                              const ReconstructionConstants& rc) {
  std::span<const double> signal(in.signal.data(), static_cast<std::size_t>(in.signal.size()));
  return encode_with_scales(signal, in.valid_length, in.mean_logf0, Tensor::vector(scales),
                            RowNorm::kClassic, rc);
}

}  // namespace

CwtAsBaseline CwtAsBaseline::fit(const std::vector<ParallelPair>& pairs, Index count, double lo,
                                 double hi, double dj, Index padded_length) {
  ad::NoGradGuard guard;
  CwtAsBaseline b;
  b.grid = dense_scale_grid(lo, hi, dj);
  b.padded_length = padded_length;
  std::vector<CoefficientPlane> pa, pb;
  std::vector<ad::Array> masks;
  for (const auto& raw : pairs) {
    const ParallelPair al = align_pair(raw);
    const ModelInput a = prepare(al.source, padded_length), t = prepare(al.target, padded_length);
    const Index len = a.valid_length;
    auto cut = [len](const CoefficientPlane& p) {
      return CoefficientPlane{ad::slice_cols(p.coeffs, 0, len), p.signal_mean};
    };
    pa.push_back(cut(fixed_encode(a, b.grid, b.constants)));
    pb.push_back(cut(fixed_encode(t, b.grid, b.constants)));
    masks.push_back(a.voicing_mask.head(len) * t.voicing_mask.head(len));
  }
  b.selected = adaptive_scale_select(pa, pb, masks, count);
  return b;
}

std::vector<double> CwtAsBaseline::selected_scales() const {
  std::vector<double> out;
  for (Index i : selected) out.push_back(grid[static_cast<std::size_t>(i)]);
  return out;
}

F0Track CwtAsBaseline::round_trip(const F0Track& track) const {
  ad::NoGradGuard guard;
  const ModelInput in = prepare(track, padded_length);
  const CoefficientPlane p = fixed_encode(in, selected_scales(), constants);
  const Tensor rec = train::reconstruct_valid(p.coeffs, in.valid_length, in.mean_logf0, constants);
  F0Track out = track;
  for (Index k = 0; k < track.length(); ++k)
    out.f0_hz[k] = track.voicing[k] ? std::exp(rec.value()[k]) : 0.0;
  return out;
}

// --------------------------------------------------------------- evaluate

EvalReport evaluate(const train::ModelBundle& bundle, const std::vector<ParallelPair>& pairs,
                    const CwtAsBaseline* baseline, std::uint64_t seed, EvalHooks hooks) {
  if (pairs.empty()) throw EvalError("evaluate: no pairs");
  EvalReport r;
  r.config = bundle.config;
  r.untrained = !bundle.trained();
  if (r.untrained) std::cerr << "warning: evaluating a bundle without dualgan training\n";
  if (!hooks.convert)
    hooks.convert = [&bundle](const F0Track& t, Direction d, std::uint64_t s) {
      return train::convert(t, bundle, d, s);
    };
  if (!hooks.reconstruct)
    hooks.reconstruct = [&bundle](const F0Track& t) {
      return train::round_trip(t, bundle.encoder, bundle.arch.padded_length);
    };
  double rec = 0, base = 0, ab = 0, ba = 0, id = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ParallelPair& raw = pairs[i];
    const ParallelPair al = align_pair(raw);
    UtteranceMetrics m;
    m.utterance_id = raw.source.utterance_id;
    m.rec_a = rmse_hz(hooks.reconstruct(raw.source), raw.source);
    m.rec_b = rmse_hz(hooks.reconstruct(raw.target), raw.target);
    if (baseline) {
      m.baseline_rec_a = rmse_hz(baseline->round_trip(raw.source), raw.source);
      m.baseline_rec_b = rmse_hz(baseline->round_trip(raw.target), raw.target);
    }
    m.trans_ab = rmse_hz(hooks.convert(al.source, Direction::kAtoB, train::derive_seed(seed, 2 * i)),
                         al.target);
    m.trans_ba = rmse_hz(hooks.convert(al.target, Direction::kBtoA, train::derive_seed(seed, 2 * i + 1)),
                         al.source);
    m.identity = rmse_hz(al.source, al.target);
    rec += 0.5 * (m.rec_a + m.rec_b);
    base += 0.5 * (m.baseline_rec_a + m.baseline_rec_b);
    ab += m.trans_ab;
    ba += m.trans_ba;
    id += m.identity;
    r.rows.push_back(m);
  }
  const auto n = static_cast<double>(pairs.size());
  r.reconstruction = rec / n;
  r.baseline_reconstruction = baseline ? base / n : NAN;
  r.transformation_ab = ab / n;
  r.transformation_ba = ba / n;
  r.transformation = 0.5 * (r.transformation_ab + r.transformation_ba);
  r.identity = id / n;
  r.learned_scales = bundle.encoder.bank().scale_values();
  if (baseline) r.baseline_scales = baseline->selected_scales();
  return r;
}

// ---------------------------------------------------------------- writing

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed2(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

}  // namespace

std::string format_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(26) << "RMSE (Hz)" << std::right << std::setw(16)
     << "Reconstruction" << std::setw(16) << "Transformation" << '\n';
  auto line = [&os](const std::string& name, double rec, double trans) {
    os << std::left << std::setw(26) << name << std::right << std::setw(16) << fixed2(rec)
       << std::setw(16) << fixed2(trans) << '\n';
  };
  line("identity copy", 0.0, r.identity);
  line("CWT-AS baseline", r.baseline_reconstruction, NAN);
  line(std::string("config_") + r.config, r.reconstruction, r.transformation);
  os << "  a->b " << fixed2(r.transformation_ab) << "  b->a " << fixed2(r.transformation_ba)
     << "  utterances " << r.rows.size() << (r.untrained ? "  (untrained bundle)" : "") << '\n';
  return os.str();
}

void write_report(const EvalReport& r, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  {
    auto os = open_out(fs::path(out_dir) / "report.csv");
    os << "utterance_id,rec_a,rec_b,baseline_rec_a,baseline_rec_b,trans_ab,trans_ba,identity\n";
    for (const auto& m : r.rows)
      os << m.utterance_id << ',' << num(m.rec_a) << ',' << num(m.rec_b) << ','
         << num(m.baseline_rec_a) << ',' << num(m.baseline_rec_b) << ',' << num(m.trans_ab) << ','
         << num(m.trans_ba) << ',' << num(m.identity) << '\n';
  }
  {
    auto os = open_out(fs::path(out_dir) / "summary.csv");
    os << "system,reconstruction_hz,transformation_hz,transformation_ab_hz,transformation_ba_hz\n";
    os << "identity,0," << num(r.identity) << ',' << num(r.identity) << ',' << num(r.identity) << '\n';
    os << "cwt_as_baseline," << num(r.baseline_reconstruction) << ",,,\n";
    os << "config_" << r.config << ',' << num(r.reconstruction) << ',' << num(r.transformation) << ','
       << num(r.transformation_ab) << ',' << num(r.transformation_ba) << '\n';
  }
  auto os = open_out(fs::path(out_dir) / "table.txt");
  os << format_table(r);
}

double spread(const std::vector<double>& scales) {
  if (scales.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(scales.begin(), scales.end());
  return *hi - *lo;
}

void scale_histogram(const std::vector<double>& scales, const corpus::DurationMarkers& markers,
                     const std::string& out_dir, const std::vector<double>& baseline_scales) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  {
    auto os = open_out(fs::path(out_dir) / "scales.csv");
    os << "index,scale_ms\n";
    for (std::size_t i = 0; i < scales.size(); ++i) os << i << ',' << num(scales[i]) << '\n';
  }
  if (!baseline_scales.empty()) {
    auto os = open_out(fs::path(out_dir) / "baseline_scales.csv");
    os << "rank,scale_ms\n";
    for (std::size_t i = 0; i < baseline_scales.size(); ++i)
      os << i << ',' << num(baseline_scales[i]) << '\n';
  }

  // log axis from 1 ms to 10 s
  const double w = 760, h = 300, left = 50, right = 20, top = 30;
  const double lo = 0.0, hi = 4.0;
  auto x_of = [&](double ms) {
    const double v = std::clamp(std::log10(std::max(ms, 1.0)), lo, hi);
    return left + (w - left - right) * (v - lo) / (hi - lo);
  };
  // histogram with 4 bins per decade
  const int bins = 16;
  std::vector<int> learned(bins, 0), base(bins, 0);
  auto bin_of = [&](double ms) {
    return std::clamp(static_cast<int>(std::floor(std::log10(std::max(ms, 1.0)) * 4)), 0, bins - 1);
  };
  for (double s : scales) ++learned[bin_of(s)];
  for (double s : baseline_scales) ++base[bin_of(s)];
  const int peak = std::max(1, std::max(*std::max_element(learned.begin(), learned.end()),
                                        *std::max_element(base.begin(), base.end())));
  const double plot_h = h - top - 60;
  auto os = open_out(fs::path(out_dir) / "scales.svg");
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">Scale distribution (ms)</text>\n";
  const double base_y = top + plot_h;
  os << "<line x1=\"" << left << "\" y1=\"" << base_y << "\" x2=\"" << w - right << "\" y2=\""
     << base_y << "\" stroke=\"black\"/>\n";
  for (int d = 0; d <= 4; ++d) {
    const double x = x_of(std::pow(10.0, d));
    os << "<line x1=\"" << x << "\" y1=\"" << base_y << "\" x2=\"" << x << "\" y2=\"" << base_y + 5
       << "\" stroke=\"black\"/>\n<text x=\"" << x << "\" y=\"" << base_y + 18
       << "\" text-anchor=\"middle\">" << static_cast<long>(std::pow(10.0, d)) << "</text>\n";
  }
  auto draw_bins = [&](const std::vector<int>& counts, const char* colour, double offset) {
    for (int b = 0; b < bins; ++b) {
      if (!counts[b]) continue;
      const double x0 = x_of(std::pow(10.0, b / 4.0)), x1 = x_of(std::pow(10.0, (b + 1) / 4.0));
      const double bw = (x1 - x0) / 2 - 1;
      const double bh = plot_h * counts[b] / peak;
      os << "<rect x=\"" << x0 + offset * (x1 - x0) / 2 << "\" y=\"" << base_y - bh << "\" width=\""
         << bw << "\" height=\"" << bh << "\" fill=\"" << colour << "\" opacity=\"0.8\"/>\n";
    }
  };
  draw_bins(learned, "#2b6cb0", 0.0);
  draw_bins(base, "#c05621", 1.0);
  // strip of individual values under the axis
  for (double s : scales)
    os << "<line x1=\"" << x_of(s) << "\" y1=\"" << base_y + 24 << "\" x2=\"" << x_of(s) << "\" y2=\""
       << base_y + 34 << "\" stroke=\"#2b6cb0\"/>\n";
  for (double s : baseline_scales)
    os << "<line x1=\"" << x_of(s) << "\" y1=\"" << base_y + 36 << "\" x2=\"" << x_of(s) << "\" y2=\""
       << base_y + 46 << "\" stroke=\"#c05621\"/>\n";
  const std::pair<const char*, double> marks[] = {{"P", markers.phone_ms},
                                                  {"SY", markers.syllable_ms},
                                                  {"W", markers.word_ms},
                                                  {"SE", markers.sentence_ms}};
  for (const auto& [label, ms] : marks) {
    if (!(ms > 0)) continue;
    const double x = x_of(ms);
    os << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << base_y
       << "\" stroke=\"#444\" stroke-dasharray=\"4,3\"/>\n<text x=\"" << x << "\" y=\"" << top - 3
       << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  os << "<text x=\"" << w - right << "\" y=\"" << h - 4 << "\" text-anchor=\"end\">"
     << "learned (blue)" << (baseline_scales.empty() ? "" : ", CWT-AS selected (orange)")
     << "</text>\n</svg>\n";
}

}  // namespace f0vc::eval
