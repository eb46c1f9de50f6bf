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

// Acceptance run: one PASS/FAIL line per criterion. Arguments select
// criteria by number (default all); --out sets the artifact directory.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cwt_oracle.hpp"
#include "f0vc/corpus.hpp"
#include "f0vc/eval.hpp"
#include "f0vc/gradcheck.hpp"
#include "f0vc/training.hpp"

using namespace f0vc;
using ad::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

fs::path g_out;

// ------------------------------------------------------------ toy corpus

// b = a with +20% range and a steeper declination; short utterances so every
// one fits a single 512-frame window.
corpus::CorpusSpec toy_spec(Index utterances, std::uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.utterances = utterances;
  spec.seed = seed;
  spec.skeleton.min_syllables = 3;
  spec.skeleton.max_syllables = 5;
  spec.skeleton.syllable_ms_lo = 80;
  spec.skeleton.syllable_ms_hi = 110;
  spec.skeleton.max_duration_ms = 500;
  corpus::AttitudeProfile a, b;
  a.name = "a";
  b.name = "b";
  b.range_semitones = 14.4;
  b.declination_st_per_s = -3.0;
  spec.profiles = {a, b};
  return spec;
}

const corpus::Corpus& toy_corpus() {
  static const corpus::Corpus c = [] {
    const std::string manifest = corpus::generate_corpus(toy_spec(60, 7), (g_out / "toy_corpus").string());
    return corpus::load_corpus(manifest);
  }();
  return c;
}

std::vector<F0Track> all_tracks(const std::vector<ParallelPair>& pairs) {
  std::vector<F0Track> out;
  for (const auto& p : pairs) {
    out.push_back(p.source);
    out.push_back(p.target);
  }
  return out;
}

double mean_round_trip_rmse(const WaveletEncoder& enc, const std::vector<F0Track>& tracks) {
  double sum = 0.0;
  for (const auto& t : tracks) sum += eval::rmse_hz(train::round_trip(t, enc), t);
  return sum / static_cast<double>(tracks.size());
}

// Bundles shared between criteria, built on first use.
train::ModelBundle* g_bundle_a = nullptr;
train::ModelBundle* g_bundle_b = nullptr;

train::ModelBundle& pretrained(char config) {
  train::ModelBundle*& slot = config == 'A' ? g_bundle_a : g_bundle_b;
  if (!slot) {
    // same seeding as `f0vc pretrain --seed`
    const std::uint64_t seed = config == 'A' ? 11 : 21;
    slot = new train::ModelBundle(train::ArchConfig{}, train::derive_seed(seed, 1));
    train::TrainConfig cfg = train::TrainConfig::for_config(config);
    cfg.steps_pretrain = 500;
    cfg.seed = seed;
    cfg.out_dir = (g_out / (config == 'A' ? "pretrain_A" : "pretrain_B")).string();
    train::pretrain(*slot, toy_corpus().subset("train"), cfg);
  }
  return *slot;
}

// ------------------------------------------------------------ criteria

Outcome gradients() {
  const Index instances = 20;
  long checked = 0, kinks = 0;
  int failed = 0;
  std::string first_failure;
  for (Index k = 0; k < instances; ++k) {
    const std::uint64_t seed = train::derive_seed(1000, static_cast<std::uint64_t>(k));
    corpus::SkeletonSpec sk;
    sk.min_syllables = 3;
    sk.max_syllables = 5;
    sk.syllable_ms_lo = 60;
    sk.syllable_ms_hi = 100;
    sk.max_duration_ms = 500;
    corpus::AttitudeProfile a, b;
    a.name = "a";
    b.name = "b";
    b.range_semitones = 14.4;
    b.declination_st_per_s = -3.0;
    const ParallelPair raw = corpus::synth_pair(corpus::random_skeleton(sk, seed), a, b, seed,
                                                "g" + std::to_string(k));
    const train::ArchConfig arch = train::ArchConfig::tiny(4, 64, 512);
    train::ModelBundle bundle(arch, seed);
    bundle.config = 'B';
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(0.2, 1.0);
    bundle.sample_weights[train::sample_key(raw.source)] = weight(rng);
    bundle.sample_weights[train::sample_key(raw.target)] = weight(rng);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (Tensor& t : bundle.generator_parameters())
      for (Index i = 0; i < t.size(); ++i) t.value_mut()[i] += nd(rng);
    const auto prepared = train::prepare_pairs({raw}, arch.padded_length);
    const train::PreparedPair& pair = prepared.front();
    const train::TrainConfig cfg = train::TrainConfig::for_config('B');
    const std::uint64_t stream = train::derive_seed(seed, 1);

    const std::vector<Tensor> scales = bundle.encoder.parameters();
    std::vector<Tensor> cls = scales, gen = scales, disc = bundle.discriminator_parameters();
    for (const auto& t : bundle.classifier.parameters()) cls.push_back(t);
    for (const auto& t : bundle.generator_parameters()) gen.push_back(t);
    std::vector<Tensor> gen_disc = gen;
    gen_disc.insert(gen_disc.end(), disc.begin(), disc.end());

    auto pre = [&](int term) {
      return [&, term] {
        nn::Rng r(stream);
        const auto l = train::pretrain_losses(bundle, pair, cfg, r);
        return term == 0 ? l.rec : l.cl;
      };
    };
    auto gan = [&](int term) {
      return [&, term] {
        nn::Rng r(stream);
        const auto f = train::dualgan_forward(bundle, pair, r);
        if (term == 3) return train::discriminator_loss(bundle, f);
        const auto l = train::generator_losses(bundle, pair, cfg, f);
        return term == 0 ? l.ab : term == 1 ? l.adv_g : l.dual;
      };
    };
    const std::vector<std::tuple<std::string, std::function<Tensor()>, std::vector<Tensor>>> checks{
        {"L_rec", pre(0), scales},        {"L_cl", pre(1), cls},      {"L_ab", gan(0), gen},
        {"L_adv(G)", gan(1), gen_disc},   {"L_dual", gan(2), gen},    {"L_adv(D)", gan(3), disc}};
    for (const auto& [name, loss, params] : checks) {
      const auto r = testing::check_gradients(loss, params, 1e-5, 1e-3, 1e-5, 4, seed);
      checked += r.checked;
      kinks += r.kinks;
      if (!r.ok()) {
        ++failed;
        if (first_failure.empty())
          first_failure = "; instance " + std::to_string(k) + " " + name + ": " + r.worst_where;
      }
    }
  }
  return {failed == 0, std::to_string(instances) + " instances x 6 losses, " + std::to_string(checked) +
                           " entries, " + std::to_string(kinks) + " on kinks, " +
                           std::to_string(failed) + " failing checks" + first_failure};
}

Outcome wavelet_oracle() {
  double kernel_err = 0.0;
  for (double s : {0.5, 1.0, 2.7, 5.0, 17.3, 64.0, 250.0, 2000.0}) {
    const Index support = kernel_support(s, 4001);
    const WaveletKernel k = ricker_kernel(s, support);
    const double half = static_cast<double>(support - 1) / 2.0;
    for (Index i = 0; i < support; ++i)
      kernel_err = std::max(kernel_err,
                            std::abs(k.taps[i] - testing::oracle_ricker(static_cast<double>(i) - half, s)));
  }
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const ReconstructionConstants rc;
  const double prefactor = 0.125 * std::sqrt(1.2) / (3.541 * 0.867);
  double rec_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index rows = 1 + trial * 3, cols = 64 + trial * 50;
    ad::Array v(rows * cols);
    for (Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
    const double mean = 4.0 + nd(rng);
    const Tensor x = reconstruct(CoefficientPlane{Tensor(v, {rows, cols}), mean}, rc);
    for (Index t = 0; t < cols; ++t) {
      double sum = 0.0;
      for (Index r = 0; r < rows; ++r) sum += v[r * cols + t];
      rec_err = std::max(rec_err, std::abs(x.value()[t] - (prefactor * sum + mean)));
    }
  }
  const double pf = reconstruction_prefactor<double>(rc);
  const bool pass = kernel_err <= 1e-12 && rec_err <= 1e-12 && std::abs(pf - 0.04460) < 5e-6;
  return {pass, "kernel max error " + fmt(kernel_err, 3) + ", reconstruction max error " +
                    fmt(rec_err, 3) + ", prefactor " + fmt(pf, 7)};
}

Outcome round_trip() {
  const corpus::Corpus& c = toy_corpus();
  const auto tracks = all_tracks(c.pairs);
  const train::ModelBundle fresh(train::ArchConfig{}, 1);
  const double init = mean_round_trip_rmse(fresh.encoder, tracks);
  double oracle = 0.0;
  for (const auto& t : tracks) {
    const ModelInput in = prepare(t);
    const std::vector<double> x(in.signal.data(), in.signal.data() + in.valid_length);
    const auto rec = testing::dense_cwt_roundtrip(x, t.voicing, 5.0, 2000.0);
    F0Track r = t;
    for (Index k = 0; k < t.length(); ++k) r.f0_hz[k] = t.voicing[k] ? std::exp(rec[k]) : 0.0;
    oracle += eval::rmse_hz(r, t);
  }
  oracle /= static_cast<double>(tracks.size());
  const double after = mean_round_trip_rmse(pretrained('A').encoder, tracks);
  return {init <= 1.2 * oracle && after < init,
          "initial " + fmt(init) + " Hz vs dense oracle " + fmt(oracle) + " Hz (limit " +
              fmt(1.2 * oracle) + "), after 500 config_A steps " + fmt(after, 6) + " Hz (initial " +
              fmt(init, 6) + ")"};
}

Outcome ordering() {
  const corpus::Corpus& c = toy_corpus();
  const auto baseline = eval::CwtAsBaseline::fit(c.subset("train"), 10);
  const auto tracks = all_tracks(c.subset("valid"));
  const double learned = mean_round_trip_rmse(pretrained('A').encoder, tracks);
  double base = 0.0;
  for (const auto& t : tracks) base += eval::rmse_hz(baseline.round_trip(t), t);
  base /= static_cast<double>(tracks.size());
  return {learned <= base * 1.01, "held-out reconstruction: learned 32 scales " + fmt(learned) +
                                      " Hz, CWT-AS 10 scales " + fmt(base) + " Hz"};
}

Outcome conversion() {
  const corpus::Corpus& c = toy_corpus();
  train::ModelBundle& bundle = pretrained('A');
  train::TrainConfig cfg = train::TrainConfig::for_config('A');
  cfg.steps_dualgan = 2000;
  cfg.seed = 12;
  cfg.out_dir = (g_out / "dualgan_A").string();
  train::train_dualgan(bundle, c.subset("train"), cfg);
  const auto baseline = eval::CwtAsBaseline::fit(c.subset("train"), 10);
  const eval::EvalReport r = eval::evaluate(bundle, c.subset("valid"), &baseline, 13);
  eval::write_report(r, (g_out / "dualgan_A").string());
  const double gain = 1.0 - r.transformation / r.identity;
  return {gain >= 0.15, "held-out transformation " + fmt(r.transformation) + " Hz (a->b " +
                            fmt(r.transformation_ab) + ", b->a " + fmt(r.transformation_ba) +
                            ") vs identity " + fmt(r.identity) + " Hz after 2000 steps: " +
                            fmt(100 * gain, 3) + "% better"};
}

// Attitudes that differ in contour shape: the encoder removes the mean, so
// a base offset alone would be invisible to the classifier.
corpus::CorpusSpec separable_spec() {
  corpus::CorpusSpec spec = toy_spec(160, 9);
  spec.profiles[1].base_hz = 200.0 * std::exp2(4.0 / 12.0);
  spec.profiles[1].range_semitones = 36.0;
  spec.profiles[1].declination_st_per_s = -8.0;
  return spec;
}

Outcome classifier() {
  const corpus::Corpus c = corpus::load_corpus(
      corpus::generate_corpus(separable_spec(), (g_out / "separable_corpus").string()));
  train::ModelBundle bundle(train::ArchConfig{}, train::derive_seed(31, 1));
  train::TrainConfig cfg = train::TrainConfig::for_config('B');
  cfg.steps_pretrain = 800;
  cfg.seed = 31;
  cfg.out_dir = (g_out / "pretrain_B_separable").string();
  train::pretrain(bundle, c.subset("train"), cfg);
  const double acc = train::classifier_accuracy(bundle, c.subset("valid"));
  return {acc >= 0.9, "held-out block accuracy " + fmt(acc) + " on " +
                          std::to_string(c.subset("valid").size()) + " held-out pairs after " +
                          std::to_string(cfg.steps_pretrain) + " config_B steps"};
}

Outcome scale_spread() {
  const corpus::Corpus& c = toy_corpus();
  const train::ModelBundle& bundle = pretrained('B');
  const auto baseline = eval::CwtAsBaseline::fit(c.subset("train"), 10);
  const auto learned = bundle.encoder.bank().scale_values();
  const auto selected = baseline.selected_scales();
  const fs::path dir = g_out / "scales_B";
  eval::scale_histogram(learned, c.markers, dir.string(), selected);
  std::ifstream svg_in(dir / "scales.svg"), csv_in(dir / "scales.csv");
  std::stringstream svg;
  svg << svg_in.rdbuf();
  Index rows = -1;
  for (std::string line; std::getline(csv_in, line);) ++rows;
  bool markers = c.markers.phone_ms > 0 && c.markers.syllable_ms > 0 && c.markers.word_ms > 0 &&
                 c.markers.sentence_ms > 0;
  for (const char* label : {">P<", ">SY<", ">W<", ">SE<"})
    markers = markers && svg.str().find(label) != std::string::npos;
  const double s_learned = eval::spread(learned), s_base = eval::spread(selected);
  return {s_learned >= s_base && rows == 32 && markers,
          "config_B spread " + fmt(s_learned, 6) + " ms vs CWT-AS selected " + fmt(s_base, 6) +
              " ms; scales.csv rows " + std::to_string(rows) + ", markers " + (markers ? "present" : "missing")};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Whole pipeline on small networks, twice from scratch.
void pipeline_run(const fs::path& dir) {
  fs::remove_all(dir);
  const std::string manifest = corpus::generate_corpus(toy_spec(8, 21), (dir / "corpus").string());
  const corpus::Corpus c = corpus::load_corpus(manifest);
  train::ModelBundle bundle(train::ArchConfig::tiny(8, 64, 512), 5);
  train::TrainConfig pre = train::TrainConfig::for_config('B');
  pre.steps_pretrain = 10;
  pre.seed = 6;
  pre.out_dir = dir.string();
  train::pretrain(bundle, c.subset("train"), pre);
  train::TrainConfig gan = train::TrainConfig::for_config('B');
  gan.steps_dualgan = 10;
  gan.seed = 7;
  gan.out_dir = dir.string();
  train::train_dualgan(bundle, c.subset("train"), gan);
  const auto baseline = eval::CwtAsBaseline::fit(c.subset("train"), 4, 5.0, 2000.0, 0.125, 512);
  const auto r = eval::evaluate(bundle, c.subset("valid"), &baseline, 8);
  eval::write_report(r, (dir / "eval").string());
  eval::scale_histogram(r.learned_scales, c.markers, (dir / "eval").string(), r.baseline_scales);
}

Outcome determinism() {
  const fs::path one = g_out / "determinism_1", two = g_out / "determinism_2";
  pipeline_run(one);
  pipeline_run(two);
  std::vector<std::string> differing;
  const std::vector<fs::path> files{"loss_pretrain.csv",   "loss_dualgan.csv",     "eval/report.csv",
                                    "eval/summary.csv",    "eval/scales.csv",      "corpus/manifest.json"};
  for (const auto& f : files) {
    const std::string a = slurp(one / f), b = slurp(two / f);
    if (a.empty() || a != b) differing.push_back(f.string());
  }
  std::string detail = "loss logs (10 + 10 steps), metric CSVs and manifest ";
  if (differing.empty()) return {true, detail + "identical across two runs"};
  for (const auto& d : differing) detail += " " + d;
  return {false, detail + " differ or are missing:"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  g_out = fs::current_path() / "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      wanted.insert(std::stoi(arg));
    }
  }
  fs::create_directories(g_out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradients},
      {"wavelet oracle", wavelet_oracle},
      {"round-trip reconstruction", round_trip},
      {"reconstruction ordering vs CWT-AS", ordering},
      {"conversion beats identity by 15%", conversion},
      {"classifier accuracy (config_B)", classifier},
      {"scale spread and plot", scale_spread},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": "
              << o.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
    failures += !o.pass;
  }
  delete g_bundle_a;
  delete g_bundle_b;
  return failures == 0 ? 0 : 1;
}
