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

// f0vc command line: corpus synthesis, training, conversion, evaluation.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>

#include "f0vc/corpus.hpp"
#include "f0vc/error.hpp"
#include "f0vc/eval.hpp"
#include "f0vc/training.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace f0vc;

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

// A directory is taken to hold manifest.json.
std::string manifest_path(const std::string& corpus) {
  return fs::is_directory(corpus) ? (fs::path(corpus) / "manifest.json").string() : corpus;
}

corpus::Corpus load_checked(const std::string& corpus_arg) {
  corpus::Corpus c = corpus::load_corpus(manifest_path(corpus_arg));
  for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
  if (c.pairs.empty()) throw ValidationError("corpus " + corpus_arg + " has no complete pairs");
  return c;
}

std::vector<ParallelPair> split_or_all(const corpus::Corpus& c, const std::string& which) {
  if (which == "all") return c.pairs;
  auto pairs = c.subset(which);
  if (pairs.empty()) throw ValidationError("corpus has no '" + which + "' pairs");
  return pairs;
}

train::ArchConfig arch_named(const std::string& name) {
  if (name == "full") return train::ArchConfig{};
  if (name == "tiny") return train::ArchConfig::tiny();
  throw ValidationError("unknown architecture '" + name + "' (full or tiny)");
}

char config_letter(const std::string& s) {
  if (s == "A" || s == "a") return 'A';
  if (s == "B" || s == "b") return 'B';
  throw ValidationError("--config must be A or B, got '" + s + "'");
}

std::function<void(const losses::LossRow&)> progress(Index every) {
  return [every](const losses::LossRow& r) {
    if (every > 0 && (r.step + 1) % every == 0)
      std::cerr << r.phase << " step " << r.step + 1 << "  total " << r.total << '\n';
  };
}

// Values from --config-file fill options that were not given on the
// command line. Keys are long option names; a nested object named after the
// subcommand overrides top-level keys.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config file " + path + " must hold a JSON object");
  json merged = j;
  if (j.contains(sub->get_name()) && j[sub->get_name()].is_object()) merged.update(j[sub->get_name()]);
  std::vector<std::string> known;
  for (CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    known.push_back(name);
    if (opt->count() > 0 || !merged.contains(name)) continue;
    const json& v = merged[name];
    if (v.is_boolean()) {
      opt->add_result(v.get<bool>() ? "true" : "false");
    } else if (v.is_string()) {
      opt->add_result(v.get<std::string>());
    } else if (v.is_number()) {
      opt->add_result(v.dump());
    } else {
      throw ValidationError("config file key '" + name + "' must be a scalar");
    }
    opt->run_callback();
  }
  for (const auto& [key, value] : merged.items()) {
    if (value.is_object()) continue;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("config file key '" + key + "' is not an option of " + sub->get_name());
  }
}

json resolved_options(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->get_type_size() == 0) {
      j[name] = opt->as<bool>();
    } else {
      j[name] = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
    }
  }
  return j;
}

struct Options {
  std::string config_file;
  std::uint64_t seed = 1;
  std::string out;

  // synth-corpus
  Index n = 60;
  std::string profiles;
  Index min_syllables = 3, max_syllables = 20;
  double syllable_ms_lo = 120, syllable_ms_hi = 260, max_duration_ms = 3800;
  double valid_fraction = 0.2;

  // pretrain / train
  std::string corpus, config = "A", from, arch = "full", split = "train";
  Index steps = -1;
  double lr = 1e-4;
  Index checkpoint_every = 0, log_every = 50;

  // convert / evaluate / scales
  std::string bundle, track, direction = "a2b", eval_split = "valid";
  Index baseline_scales = 10;
};

json run_synth(const Options& o) {
  corpus::CorpusSpec spec;
  spec.utterances = o.n;
  spec.seed = o.seed;
  spec.valid_fraction = o.valid_fraction;
  spec.skeleton.min_syllables = o.min_syllables;
  spec.skeleton.max_syllables = o.max_syllables;
  spec.skeleton.syllable_ms_lo = o.syllable_ms_lo;
  spec.skeleton.syllable_ms_hi = o.syllable_ms_hi;
  spec.skeleton.max_duration_ms = o.max_duration_ms;
  if (!o.profiles.empty()) {
    spec.profiles = corpus::read_profiles(o.profiles);
  } else {
    corpus::AttitudeProfile a, b;
    a.name = "a";
    b.name = "b";
    b.range_semitones = 14.4;
    b.declination_st_per_s = -3.0;
    spec.profiles = {a, b};
  }
  const std::string manifest = corpus::generate_corpus(spec, o.out);
  std::cout << "wrote " << manifest << '\n';
  json j;
  j["manifest"] = manifest;
  json profiles = json::array();
  for (const auto& p : spec.profiles)
    profiles.push_back({{"name", p.name},
                        {"base_hz", p.base_hz},
                        {"range_semitones", p.range_semitones},
                        {"declination_st_per_s", p.declination_st_per_s},
                        {"accent_amplitude_st", p.accent_amplitude_st},
                        {"accent_width_ms", p.accent_width_ms},
                        {"jitter_st", p.jitter_st}});
  j["profiles"] = profiles;
  return j;
}

json run_pretrain(const Options& o) {
  const corpus::Corpus c = load_checked(o.corpus);
  const auto pairs = split_or_all(c, o.split);
  train::TrainConfig cfg = train::TrainConfig::for_config(config_letter(o.config));
  cfg.seed = o.seed;
  cfg.lr = o.lr;
  if (o.steps >= 0) cfg.steps_pretrain = o.steps;
  cfg.checkpoint_every = o.checkpoint_every;
  cfg.out_dir = o.out;
  cfg.on_step = progress(o.log_every);
  train::ModelBundle bundle(arch_named(o.arch), train::derive_seed(o.seed, 1));
  train::pretrain(bundle, pairs, cfg);
  const std::string path = (fs::path(o.out) / "bundle.bin").string();
  bundle.save(path);
  json j;
  j["train"] = train::to_json(cfg);
  j["arch"] = train::to_json(bundle.arch);
  j["pairs"] = pairs.size();
  j["bundle"] = path;
  if (cfg.config == 'B') {
    const double acc = train::classifier_accuracy(bundle, split_or_all(c, "valid"));
    std::cout << "classifier accuracy (valid) " << acc << '\n';
    j["classifier_accuracy_valid"] = acc;
  }
  std::cout << "wrote " << path << '\n';
  return j;
}

json run_train(const Options& o) {
  const corpus::Corpus c = load_checked(o.corpus);
  const auto pairs = split_or_all(c, o.split);
  train::ModelBundle bundle = o.from.empty()
                                  ? train::ModelBundle(arch_named(o.arch), train::derive_seed(o.seed, 1))
                                  : train::ModelBundle::load(o.from);
  const char letter = o.from.empty() ? config_letter(o.config) : bundle.config;
  train::TrainConfig cfg = train::TrainConfig::for_config(letter);
  cfg.seed = o.seed;
  cfg.lr = o.lr;
  if (o.steps >= 0) cfg.steps_dualgan = o.steps;
  cfg.checkpoint_every = o.checkpoint_every;
  cfg.from_scratch = o.from.empty();
  cfg.out_dir = o.out;
  cfg.on_step = progress(o.log_every);
  if (o.from.empty()) bundle.config = letter;
  train::train_dualgan(bundle, pairs, cfg);
  const std::string path = (fs::path(o.out) / "bundle.bin").string();
  bundle.save(path);
  std::cout << "wrote " << path << '\n';
  json j;
  j["train"] = train::to_json(cfg);
  j["arch"] = train::to_json(bundle.arch);
  j["pairs"] = pairs.size();
  j["bundle"] = path;
  return j;
}

json run_convert(const Options& o) {
  const train::ModelBundle bundle = train::ModelBundle::load(o.bundle);
  if (!bundle.trained()) std::cerr << "warning: bundle has no dualgan training\n";
  const train::Direction dir = train::direction_from_string(o.direction);
  const F0Track track = read_f0_csv(o.track);
  const F0Track out = train::convert(track, bundle, dir, o.seed);
  const std::string path =
      (fs::path(o.out) / (fs::path(o.track).stem().string() + "_" + o.direction + ".csv")).string();
  write_f0_csv(path, out);
  std::cout << "wrote " << path << '\n';
  return {{"output", path}, {"target_attitude", out.attitude}};
}

json run_evaluate(const Options& o) {
  const train::ModelBundle bundle = train::ModelBundle::load(o.bundle);
  const corpus::Corpus c = load_checked(o.corpus);
  const auto held_out = split_or_all(c, o.eval_split);
  const auto baseline = eval::CwtAsBaseline::fit(split_or_all(c, "train"), o.baseline_scales, 5.0,
                                                 2000.0, 0.125, bundle.arch.padded_length);
  const eval::EvalReport r = eval::evaluate(bundle, held_out, &baseline, o.seed);
  eval::write_report(r, o.out);
  eval::scale_histogram(r.learned_scales, c.markers, o.out, r.baseline_scales);
  std::cout << eval::format_table(r);
  return {{"utterances", held_out.size()},
          {"reconstruction_hz", r.reconstruction},
          {"baseline_reconstruction_hz", r.baseline_reconstruction},
          {"transformation_hz", r.transformation},
          {"identity_hz", r.identity},
          {"untrained", r.untrained}};
}

json run_scales(const Options& o) {
  const train::ModelBundle bundle = train::ModelBundle::load(o.bundle);
  corpus::DurationMarkers markers;
  std::vector<double> baseline;
  if (!o.corpus.empty()) {
    const corpus::Corpus c = load_checked(o.corpus);
    markers = c.markers;
    baseline = eval::CwtAsBaseline::fit(split_or_all(c, "train"), o.baseline_scales, 5.0, 2000.0,
                                        0.125, bundle.arch.padded_length)
                   .selected_scales();
  }
  const auto scales = bundle.encoder.bank().scale_values();
  eval::scale_histogram(scales, markers, o.out, baseline);
  std::cout << "wrote " << (fs::path(o.out) / "scales.svg").string() << '\n';
  return {{"spread_ms", eval::spread(scales)}, {"baseline_spread_ms", eval::spread(baseline)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f0vc: F0 contour conversion with learned wavelet scales"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool needs_out) {
    sub->add_option("--config-file", o.config_file, "JSON file with option values; flags win");
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    if (needs_out) sub->add_option("--out", o.out, "Output directory")->required();
  };

  CLI::App* synth = app.add_subcommand("synth-corpus", "Generate a synthetic parallel corpus");
  common(synth, true);
  synth->add_option("--n", o.n, "Number of utterances")->capture_default_str();
  synth->add_option("--profiles", o.profiles, "JSON file with two attitude profiles");
  synth->add_option("--min-syllables", o.min_syllables)->capture_default_str();
  synth->add_option("--max-syllables", o.max_syllables)->capture_default_str();
  synth->add_option("--syllable-ms-lo", o.syllable_ms_lo)->capture_default_str();
  synth->add_option("--syllable-ms-hi", o.syllable_ms_hi)->capture_default_str();
  synth->add_option("--max-duration-ms", o.max_duration_ms)->capture_default_str();
  synth->add_option("--valid-fraction", o.valid_fraction)->capture_default_str();

  auto training_flags = [&o](CLI::App* sub) {
    sub->add_option("--corpus", o.corpus, "Corpus directory or manifest.json")->required();
    sub->add_option("--steps", o.steps, "Steps (default 500 pretrain, 2000 train)");
    sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--arch", o.arch, "full or tiny")->capture_default_str();
    sub->add_option("--split", o.split, "train, valid or all")->capture_default_str();
    sub->add_option("--checkpoint-every", o.checkpoint_every)->capture_default_str();
    sub->add_option("--log-every", o.log_every)->capture_default_str();
  };
  CLI::App* pre = app.add_subcommand("pretrain", "Pretrain the encoder (and classifier in B)");
  common(pre, true);
  training_flags(pre);
  pre->add_option("--config", o.config, "A or B")->capture_default_str();

  CLI::App* trn = app.add_subcommand("train", "Dual-GAN training");
  common(trn, true);
  training_flags(trn);
  trn->add_option("--from", o.from, "Pretrained bundle; omit to start from scratch");
  trn->add_option("--config", o.config, "A or B, when starting from scratch")->capture_default_str();

  CLI::App* conv = app.add_subcommand("convert", "Convert one F0 track");
  common(conv, true);
  conv->add_option("--bundle", o.bundle)->required();
  conv->add_option("--track", o.track, "F0 CSV (time_ms,f0_hz,voiced)")->required();
  conv->add_option("--direction", o.direction, "a2b or b2a")->capture_default_str();

  CLI::App* ev = app.add_subcommand("evaluate", "RMSE report on a corpus split");
  common(ev, true);
  ev->add_option("--bundle", o.bundle)->required();
  ev->add_option("--corpus", o.corpus)->required();
  ev->add_option("--split", o.eval_split, "Split to evaluate")->capture_default_str();
  ev->add_option("--baseline-scales", o.baseline_scales)->capture_default_str();

  CLI::App* sc = app.add_subcommand("scales", "Plot the learned scale distribution");
  common(sc, true);
  sc->add_option("--bundle", o.bundle)->required();
  sc->add_option("--corpus", o.corpus, "Corpus for duration markers and the baseline");
  sc->add_option("--baseline-scales", o.baseline_scales)->capture_default_str();

  CLI::App* st = app.add_subcommand("selftest", "Formula and gradient checks");
  common(st, false);
  st->add_option("--out", o.out, "Directory for run.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string started = timestamp();
  try {
    if (!o.config_file.empty()) apply_config_file(sub, o.config_file);
    if (!o.out.empty()) ensure_dir(o.out);
    json details;
    int failures = 0;
    const std::string name = sub->get_name();
    if (name == "synth-corpus") details = run_synth(o);
    else if (name == "pretrain") details = run_pretrain(o);
    else if (name == "train") details = run_train(o);
    else if (name == "convert") details = run_convert(o);
    else if (name == "evaluate") details = run_evaluate(o);
    else if (name == "scales") details = run_scales(o);
    else if (name == "selftest") {
      failures = cli::run_selftest(std::cout, o.seed);
      details = {{"failures", failures}};
    }
    if (!o.out.empty()) {
      json run;
      run["command"] = name;
      run["options"] = resolved_options(sub);
      run["seed"] = o.seed;
      run["details"] = details;
      run["started"] = started;
      run["finished"] = timestamp();
      write_json(fs::path(o.out) / "run.json", run);
    }
    return failures == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
