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

#include "f0vc/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc::train {
namespace fs = std::filesystem;
using ad::Array;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::uint64_t kPredictSeed = 0x70726564;

constexpr char kMagic[8] = {'F', '0', 'V', 'C', 'B', 'N', 'D', 'L'};

// Marks leaves as constants for the guard's lifetime.
class Freeze {
 public:
  explicit Freeze(std::vector<Tensor> params) : params_(std::move(params)) {
    for (auto& p : params_) p.node()->requires_grad = false;
  }
  ~Freeze() {
    for (auto& p : params_) p.node()->requires_grad = true;
  }
  Freeze(const Freeze&) = delete;
  Freeze& operator=(const Freeze&) = delete;

 private:
  std::vector<Tensor> params_;
};

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void step_group(std::vector<Tensor> params, AdamState& state, double lr) {
  state.lr = lr;
  adam_step(params, state);
}

std::vector<Tensor> detached(const std::vector<Tensor>& ts) {
  std::vector<Tensor> out;
  for (const auto& t : ts) out.push_back(t.detach());
  return out;
}

std::vector<Tensor> window_blocks(const std::vector<Window>& ws) {
  std::vector<Tensor> out;
  for (const auto& w : ws) out.push_back(w.block);
  return out;
}

std::vector<Tensor> logits(const nn::Discriminator& d, const std::vector<Tensor>& blocks) {
  std::vector<Tensor> out;
  for (const auto& b : blocks) out.push_back(d.logit(b));
  return out;
}

// Non-finite entries become null.
json array_json(const Array& a) {
  json out = json::array();
  for (Index i = 0; i < a.size(); ++i) out.push_back(std::isfinite(a[i]) ? json(a[i]) : json());
  return out;
}

void dump_failure(const TrainConfig& cfg, const ModelBundle& bundle, const PreparedPair& pair,
                  const std::string& phase, Index step, const std::string& what) {
  if (cfg.out_dir.empty()) return;
  json j = {{"phase", phase},
            {"step", step},
            {"error", what},
            {"utterances", {pair.key_a, pair.key_b}},
            {"valid_length", pair.a.valid_length},
            {"mean_logf0", {pair.a.mean_logf0, pair.b.mean_logf0}},
            {"raw_scales", array_json(bundle.encoder.bank().raw().value())},
            {"signal_a", array_json(pair.a.signal.head(pair.a.valid_length))},
            {"signal_b", array_json(pair.b.signal.head(pair.b.valid_length))},
            {"mask", array_json(pair.joint_mask)}};
  std::ofstream os(fs::path(cfg.out_dir) / "nonfinite_dump.json");
  os << j.dump(2) << '\n';
}

void checkpoint(const TrainConfig& cfg, const ModelBundle& bundle, const std::string& phase,
                Index step) {
  if (cfg.out_dir.empty() || cfg.checkpoint_every <= 0 || step % cfg.checkpoint_every != 0) return;
  bundle.save((fs::path(cfg.out_dir) / ("checkpoint_" + phase + "_" + std::to_string(step) + ".bin"))
                  .string());
}

// Steps through a shuffled permutation, reshuffling every epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = n;
  }
  std::size_t next() {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<std::size_t> order_;
  nn::Rng rng_;
  std::size_t pos_;
};

template <typename StepFn>
void run_loop(ModelBundle& bundle, const std::vector<PreparedPair>& pairs, const TrainConfig& cfg,
              Index steps, Index first_step, const std::string& phase, std::uint64_t stream,
              StepFn step_fn) {
  losses::LossLog log;
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    log = losses::LossLog((fs::path(cfg.out_dir) / ("loss_" + phase + ".csv")).string());
  }
  EpochSampler sampler(pairs.size(), derive_seed(cfg.seed, stream));
  nn::Rng noise(derive_seed(cfg.seed, stream + 1));
  for (Index i = 0; i < steps; ++i) {
    const Index step = first_step + i + 1;
    const PreparedPair& pair = pairs[sampler.next()];
    losses::LossRow row;
    try {
      row = step_fn(pair, noise, step);
    } catch (const NumericError& e) {
      dump_failure(cfg, bundle, pair, phase, step, e.what());
      throw NumericError(phase + " step " + std::to_string(step) + " (" + pair.key_a + "): " +
                         e.what());
    }
    if (log.is_open()) log.append(row);
    if (cfg.on_step) cfg.on_step(row);
    checkpoint(cfg, bundle, phase, step);
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (stream * 0xd1b54a32d192ed03ULL);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ------------------------------------------------------------------ configs

ArchConfig& ArchConfig::sync() {
  const Index n = encoder.scales;
  classifier.rows = n;
  classifier.width = window;
  generator.rows = n;
  discriminator.rows = n;
  discriminator.width = window;
  return *this;
}

ArchConfig ArchConfig::tiny(Index scales, Index window, Index padded_length) {
  ArchConfig a;
  a.encoder.scales = scales;
  a.encoder.init_lo = 5.0;
  a.encoder.init_hi = 200.0;
  a.window = window;
  a.padded_length = padded_length;
  a.classifier.filters = {2, 3, 4};
  a.classifier.convs_per_block = 2;
  a.classifier.hidden = 6;
  a.classifier.time_pool = 2;
  a.generator.down = {4, 4, 4, 4};
  a.discriminator.channels = {4, 4, 4, 4};
  return a.sync();
}

json to_json(const ArchConfig& a) {
  const auto& e = a.encoder;
  return {{"encoder",
           {{"scales", e.scales},
            {"init_lo", e.init_lo},
            {"init_hi", e.init_hi},
            {"s_min", e.s_min},
            {"norm", to_string(e.norm)},
            {"dt", e.constants.dt},
            {"dj", e.constants.dj},
            {"cd", e.constants.cd},
            {"y0", e.constants.y0}}},
          {"classifier",
           {{"filters", a.classifier.filters},
            {"convs_per_block", a.classifier.convs_per_block},
            {"kernel", a.classifier.kernel},
            {"scale_stride", a.classifier.scale_stride},
            {"time_pool", a.classifier.time_pool},
            {"hidden", a.classifier.hidden},
            {"classes", a.classifier.classes},
            {"dropout", a.classifier.dropout},
            {"predict_samples", a.classifier.predict_samples}}},
          {"generator",
           {{"down", a.generator.down},
            {"kernel", a.generator.kernel},
            {"dropout", a.generator.dropout},
            {"identity_init", a.generator.identity_init}}},
          {"discriminator",
           {{"channels", a.discriminator.channels},
            {"kernel", a.discriminator.kernel},
            {"slope", a.discriminator.slope}}},
          {"window", a.window},
          {"padded_length", a.padded_length}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    a.encoder.scales = e.value("scales", a.encoder.scales);
    a.encoder.init_lo = e.value("init_lo", a.encoder.init_lo);
    a.encoder.init_hi = e.value("init_hi", a.encoder.init_hi);
    a.encoder.s_min = e.value("s_min", a.encoder.s_min);
    a.encoder.norm = row_norm_from_string(e.value("norm", to_string(a.encoder.norm)));
    a.encoder.constants.dt = e.value("dt", a.encoder.constants.dt);
    a.encoder.constants.dj = e.value("dj", a.encoder.constants.dj);
    a.encoder.constants.cd = e.value("cd", a.encoder.constants.cd);
    a.encoder.constants.y0 = e.value("y0", a.encoder.constants.y0);
  }
  if (j.contains("classifier")) {
    const json& c = j["classifier"];
    a.classifier.filters = c.value("filters", a.classifier.filters);
    a.classifier.convs_per_block = c.value("convs_per_block", a.classifier.convs_per_block);
    a.classifier.kernel = c.value("kernel", a.classifier.kernel);
    a.classifier.scale_stride = c.value("scale_stride", a.classifier.scale_stride);
    a.classifier.time_pool = c.value("time_pool", a.classifier.time_pool);
    a.classifier.hidden = c.value("hidden", a.classifier.hidden);
    a.classifier.classes = c.value("classes", a.classifier.classes);
    a.classifier.dropout = c.value("dropout", a.classifier.dropout);
    a.classifier.predict_samples = c.value("predict_samples", a.classifier.predict_samples);
  }
  if (j.contains("generator")) {
    const json& g = j["generator"];
    a.generator.down = g.value("down", a.generator.down);
    a.generator.kernel = g.value("kernel", a.generator.kernel);
    a.generator.dropout = g.value("dropout", a.generator.dropout);
    a.generator.identity_init = g.value("identity_init", a.generator.identity_init);
  }
  if (j.contains("discriminator")) {
    const json& d = j["discriminator"];
    a.discriminator.channels = d.value("channels", a.discriminator.channels);
    a.discriminator.kernel = d.value("kernel", a.discriminator.kernel);
    a.discriminator.slope = d.value("slope", a.discriminator.slope);
  }
  a.window = j.value("window", a.window);
  a.padded_length = j.value("padded_length", a.padded_length);
  return a.sync();
}

Direction direction_from_string(const std::string& s) {
  if (s == "a2b" || s == "a->b" || s == "ab") return Direction::kAtoB;
  if (s == "b2a" || s == "b->a" || s == "ba") return Direction::kBtoA;
  throw ValidationError("unknown direction '" + s + "' (use a2b or b2a)");
}

std::string to_string(Direction d) { return d == Direction::kAtoB ? "a2b" : "b2a"; }

TrainConfig TrainConfig::for_config(char config) {
  TrainConfig c;
  c.config = config;
  if (config == 'A') c.weights = LossWeights::config_a();
  else if (config == 'B') c.weights = LossWeights::config_b();
  else throw ValidationError(std::string("unknown configuration '") + config + "' (use A or B)");
  return c;
}

void TrainConfig::validate() const {
  const LossWeights ref = config == 'B' ? LossWeights::config_b() : LossWeights::config_a();
  if (config != 'A' && config != 'B') throw ContractError("configuration must be A or B");
  if (weights.alpha != ref.alpha || weights.beta != ref.beta)
    throw ContractError(std::string("alpha/beta do not match configuration ") + config);
  if (!(lr > 0) || steps_pretrain < 0 || steps_dualgan < 0 || d_steps_per_g < 1)
    throw ContractError("training: bad step counts or learning rate");
}

json to_json(const TrainConfig& c) {
  return {{"config", std::string(1, c.config)},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"lambda", c.weights.lambda},
          {"gamma", c.weights.gamma},
          {"lr", c.lr},
          {"steps_pretrain", c.steps_pretrain},
          {"steps_dualgan", c.steps_dualgan},
          {"seed", c.seed},
          {"d_steps_per_g", c.d_steps_per_g},
          {"checkpoint_every", c.checkpoint_every},
          {"dual_plain", c.dual_plain},
          {"from_scratch", c.from_scratch}};
}

// ------------------------------------------------------------------- bundle

ModelBundle::ModelBundle(ArchConfig a, std::uint64_t seed)
    : arch(a.sync()),
      encoder(arch.encoder),
      classifier(arch.classifier, derive_seed(seed, 1)),
      g_ab(arch.generator, derive_seed(seed, 2)),
      g_ba(arch.generator, derive_seed(seed, 3)),
      d_a(arch.discriminator, derive_seed(seed, 4)),
      d_b(arch.discriminator, derive_seed(seed, 5)) {}

std::vector<nn::NamedTensor> ModelBundle::named_parameters() const {
  std::vector<nn::NamedTensor> out{{"encoder.raw_scales", encoder.bank().raw()}};
  auto add = [&out](const std::string& prefix, const std::vector<nn::NamedTensor>& ps) {
    for (const auto& [name, t] : ps) out.emplace_back(prefix + name, t);
  };
  add("", classifier.named_parameters());
  add("g_ab/", g_ab.named_parameters());
  add("g_ba/", g_ba.named_parameters());
  add("d_a/", d_a.named_parameters());
  add("d_b/", d_b.named_parameters());
  return out;
}

std::vector<Tensor> ModelBundle::generator_parameters() const {
  return concat(g_ab.parameters(), g_ba.parameters());
}

std::vector<Tensor> ModelBundle::discriminator_parameters() const {
  return concat(d_a.parameters(), d_b.parameters());
}

namespace {

struct OptGroup {
  const char* name;
  const AdamState* state;
  Index count;
};

json adam_json(const AdamState& s) {
  return {{"step", s.step}, {"lr", s.lr}, {"beta1", s.beta1}, {"beta2", s.beta2},
          {"epsilon", s.epsilon}, {"moments", !s.m.empty()}};
}

}  // namespace

void ModelBundle::save(const std::string& path) const {
  const auto params = named_parameters();
  json tensors = json::array();
  for (const auto& [name, t] : params) tensors.push_back({{"name", name}, {"size", t.size()}});
  const std::vector<std::pair<std::string, const AdamState*>> groups{
      {"scales", &opt_scales},
      {"classifier", &opt_classifier},
      {"generators", &opt_generators},
      {"discriminators", &opt_discriminators}};
  json opts = json::object();
  std::vector<const Array*> moments;
  for (const auto& [name, s] : groups) {
    opts[name] = adam_json(*s);
    for (std::size_t i = 0; i < s->m.size(); ++i) {
      tensors.push_back({{"name", "opt." + name + ".m." + std::to_string(i)}, {"size", s->m[i].size()}});
      moments.push_back(&s->m[i]);
    }
    for (std::size_t i = 0; i < s->v.size(); ++i) {
      tensors.push_back({{"name", "opt." + name + ".v." + std::to_string(i)}, {"size", s->v[i].size()}});
      moments.push_back(&s->v[i]);
    }
  }
  json header = {{"format", 1},
                 {"arch", to_json(arch)},
                 {"config", std::string(1, config)},
                 {"pretrain_steps", pretrain_steps},
                 {"dualgan_steps", dualgan_steps},
                 {"attitude_a", attitude_a},
                 {"attitude_b", attitude_b},
                 {"sample_weights", sample_weights},
                 {"scales", encoder.bank().scale_values()},
                 {"optimizers", opts},
                 {"tensors", tensors}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params)
    os.write(reinterpret_cast<const char*>(t.value().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  for (const Array* a : moments)
    os.write(reinterpret_cast<const char*>(a->data()),
             static_cast<std::streamsize>(a->size() * sizeof(double)));
  if (!os) throw IoError("failed writing " + path);
}

ModelBundle ModelBundle::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  std::uint64_t len = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || len > (1u << 30))
    throw ValidationError(path + ": not a model bundle");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  json h;
  try {
    h = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad header: " + e.what());
  }
  ModelBundle b(arch_from_json(h.at("arch")));
  b.config = h.value("config", std::string("A")).at(0);
  b.pretrain_steps = h.value("pretrain_steps", Index{0});
  b.dualgan_steps = h.value("dualgan_steps", Index{0});
  b.attitude_a = h.value("attitude_a", b.attitude_a);
  b.attitude_b = h.value("attitude_b", b.attitude_b);
  b.sample_weights = h.value("sample_weights", std::map<std::string, double>{});

  std::map<std::string, Array*> targets;
  auto params = b.named_parameters();
  for (auto& [name, t] : params) targets[name] = &t.value_mut();
  const std::vector<std::pair<std::string, AdamState*>> groups{
      {"scales", &b.opt_scales},
      {"classifier", &b.opt_classifier},
      {"generators", &b.opt_generators},
      {"discriminators", &b.opt_discriminators}};
  for (const auto& [name, s] : groups) {
    const json& o = h.at("optimizers").at(name);
    s->step = o.at("step").get<std::int64_t>();
    s->lr = o.at("lr");
    s->beta1 = o.at("beta1");
    s->beta2 = o.at("beta2");
    s->epsilon = o.at("epsilon");
  }
  for (const auto& entry : h.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto size = entry.at("size").get<Index>();
    Array data(size);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size * sizeof(double)));
    if (!is) throw ValidationError(path + ": truncated at tensor " + name);
    if (name.rfind("opt.", 0) == 0) {
      // opt.<group>.<m|v>.<i>
      const auto p1 = name.find('.', 4), p2 = name.find('.', p1 + 1);
      const std::string group = name.substr(4, p1 - 4), kind = name.substr(p1 + 1, p2 - p1 - 1);
      const auto idx = static_cast<std::size_t>(std::stoul(name.substr(p2 + 1)));
      for (const auto& [gname, s] : groups) {
        if (gname != group) continue;
        auto& vec = kind == "m" ? s->m : s->v;
        if (vec.size() <= idx) vec.resize(idx + 1);
        vec[idx] = std::move(data);
      }
      continue;
    }
    auto it = targets.find(name);
    if (it == targets.end() || it->second->size() != size)
      throw ValidationError(path + ": tensor " + name + " does not fit the architecture");
    *it->second = std::move(data);
  }
  return b;
}

std::string sample_key(const F0Track& track) {
  return track.speaker_id + "/" + track.utterance_id + "/" + track.attitude;
}

// ------------------------------------------------------------ data plumbing

std::vector<PreparedPair> prepare_pairs(const std::vector<ParallelPair>& pairs,
                                        Index padded_length) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& raw : pairs) {
    const ParallelPair aligned = align_pair(raw);
    PreparedPair p;
    p.a = prepare(aligned.source, padded_length);
    p.b = prepare(aligned.target, padded_length);
    if (p.a.valid_length != p.b.valid_length)
      throw AlignmentError("aligned pair lengths differ for " + raw.source.utterance_id);
    const Index len = p.a.valid_length;
    p.joint_mask = p.a.voicing_mask.head(len) * p.b.voicing_mask.head(len);
    p.key_a = sample_key(raw.source);
    p.key_b = sample_key(raw.target);
    out.push_back(std::move(p));
  }
  return out;
}

Encoded encode_input(const WaveletEncoder& encoder, const ModelInput& input, Index window) {
  std::span<const double> signal(input.signal.data(), static_cast<std::size_t>(input.signal.size()));
  Encoded e{encoder.encode(signal, input.valid_length, input.mean_logf0), {}};
  e.windows = slice_windows(e.plane, input.valid_length, window);
  return e;
}

Tensor reconstruct_valid(const Tensor& plane, Index valid, double mean,
                         const ReconstructionConstants& constants) {
  const Tensor cut = plane.dim(1) == valid ? plane : ad::slice_cols(plane, 0, valid);
  return reconstruct(CoefficientPlane{cut, mean}, constants);
}

std::vector<Tensor> generate_blocks(const nn::Generator& g, const std::vector<Window>& windows,
                                    nn::Rng* rng) {
  std::vector<Tensor> out;
  for (const auto& w : windows) {
    Tensor y = g.forward(w.block, rng);
    const Index width = w.block.dim(1);
    if (w.width < width) {
      Array keep = Array::Zero(y.size());
      for (Index r = 0; r < y.dim(0); ++r) keep.segment(r * width, w.width).setOnes();
      y = ad::mul_const(y, keep);
    }
    out.push_back(y);
  }
  return out;
}

// ---------------------------------------------------------------- the steps

PretrainLosses pretrain_losses(const ModelBundle& bundle, const PreparedPair& pair,
                               const TrainConfig& cfg, nn::Rng& rng) {
  const auto& rc = bundle.arch.encoder.constants;
  const Encoded ea = encode_input(bundle.encoder, pair.a, bundle.arch.window);
  const Encoded eb = encode_input(bundle.encoder, pair.b, bundle.arch.window);
  const Tensor rec_a = reconstruct_valid(ea.plane.coeffs, pair.a.valid_length, pair.a.mean_logf0, rc);
  const Tensor rec_b = reconstruct_valid(eb.plane.coeffs, pair.b.valid_length, pair.b.mean_logf0, rc);
  PretrainLosses out;
  out.rec = losses::rec_loss(rec_a, pair.a, rec_b, pair.b);
  if (cfg.config == 'B' && cfg.weights.beta != 0.0) {
    std::vector<Tensor> probs;
    std::vector<Index> labels;
    for (const auto& w : ea.windows) {
      probs.push_back(bundle.classifier.forward(w.block, &rng));
      labels.push_back(0);
    }
    for (const auto& w : eb.windows) {
      probs.push_back(bundle.classifier.forward(w.block, &rng));
      labels.push_back(1);
    }
    out.cl = losses::cl_loss(probs, labels);
  }
  out.total = losses::compose_pretrain(out.rec, out.cl, cfg.weights);
  return out;
}

losses::LossRow pretrain_step(ModelBundle& bundle, const PreparedPair& pair, const TrainConfig& cfg,
                              nn::Rng& rng, Index step) {
  const PretrainLosses l = pretrain_losses(bundle, pair, cfg, rng);
  const bool use_cl = l.cl.defined();
  ad::backward(l.total);
  step_group(bundle.encoder.parameters(), bundle.opt_scales, cfg.lr);
  if (use_cl) step_group(bundle.classifier.parameters(), bundle.opt_classifier, cfg.lr);

  losses::LossRow row;
  row.step = step;
  row.phase = "pretrain";
  row.rec = l.rec.item();
  if (use_cl) row.cl = l.cl.item();
  row.total = l.total.item();
  return row;
}

DualganForward dualgan_forward(const ModelBundle& bundle, const PreparedPair& pair, nn::Rng& rng) {
  DualganForward f;
  f.ea = encode_input(bundle.encoder, pair.a, bundle.arch.window);
  f.eb = encode_input(bundle.encoder, pair.b, bundle.arch.window);
  // fake_b = G_ab(W_e(x_a)) lives in domain b; fake_a likewise in domain a
  f.fake_b = generate_blocks(bundle.g_ab, f.ea.windows, &rng);
  f.fake_a = generate_blocks(bundle.g_ba, f.eb.windows, &rng);
  return f;
}

Tensor discriminator_loss(const ModelBundle& bundle, const DualganForward& f) {
  const auto ra = detached(window_blocks(f.ea.windows)), rb = detached(window_blocks(f.eb.windows));
  const auto fa = detached(f.fake_a), fb = detached(f.fake_b);
  return ad::add(losses::adv_d_loss(logits(bundle.d_a, ra), logits(bundle.d_a, fa)),
                 losses::adv_d_loss(logits(bundle.d_b, rb), logits(bundle.d_b, fb)));
}

GeneratorLosses generator_losses(const ModelBundle& bundle, const PreparedPair& pair,
                                 const TrainConfig& cfg, const DualganForward& f) {
  const auto& rc = bundle.arch.encoder.constants;
  const Index len = pair.a.valid_length;
  GeneratorLosses out;
  out.adv_g = ad::add(losses::adv_g_loss(logits(bundle.d_b, f.fake_b)),
                      losses::adv_g_loss(logits(bundle.d_a, f.fake_a)));
  const Tensor gen_ab = unslice(f.fake_b, f.ea.windows), gen_ba = unslice(f.fake_a, f.eb.windows);
  const Tensor conv_ab = reconstruct_valid(gen_ab, len, pair.a.mean_logf0, rc);
  const Tensor conv_ba = reconstruct_valid(gen_ba, len, pair.b.mean_logf0, rc);
  double w_ab = 1.0, w_ba = 1.0;
  if (bundle.config == 'B') {
    if (auto it = bundle.sample_weights.find(pair.key_a); it != bundle.sample_weights.end()) w_ab = it->second;
    if (auto it = bundle.sample_weights.find(pair.key_b); it != bundle.sample_weights.end()) w_ba = it->second;
  }
  out.ab = losses::ab_loss(conv_ab, pair.b, conv_ba, pair.a, w_ab, w_ba);
  out.dual = losses::dual_loss(unslice(f.ea.windows), gen_ab, unslice(f.eb.windows), gen_ba,
                               pair.joint_mask, cfg.dual_plain);
  out.total = losses::compose_dualgan(out.ab, out.adv_g, out.dual, cfg.weights);
  return out;
}

losses::LossRow dualgan_step(ModelBundle& bundle, const PreparedPair& pair, const TrainConfig& cfg,
                             nn::Rng& rng, Index step) {
  const DualganForward f = dualgan_forward(bundle, pair, rng);
  losses::LossRow row;
  row.step = step;
  row.phase = "dualgan";

  for (Index k = 0; k < cfg.d_steps_per_g; ++k) {
    const Tensor loss_d = discriminator_loss(bundle, f);
    ad::backward(loss_d);
    step_group(bundle.discriminator_parameters(), bundle.opt_discriminators, cfg.lr);
    if (k == 0) row.adv_d = loss_d.item();
  }

  // Generators and encoder scales, discriminators frozen.
  Freeze frozen(bundle.discriminator_parameters());
  const GeneratorLosses g = generator_losses(bundle, pair, cfg, f);
  ad::backward(g.total);
  step_group(bundle.generator_parameters(), bundle.opt_generators, cfg.lr);
  step_group(bundle.encoder.parameters(), bundle.opt_scales, cfg.lr);

  row.ab = g.ab.item();
  row.adv_g = g.adv_g.item();
  row.dual = g.dual.item();
  row.total = g.total.item();
  return row;
}

// ------------------------------------------------------------------ drivers

void pretrain(ModelBundle& bundle, const std::vector<ParallelPair>& pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ContractError("pretrain: empty corpus");
  const auto prepared = prepare_pairs(pairs, bundle.arch.padded_length);
  bundle.config = cfg.config;
  bundle.attitude_a = pairs.front().source.attitude;
  bundle.attitude_b = pairs.front().target.attitude;
  run_loop(bundle, prepared, cfg, cfg.steps_pretrain, bundle.pretrain_steps, "pretrain", 100,
           [&](const PreparedPair& p, nn::Rng& rng, Index step) {
             return pretrain_step(bundle, p, cfg, rng, step);
           });
  bundle.pretrain_steps += cfg.steps_pretrain;
  if (cfg.config == 'B') {
    for (const auto& p : prepared) {
      bundle.sample_weights[p.key_a] = true_class_posterior(bundle, p.a, 0);
      bundle.sample_weights[p.key_b] = true_class_posterior(bundle, p.b, 1);
    }
  }
}

void train_dualgan(ModelBundle& bundle, const std::vector<ParallelPair>& pairs,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ContractError("train_dualgan: empty corpus");
  if (bundle.pretrain_steps == 0 && !cfg.from_scratch)
    throw ContractError("train_dualgan: bundle was never pretrained (set from_scratch to allow)");
  const auto prepared = prepare_pairs(pairs, bundle.arch.padded_length);
  if (bundle.pretrain_steps == 0) {
    bundle.attitude_a = pairs.front().source.attitude;
    bundle.attitude_b = pairs.front().target.attitude;
  }
  run_loop(bundle, prepared, cfg, cfg.steps_dualgan, bundle.dualgan_steps, "dualgan", 200,
           [&](const PreparedPair& p, nn::Rng& rng, Index step) {
             return dualgan_step(bundle, p, cfg, rng, step);
           });
  bundle.dualgan_steps += cfg.steps_dualgan;
}

double true_class_posterior(const ModelBundle& bundle, const ModelInput& input, Index label) {
  ad::NoGradGuard guard;
  const Encoded e = encode_input(bundle.encoder, input, bundle.arch.window);
  double sum = 0.0;
  for (std::size_t i = 0; i < e.windows.size(); ++i)
    sum += bundle.classifier.predict(e.windows[i].block, derive_seed(kPredictSeed, i))[label];
  return sum / static_cast<double>(e.windows.size());
}

double classifier_accuracy(const ModelBundle& bundle, const std::vector<ParallelPair>& pairs) {
  ad::NoGradGuard guard;
  Index right = 0, total = 0;
  for (const auto& pair : pairs) {
    const F0Track* tracks[2] = {&pair.source, &pair.target};
    for (Index label = 0; label < 2; ++label) {
      const ModelInput in = prepare(*tracks[label], bundle.arch.padded_length);
      const Encoded e = encode_input(bundle.encoder, in, bundle.arch.window);
      for (std::size_t i = 0; i < e.windows.size(); ++i) {
        const Array p = bundle.classifier.predict(e.windows[i].block, derive_seed(kPredictSeed, i));
        Index best = 0;
        p.maxCoeff(&best);
        right += best == label;
        ++total;
      }
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
}

namespace {

F0Track with_contour(const F0Track& track, const Array& log_f0) {
  F0Track out = track;
  for (Index k = 0; k < track.length(); ++k)
    out.f0_hz[k] = track.voicing[k] ? std::exp(log_f0[k]) : 0.0;
  return out;
}

}  // namespace

F0Track convert(const F0Track& track, const ModelBundle& bundle, Direction direction,
                std::uint64_t seed) {
  ad::NoGradGuard guard;
  const ModelInput in = prepare(track, bundle.arch.padded_length);
  const Encoded e = encode_input(bundle.encoder, in, bundle.arch.window);
  nn::Rng rng(seed);
  const auto blocks = generate_blocks(bundle.generator(direction), e.windows, &rng);
  const Tensor rec = reconstruct_valid(unslice(blocks, e.windows), in.valid_length, in.mean_logf0,
                                       bundle.arch.encoder.constants);
  F0Track out = with_contour(track, rec.value());
  out.attitude = direction == Direction::kAtoB ? bundle.attitude_b : bundle.attitude_a;
  return out;
}

F0Track round_trip(const F0Track& track, const WaveletEncoder& encoder, Index padded_length) {
  ad::NoGradGuard guard;
  const ModelInput in = prepare(track, padded_length);
  std::span<const double> signal(in.signal.data(), static_cast<std::size_t>(in.signal.size()));
  const CoefficientPlane plane = encoder.encode(signal, in.valid_length, in.mean_logf0);
  const Tensor rec = reconstruct_valid(plane.coeffs, in.valid_length, in.mean_logf0,
                                       encoder.config().constants);
  return with_contour(track, rec.value());
}

}  // namespace f0vc::train
