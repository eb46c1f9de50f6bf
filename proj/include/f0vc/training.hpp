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

// Pre-network pretraining, joint Dual-GAN training, conversion, and the
// checkpointable bundle holding every trained component.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "f0vc/adam.hpp"
#include "f0vc/losses.hpp"
#include "f0vc/networks.hpp"
#include "f0vc/pipeline.hpp"
#include "f0vc/wavelet.hpp"

namespace f0vc::train {

using ad::Index;
using ad::Tensor;
using losses::LossWeights;

/// Shapes of every component. rows/width of the networks follow the
/// encoder's scale count and the window width.
struct ArchConfig {
  EncoderConfig encoder;
  nn::ClassifierConfig classifier;
  nn::GeneratorConfig generator;
  nn::DiscriminatorConfig discriminator;
  Index window = kWindowWidth;
  Index padded_length = kPaddedLength;

  /// Propagates scales and window into the network configs.
  ArchConfig& sync();
  /// Small networks for gradient checks and quick tests.
  static ArchConfig tiny(Index scales = 4, Index window = 64, Index padded_length = 512);
};

nlohmann::json to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

enum class Direction { kAtoB, kBtoA };
Direction direction_from_string(const std::string& s);  // "a2b" / "b2a"
std::string to_string(Direction d);

/// Everything that is trained, with its optimizer state.
class ModelBundle {
 public:
  explicit ModelBundle(ArchConfig arch = ArchConfig{}, std::uint64_t seed = 1);
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  ArchConfig arch;
  WaveletEncoder encoder;
  nn::Classifier classifier;
  nn::Generator g_ab, g_ba;
  nn::Discriminator d_a, d_b;
  AdamState opt_scales, opt_classifier, opt_generators, opt_discriminators;

  char config = 'A';
  Index pretrain_steps = 0;
  Index dualgan_steps = 0;
  std::string attitude_a = "a", attitude_b = "b";
  /// Classifier posterior of the true class, keyed by sample_key().
  std::map<std::string, double> sample_weights;

  bool trained() const { return dualgan_steps > 0; }
  const nn::Generator& generator(Direction d) const { return d == Direction::kAtoB ? g_ab : g_ba; }

  std::vector<nn::NamedTensor> named_parameters() const;
  std::vector<Tensor> generator_parameters() const;
  std::vector<Tensor> discriminator_parameters() const;

  /// Magic, JSON header, then raw little-endian doubles: parameters in
  /// declaration order followed by the allocated Adam moments.
  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);
};

std::string sample_key(const F0Track& track);

struct TrainConfig {
  char config = 'A';
  LossWeights weights = LossWeights::config_a();
  double lr = 1e-4;
  Index steps_pretrain = 500;
  Index steps_dualgan = 2000;
  std::uint64_t seed = 1;
  Index d_steps_per_g = 1;
  Index checkpoint_every = 0;
  bool dual_plain = false;
  /// Allows dualgan training of a bundle that was never pretrained.
  bool from_scratch = false;
  /// Loss log, checkpoints and failure dumps go here; empty disables files.
  std::string out_dir;
  /// Called after every step with the logged row (progress reporting).
  std::function<void(const losses::LossRow&)> on_step;

  static TrainConfig for_config(char config);
  /// ContractError when the weights disagree with the named configuration.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// An aligned pair ready for the networks: both inputs on the target
/// timeline and the frames voiced in both.
struct PreparedPair {
  ModelInput a, b;
  std::string key_a, key_b;
  ad::Array joint_mask;  // [valid_length]
};

std::vector<PreparedPair> prepare_pairs(const std::vector<ParallelPair>& pairs,
                                        Index padded_length = kPaddedLength);

/// Encoder output of one utterance and its windows.
struct Encoded {
  CoefficientPlane plane;
  std::vector<Window> windows;
};

Encoded encode_input(const WaveletEncoder& encoder, const ModelInput& input, Index window);

/// Reconstruction over the first `valid` columns of a plane.
Tensor reconstruct_valid(const Tensor& plane, Index valid, double mean,
                         const ReconstructionConstants& constants);

/// Runs the generator on every window; outputs past each window's true
/// width are zeroed.
std::vector<Tensor> generate_blocks(const nn::Generator& g, const std::vector<Window>& windows,
                                    nn::Rng* rng);

struct PretrainLosses {
  Tensor rec, cl, total;  // cl is undefined unless configuration B
};

/// The pretraining objective; `rng` drives classifier dropout.
PretrainLosses pretrain_losses(const ModelBundle& bundle, const PreparedPair& pair,
                               const TrainConfig& cfg, nn::Rng& rng);

/// Encoder planes and generator outputs shared by both dualgan updates.
struct DualganForward {
  Encoded ea, eb;
  std::vector<Tensor> fake_a, fake_b;
};

DualganForward dualgan_forward(const ModelBundle& bundle, const PreparedPair& pair, nn::Rng& rng);

/// Both discriminators on detached real and generated blocks.
Tensor discriminator_loss(const ModelBundle& bundle, const DualganForward& f);

struct GeneratorLosses {
  Tensor ab, adv_g, dual, total;
};

GeneratorLosses generator_losses(const ModelBundle& bundle, const PreparedPair& pair,
                                 const TrainConfig& cfg, const DualganForward& f);

/// One pretraining step (returns the logged row). Updates the scales and,
/// in configuration B, the classifier.
losses::LossRow pretrain_step(ModelBundle& bundle, const PreparedPair& pair,
                              const TrainConfig& cfg, nn::Rng& rng, Index step);

/// One discriminator step followed by one joint generator + encoder step.
losses::LossRow dualgan_step(ModelBundle& bundle, const PreparedPair& pair,
                             const TrainConfig& cfg, nn::Rng& rng, Index step);

/// Full pretraining run over the pairs; fills sample weights in
/// configuration B.
void pretrain(ModelBundle& bundle, const std::vector<ParallelPair>& pairs, const TrainConfig& cfg);

void train_dualgan(ModelBundle& bundle, const std::vector<ParallelPair>& pairs,
                   const TrainConfig& cfg);

/// Mean over blocks of the classifier's probability for the true class.
double true_class_posterior(const ModelBundle& bundle, const ModelInput& input, Index label);

/// Block-level accuracy of the classifier on both sides of every pair.
double classifier_accuracy(const ModelBundle& bundle, const std::vector<ParallelPair>& pairs);

/// prepare, encode, slice, generate, unslice, reconstruct, exp. Keeps the
/// source timeline and voicing; unvoiced frames are 0 Hz.
F0Track convert(const F0Track& track, const ModelBundle& bundle, Direction direction,
                std::uint64_t seed);

/// exp(reconstruct(encode(track))) on the track's voiced frames.
F0Track round_trip(const F0Track& track, const WaveletEncoder& encoder,
                   Index padded_length = kPaddedLength);

/// splitmix64, used to derive independent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace f0vc::train
