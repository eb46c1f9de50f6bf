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

// Classifier, generator and discriminator over [scales x time] coefficient
// blocks. A null rng disables dropout; a non-null one draws the masks.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "f0vc/tensor.hpp"

namespace f0vc::nn {

using ad::Index;
using ad::Tensor;
using Rng = std::mt19937_64;
using NamedTensor = std::pair<std::string, Tensor>;

struct ClassifierConfig {
  Index rows = 32;
  Index width = 512;
  std::vector<Index> filters{32, 64, 128};
  Index convs_per_block = 3;
  Index kernel = 3;
  Index scale_stride = 2;
  Index time_pool = 4;
  Index hidden = 1000;
  Index classes = 2;
  double dropout = 0.2;
  /// Dropout draws averaged by predict(); 0 predicts with dropout off.
  Index predict_samples = 8;
};

/// Conv blocks over the plane seen as a one-channel image, then
/// dense(hidden, ReLU) and dense(classes, softmax).
class Classifier {
 public:
  explicit Classifier(ClassifierConfig config = {}, std::uint64_t seed = 1);

  /// block [rows x width] -> class probabilities [classes]
  Tensor forward(const Tensor& block, Rng* rng = nullptr) const;
  Tensor logits(const Tensor& block, Rng* rng = nullptr) const;
  /// Class posterior averaged over seeded dropout draws, without recording.
  ad::Array predict(const Tensor& block, std::uint64_t seed) const;

  const ClassifierConfig& config() const { return config_; }
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  Index flat_features() const;

 private:
  ClassifierConfig config_;
  std::vector<Tensor> conv_w_, conv_b_;
  Tensor hidden_w_, hidden_b_, out_w_, out_b_;
};

struct GeneratorConfig {
  Index rows = 32;
  std::vector<Index> down{64, 128, 256, 256};
  Index kernel = 5;
  double dropout = 0.5;
  /// Final layer starts as the identity on the input skip; the deep path
  /// starts switched off.
  bool identity_init = true;
};

/// 1-D U-Net: stride-2 encoder, nearest-upsampling decoder with skips, and
/// a final linear conv over [decoder output ; input] back to `rows`.
class Generator {
 public:
  explicit Generator(GeneratorConfig config = {}, std::uint64_t seed = 2);

  /// block [rows x T], T divisible by 2^depth -> [rows x T]
  Tensor forward(const Tensor& block, Rng* rng = nullptr) const;

  const GeneratorConfig& config() const { return config_; }
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::vector<Index> up_channels() const;

  /// Wiring check: zero deep path, identity on the input skip.
  void set_identity();

 private:
  GeneratorConfig config_;
  std::vector<Tensor> down_w_, down_b_, up_w_, up_b_;
  Tensor final_w_, final_b_;
};

struct DiscriminatorConfig {
  Index rows = 32;
  Index width = 512;
  std::vector<Index> channels{64, 128, 256, 256};
  Index kernel = 5;
  double slope = 0.2;
};

class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig config = {}, std::uint64_t seed = 3);

  /// block [rows x width] -> scalar logit
  Tensor logit(const Tensor& block) const;
  /// sigmoid(logit), in (0, 1)
  Tensor score(const Tensor& block) const;

  const DiscriminatorConfig& config() const { return config_; }
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  Index flat_features() const;

 private:
  DiscriminatorConfig config_;
  std::vector<Tensor> conv_w_, conv_b_;
  Tensor out_w_, out_b_;
};

Index parameter_count(const std::vector<Tensor>& params);

}  // namespace f0vc::nn
