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

#include "f0vc/networks.hpp"

#include <cmath>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc::nn {
namespace {

using ad::Array;
using ad::Shape;

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

// He-normal weights, zero bias.
Tensor he_normal(Shape shape, Index fan_in, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Array v(ad::shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  return Tensor(std::move(v), std::move(shape), true);
}

Tensor zeros_param(Shape shape) {
  const Index n = ad::shape_size(shape);
  return Tensor(Array::Zero(n), std::move(shape), true);
}

Tensor maybe_dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate == 0.0) return x;
  return ad::dropout(x, rate, *rng, true);
}

void append(std::vector<NamedTensor>& out, const std::string& prefix,
            const std::vector<Tensor>& w, const std::vector<Tensor>& b) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.emplace_back(prefix + std::to_string(i) + ".w", w[i]);
    out.emplace_back(prefix + std::to_string(i) + ".b", b[i]);
  }
}

std::vector<Tensor> values(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

void require_block(const Tensor& block, Index rows, Index width, const char* who) {
  if (block.rank() != 2 || block.dim(0) != rows || (width > 0 && block.dim(1) != width))
    throw DimensionError(std::string(who) + ": expected block [" + std::to_string(rows) +
                         " x " + std::to_string(width) + "], got " +
                         ad::shape_string(block.shape()));
}

}  // namespace

Index parameter_count(const std::vector<Tensor>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

// ---------------------------------------------------------------- classifier

Classifier::Classifier(ClassifierConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  if (config_.filters.empty() || config_.convs_per_block < 1 || config_.kernel % 2 == 0)
    throw ContractError("Classifier: bad config");
  Rng rng(seed);
  const Index k = config_.kernel;
  Index cin = 1;
  for (Index f : config_.filters) {
    for (Index j = 0; j < config_.convs_per_block; ++j) {
      conv_w_.push_back(he_normal({f, cin, k, k}, cin * k * k, rng));
      conv_b_.push_back(zeros_param({f}));
      cin = f;
    }
  }
  const Index flat = flat_features();
  hidden_w_ = he_normal({config_.hidden, flat}, flat, rng);
  hidden_b_ = zeros_param({config_.hidden});
  out_w_ = zeros_param({config_.classes, config_.hidden});
  out_b_ = zeros_param({config_.classes});
}

Index Classifier::flat_features() const {
  Index h = config_.rows, w = config_.width;
  for (std::size_t b = 0; b < config_.filters.size(); ++b) {
    h = ceil_div(h, config_.scale_stride);
    w = ceil_div(w, config_.time_pool);
  }
  return config_.filters.back() * h * w;
}

Tensor Classifier::logits(const Tensor& block, Rng* rng) const {
  require_block(block, config_.rows, config_.width, "Classifier");
  Tensor x = ad::reshape(block, {1, config_.rows, config_.width});
  std::size_t layer = 0;
  for (std::size_t b = 0; b < config_.filters.size(); ++b) {
    for (Index j = 0; j < config_.convs_per_block; ++j, ++layer) {
      const Index sh = j + 1 == config_.convs_per_block ? config_.scale_stride : 1;
      x = ad::relu(ad::conv2d(x, conv_w_[layer], conv_b_[layer], sh, 1));
    }
    x = ad::max_pool_last(x, config_.time_pool);
    x = maybe_dropout(x, config_.dropout, rng);
  }
  Tensor h = ad::relu(ad::dense(x, hidden_w_, hidden_b_));
  h = maybe_dropout(h, config_.dropout, rng);
  return ad::dense(h, out_w_, out_b_);
}

Tensor Classifier::forward(const Tensor& block, Rng* rng) const {
  return ad::softmax(logits(block, rng));
}

ad::Array Classifier::predict(const Tensor& block, std::uint64_t seed) const {
  ad::NoGradGuard guard;
  if (config_.predict_samples <= 0 || config_.dropout == 0.0) return forward(block).value();
  Rng rng(seed);
  ad::Array sum = ad::Array::Zero(config_.classes);
  for (Index k = 0; k < config_.predict_samples; ++k) sum += forward(block, &rng).value();
  return sum / static_cast<double>(config_.predict_samples);
}

std::vector<NamedTensor> Classifier::named_parameters() const {
  std::vector<NamedTensor> out;
  append(out, "classifier.conv", conv_w_, conv_b_);
  out.emplace_back("classifier.hidden.w", hidden_w_);
  out.emplace_back("classifier.hidden.b", hidden_b_);
  out.emplace_back("classifier.out.w", out_w_);
  out.emplace_back("classifier.out.b", out_b_);
  return out;
}

std::vector<Tensor> Classifier::parameters() const { return values(named_parameters()); }

// ----------------------------------------------------------------- generator

std::vector<Index> Generator::up_channels() const {
  // mirror of the encoder: d[n-2], ..., d[0], then d[0] again at full rate
  std::vector<Index> up;
  const auto& d = config_.down;
  for (std::size_t i = d.size() - 1; i-- > 0;) up.push_back(d[i]);
  up.push_back(d.front());
  return up;
}

Generator::Generator(GeneratorConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (config_.down.empty() || config_.kernel % 2 == 0)
    throw ContractError("Generator: bad config");
  Rng rng(seed);
  const Index k = config_.kernel;
  const auto& d = config_.down;
  const auto depth = d.size();
  Index cin = config_.rows;
  for (Index c : d) {
    down_w_.push_back(he_normal({c, cin, k}, cin * k, rng));
    down_b_.push_back(zeros_param({c}));
    cin = c;
  }
  // up layer i sees upsample(previous) where previous is d[last] for i = 0
  // and [u_{i-1} ; d[depth-1-i]] after that
  const auto up = up_channels();
  for (std::size_t i = 0; i < depth; ++i) {
    const Index in = i == 0 ? d.back() : up[i - 1] + d[depth - 1 - i];
    up_w_.push_back(he_normal({up[i], in, k}, in * k, rng));
    up_b_.push_back(zeros_param({up[i]}));
  }
  const Index fin = up.back() + config_.rows;
  final_w_ = he_normal({config_.rows, fin, k}, fin * k, rng);
  final_b_ = zeros_param({config_.rows});
  if (config_.identity_init) set_identity();
}

void Generator::set_identity() {
  const Index k = config_.kernel, fin = final_w_.dim(1), skip = fin - config_.rows;
  auto& w = final_w_.value_mut();
  w.setZero();
  for (Index o = 0; o < config_.rows; ++o) w[(o * fin + skip + o) * k + k / 2] = 1.0;
  final_b_.value_mut().setZero();
}

Tensor Generator::forward(const Tensor& block, Rng* rng) const {
  require_block(block, config_.rows, 0, "Generator");
  const auto depth = config_.down.size();
  if (block.dim(1) % (Index{1} << depth) != 0)
    throw DimensionError("Generator: width must be divisible by 2^depth");
  std::vector<Tensor> skips;
  Tensor x = block;
  for (std::size_t i = 0; i < depth; ++i) {
    x = ad::relu(ad::conv1d(x, down_w_[i], down_b_[i], 2));
    x = maybe_dropout(x, config_.dropout, rng);
    skips.push_back(x);
  }
  for (std::size_t i = 0; i < depth; ++i) {
    if (i > 0) x = ad::concat_rows({x, skips[depth - 1 - i]});
    x = ad::relu(ad::conv1d(ad::upsample2(x), up_w_[i], up_b_[i]));
    x = maybe_dropout(x, config_.dropout, rng);
  }
  return ad::conv1d(ad::concat_rows({x, block}), final_w_, final_b_);
}

std::vector<NamedTensor> Generator::named_parameters() const {
  std::vector<NamedTensor> out;
  append(out, "generator.down", down_w_, down_b_);
  append(out, "generator.up", up_w_, up_b_);
  out.emplace_back("generator.final.w", final_w_);
  out.emplace_back("generator.final.b", final_b_);
  return out;
}

std::vector<Tensor> Generator::parameters() const { return values(named_parameters()); }

// ------------------------------------------------------------- discriminator

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  if (config_.channels.empty() || config_.kernel % 2 == 0)
    throw ContractError("Discriminator: bad config");
  Rng rng(seed);
  const Index k = config_.kernel;
  Index cin = config_.rows;
  for (Index c : config_.channels) {
    conv_w_.push_back(he_normal({c, cin, k}, cin * k, rng));
    conv_b_.push_back(zeros_param({c}));
    cin = c;
  }
  out_w_ = zeros_param({1, flat_features()});
  out_b_ = zeros_param({1});
}

Index Discriminator::flat_features() const {
  Index w = config_.width;
  for (std::size_t i = 0; i < config_.channels.size(); ++i) w = ceil_div(w, 2);
  return config_.channels.back() * w;
}

Tensor Discriminator::logit(const Tensor& block) const {
  require_block(block, config_.rows, config_.width, "Discriminator");
  Tensor x = block;
  for (std::size_t i = 0; i < conv_w_.size(); ++i)
    x = ad::leaky_relu(ad::conv1d(x, conv_w_[i], conv_b_[i], 2), config_.slope);
  return ad::dense(x, out_w_, out_b_);
}

Tensor Discriminator::score(const Tensor& block) const { return ad::sigmoid(logit(block)); }

std::vector<NamedTensor> Discriminator::named_parameters() const {
  std::vector<NamedTensor> out;
  append(out, "discriminator.conv", conv_w_, conv_b_);
  out.emplace_back("discriminator.out.w", out_w_);
  out.emplace_back("discriminator.out.b", out_b_);
  return out;
}

std::vector<Tensor> Discriminator::parameters() const { return values(named_parameters()); }

}  // namespace f0vc::nn
