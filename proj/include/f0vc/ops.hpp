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

// Differentiable operations over ad::Tensor. Shapes are row-major; a
// "[C x T]" tensor holds C channels of T frames.

#include <cstdint>
#include <random>
#include <vector>

#include "f0vc/tensor.hpp"

namespace f0vc::ad {

enum class Padding { kSame, kValid };

// Element-wise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor mul_const(const Tensor& a, const Array& factors);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError on non-positive input
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
// log(sigmoid(a)), stable for large |a|.
Tensor log_sigmoid(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

// Reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// sum_i weights[i] * a[i]
Tensor dot_const(const Tensor& a, const Array& weights);
// sum over tensors of equal shape (n-ary add).
Tensor add_n(const std::vector<Tensor>& terms);

// Structure.
Tensor reshape(const Tensor& a, Shape shape);
Tensor select(const Tensor& a, Index i);  // scalar a[i]
Tensor stack(const std::vector<Tensor>& parts);  // [n x ...parts[0].shape]
Tensor cumsum(const Tensor& a);  // rank 1
Tensor concat_rows(const std::vector<Tensor>& parts);  // along axis 0, rank 2
// Columns [start, start + len) of a [R x C] tensor; columns past C read as 0.
Tensor slice_cols(const Tensor& a, Index start, Index len);
// Concatenates [R x C_i] blocks, keeping the first widths[i] columns of each.
Tensor concat_cols(const std::vector<Tensor>& parts,
                   const std::vector<Index>& widths);
// [R x C] -> [C], sum over rows.
Tensor sum_rows(const Tensor& a);
// out[r, c] = a[r, c] * factors[r]
Tensor scale_rows(const Tensor& a, const Tensor& factors);

// Layers.
// input [F] (any shape, flattened), weight [U x F], bias [U] -> [U]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
// input [Cin x T], kernels [Cout x Cin x K], bias [Cout] or undefined.
// "same" pads K/2 zeros on the left, output length ceil(T / stride);
// out[o, t] = sum_{c,k} kernels[o, c, k] * input[c, t * stride + k - K/2].
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Index stride = 1, Padding padding = Padding::kSame);
// input [Cin x H x W], kernels [Cout x Cin x KH x KW], same padding.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Index stride_h = 1, Index stride_w = 1);
// Max over non-overlapping windows of the last axis (ceil mode), rank 2 or 3.
Tensor max_pool_last(const Tensor& input, Index window);
// Nearest-neighbour x2 upsampling of the last axis of a [C x T] tensor.
Tensor upsample2(const Tensor& input);
Tensor softmax(const Tensor& logits);  // rank 1

// Training-time noise. Survivors are scaled by 1 / (1 - rate).
Tensor dropout(const Tensor& input, double rate, std::mt19937_64& rng,
               bool training);
Tensor dropout(const Tensor& input, double rate, std::uint64_t seed,
               bool training);

// Losses.
// mean |a - b|
Tensor l1_mean(const Tensor& a, const Tensor& b);
// sum(mask * |a - b|) / sum(mask); ContractError when the mask is empty.
Tensor l1_masked_mean(const Tensor& a, const Tensor& b, const Array& mask);
// -sum_i target[i] * log(probs[i]); DomainError when a labelled prob is <= 0.
Tensor cross_entropy(const Tensor& probs, const Array& target);

// Wavelet support.
// taps[k] = (2 / sqrt(3)) pi^(-1/4) (1 - u^2) exp(-u^2 / 2),
// u = (k - (K - 1) / 2) / scale. scale is a scalar tensor.
Tensor ricker_taps(const Tensor& scale, Index support);
// signal [T], taps [K] -> [T], same convention as conv1d with stride 1.
// Evaluated with FFTs; differentiable in both arguments.
Tensor correlate_same(const Tensor& signal, const Tensor& taps);

}  // namespace f0vc::ad
