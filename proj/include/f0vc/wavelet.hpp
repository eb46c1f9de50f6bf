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

// Wavelet kernel convolutional encoder: a bank of Ricker (Mexican-hat)
// kernels with learnable scales decomposes a log-F0 contour into one
// coefficient row per scale; reconstruct() sums the rows back.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "f0vc/tensor.hpp"

namespace f0vc {

using ad::Index;

/// Torrence & Compo constants for the DOG(2) wavelet, used as printed.
struct ReconstructionConstants {
  double dt = 1.2;
  double dj = 0.125;
  double cd = 3.541;
  double y0 = 0.867;
};

template <typename Scalar>
Scalar ricker_peak() {
  return Scalar(2) / std::sqrt(Scalar(3)) *
         std::pow(std::numbers::pi_v<Scalar>, Scalar(-0.25));
}

/// psi_s(t) = (2 pi^(-1/4) / sqrt(3)) (1 - (t/s)^2) exp(-(t/s)^2 / 2)
template <typename Scalar>
Scalar ricker(Scalar t, Scalar scale) {
  const Scalar u = t / scale;
  return ricker_peak<Scalar>() * (Scalar(1) - u * u) * std::exp(-u * u / 2);
}

/// dj sqrt(dt) / (Cd Y0), about 0.04460 with the default constants.
template <typename Scalar>
Scalar reconstruction_prefactor(const ReconstructionConstants& c) {
  return Scalar(c.dj) * std::sqrt(Scalar(c.dt)) / (Scalar(c.cd) * Scalar(c.y0));
}

struct WaveletKernel {
  double scale = 0.0;
  Index support = 0;
  ad::Array taps;  // taps[k] at t = k - (support - 1) / 2
};

/// DomainError for scale <= 0, ContractError for an even or < 3 support.
WaveletKernel ricker_kernel(double scale, Index support);

/// Smallest odd integer >= 10 * scale, capped at the largest odd <= max_len.
Index kernel_support(double scale, Index max_len);

/// How coefficient rows are weighted before reconstruction.
enum class RowNorm {
  kQuadrature,  // 1 / (s sqrt(dt)) times the log2 spacing of the bank / dj
  kClassic,     // 1 / (s sqrt(dt)): Torrence & Compo with uniform dj spacing
  kRaw,         // raw convolution rows
};

std::string to_string(RowNorm norm);
RowNorm row_norm_from_string(const std::string& name);

/// Learnable, strictly increasing scales (in samples):
///   s_0 = s_min + softplus(raw_0),  s_i = s_{i-1} + softplus(raw_i).
class ScaleBank {
 public:
  ScaleBank() = default;
  /// Back-solves the raw parameters so scales() reproduces `initial`.
  ScaleBank(const std::vector<double>& initial, double s_min);
  static ScaleBank log_spaced(Index count, double lo, double hi, double s_min);

  Index size() const { return raw_.defined() ? raw_.size() : 0; }
  double s_min() const { return s_min_; }
  ad::Tensor& raw() { return raw_; }
  const ad::Tensor& raw() const { return raw_; }

  ad::Tensor scales() const;
  std::vector<double> scale_values() const;

 private:
  ad::Tensor raw_;
  double s_min_ = 1.0;
};

/// W_e(x): row i is the response of scale i; signal_mean is the voiced mean
/// of the input that was subtracted before convolving.
struct CoefficientPlane {
  ad::Tensor coeffs;  // [N x T]
  double signal_mean = 0.0;

  Index rows() const { return coeffs.dim(0); }
  Index cols() const { return coeffs.dim(1); }
};

struct EncoderConfig {
  Index scales = 32;
  double init_lo = 5.0;
  double init_hi = 2000.0;
  double s_min = 1.0;
  RowNorm norm = RowNorm::kQuadrature;
  ReconstructionConstants constants;
};

/// The input centred on its voiced mean over [0, valid_length); zero beyond.
ad::Array center_signal(std::span<const double> signal, Index valid_length,
                        double mean);

/// Row weights for `scales` under `norm` (differentiable in the scales).
ad::Tensor row_factors(const ad::Tensor& scales, RowNorm norm,
                       const ReconstructionConstants& constants);

/// Decomposes with differentiable scales. `signal` is the padded input.
CoefficientPlane encode_with_scales(std::span<const double> signal,
                                    Index valid_length, double mean,
                                    const ad::Tensor& scales, RowNorm norm,
                                    const ReconstructionConstants& constants);

/// x_hat = prefactor * sum_i row_i + signal_mean
ad::Tensor reconstruct(const CoefficientPlane& plane,
                       const ReconstructionConstants& constants);

class WaveletEncoder {
 public:
  WaveletEncoder() : WaveletEncoder(EncoderConfig{}) {}
  explicit WaveletEncoder(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  ScaleBank& bank() { return bank_; }
  const ScaleBank& bank() const { return bank_; }

  CoefficientPlane encode(std::span<const double> signal, Index valid_length,
                          double mean) const;
  ad::Tensor reconstruct(const CoefficientPlane& plane) const;

  std::vector<ad::Tensor> parameters() const { return {bank_.raw()}; }

 private:
  EncoderConfig config_;
  ScaleBank bank_;
};

/// Log-spaced grid lo * 2^(j dj) up to hi (inclusive within rounding).
std::vector<double> dense_scale_grid(double lo, double hi, double dj);

/// CWT-AS baseline: ranks the rows of a fixed grid by the mean absolute
/// coefficient difference between paired planes (over frames where
/// masks[p] is non-zero; all frames when masks is empty) and returns the
/// top `count` row indices, ties broken by ascending index.
std::vector<Index> adaptive_scale_select(
    const std::vector<CoefficientPlane>& corpus_a,
    const std::vector<CoefficientPlane>& corpus_b,
    const std::vector<ad::Array>& masks, Index count);

/// Rows = scales, columns = frames.
void write_plane_csv(const std::string& path, const CoefficientPlane& plane);

}  // namespace f0vc
