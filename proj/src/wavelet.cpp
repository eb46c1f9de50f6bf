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

#include "f0vc/wavelet.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc {

WaveletKernel ricker_kernel(double scale, Index support) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw DomainError("ricker_kernel: scale must be positive");
  if (support < 3 || support % 2 == 0)
    throw ContractError("ricker_kernel: support must be odd and >= 3");
  WaveletKernel k;
  k.scale = scale;
  k.support = support;
  k.taps = ad::ricker_taps(ad::Tensor::scalar(scale), support).value();
  return k;
}

Index kernel_support(double scale, Index max_len) {
  if (max_len < 1) throw ContractError("kernel_support: empty signal");
  auto k = static_cast<Index>(std::ceil(10.0 * scale));
  if (k % 2 == 0) ++k;
  const Index cap = max_len % 2 == 1 ? max_len : max_len - 1;
  return std::max<Index>(1, std::min(k, cap));
}

std::string to_string(RowNorm norm) {
  switch (norm) {
    case RowNorm::kQuadrature: return "quadrature";
    case RowNorm::kClassic: return "classic";
    case RowNorm::kRaw: return "raw";
  }
  return "quadrature";
}

RowNorm row_norm_from_string(const std::string& name) {
  if (name == "quadrature") return RowNorm::kQuadrature;
  if (name == "classic") return RowNorm::kClassic;
  if (name == "raw") return RowNorm::kRaw;
  throw ContractError("unknown row normalization '" + name + "'");
}

namespace {

// softplus^-1(y) for y > 0
double inverse_softplus(double y) {
  if (!(y > 0.0)) throw ContractError("scale increments must be positive");
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

}  // namespace

ScaleBank::ScaleBank(const std::vector<double>& initial, double s_min)
    : s_min_(s_min) {
  if (initial.empty()) throw ContractError("ScaleBank needs at least one scale");
  if (!(s_min > 0.0)) throw DomainError("ScaleBank: s_min must be positive");
  std::vector<double> raw(initial.size());
  double prev = s_min;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    raw[i] = inverse_softplus(initial[i] - prev);
    prev = initial[i];
  }
  raw_ = ad::Tensor::vector(raw, /*requires_grad=*/true);
}

ScaleBank ScaleBank::log_spaced(Index count, double lo, double hi,
                                double s_min) {
  if (count < 1 || !(lo > s_min) || !(hi > lo))
    throw ContractError("log_spaced: need count >= 1 and s_min < lo < hi");
  std::vector<double> s(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    s[i] = lo * std::pow(hi / lo, f);
  }
  return ScaleBank(s, s_min);
}

ad::Tensor ScaleBank::scales() const {
  return ad::add_scalar(ad::cumsum(ad::softplus(raw_)), s_min_);
}

std::vector<double> ScaleBank::scale_values() const {
  ad::NoGradGuard guard;
  const ad::Array v = scales().value();
  return {v.data(), v.data() + v.size()};
}

ad::Array center_signal(std::span<const double> signal, Index valid_length,
                        double mean) {
  const auto len = static_cast<Index>(signal.size());
  if (valid_length <= 0 || valid_length > len)
    throw ContractError("center_signal: bad valid length");
  ad::Array x = ad::Array::Zero(len);
  for (Index i = 0; i < valid_length; ++i) x[i] = signal[i] - mean;
  return x;
}

ad::Tensor row_factors(const ad::Tensor& scales, RowNorm norm,
                       const ReconstructionConstants& constants) {
  const Index n = scales.size();
  if (norm == RowNorm::kRaw)
    return ad::Tensor(ad::Array::Ones(n), ad::Shape{n});
  const ad::Tensor log_s = ad::log(scales);
  ad::Tensor inv_s = ad::exp(ad::neg(log_s));
  if (norm == RowNorm::kClassic || n == 1)
    return ad::scale(inv_s, 1.0 / std::sqrt(constants.dt));
  // Trapezoid-like log2 spacing: one-sided at the ends, centred inside.
  ad::RowMatrix d = ad::RowMatrix::Zero(n, n);
  d(0, 0) = -1.0;
  d(0, 1) = 1.0;
  d(n - 1, n - 2) = -1.0;
  d(n - 1, n - 1) = 1.0;
  for (Index i = 1; i + 1 < n; ++i) {
    d(i, i - 1) = -0.5;
    d(i, i + 1) = 0.5;
  }
  ad::Array dflat = Eigen::Map<ad::Array>(d.data(), d.size()) /
                    (std::numbers::ln2 * constants.dj);
  const ad::Tensor spacing =
      ad::dense(log_s, ad::Tensor(std::move(dflat), ad::Shape{n, n}),
                ad::Tensor());
  return ad::scale(ad::mul(spacing, inv_s), 1.0 / std::sqrt(constants.dt));
}

CoefficientPlane encode_with_scales(std::span<const double> signal,
                                    Index valid_length, double mean,
                                    const ad::Tensor& scales, RowNorm norm,
                                    const ReconstructionConstants& constants) {
  const auto len = static_cast<Index>(signal.size());
  const ad::Tensor x(center_signal(signal, valid_length, mean), ad::Shape{len});
  std::vector<ad::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(scales.size()));
  for (Index i = 0; i < scales.size(); ++i) {
    const ad::Tensor s = ad::select(scales, i);
    const Index support = kernel_support(s.item(), len);
    rows.push_back(ad::correlate_same(x, ad::ricker_taps(s, support)));
  }
  ad::Tensor plane = ad::stack(rows);
  if (norm != RowNorm::kRaw)
    plane = ad::scale_rows(plane, row_factors(scales, norm, constants));
  return {plane, mean};
}

ad::Tensor reconstruct(const CoefficientPlane& plane,
                       const ReconstructionConstants& constants) {
  if (!plane.coeffs.defined() || plane.coeffs.rank() != 2 || plane.rows() < 1)
    throw ContractError("reconstruct: plane needs at least one row");
  const double pre = reconstruction_prefactor<double>(constants);
  return ad::add_scalar(ad::scale(ad::sum_rows(plane.coeffs), pre),
                        plane.signal_mean);
}

WaveletEncoder::WaveletEncoder(const EncoderConfig& config)
    : config_(config),
      bank_(ScaleBank::log_spaced(config.scales, config.init_lo,
                                  config.init_hi, config.s_min)) {}

CoefficientPlane WaveletEncoder::encode(std::span<const double> signal,
                                        Index valid_length, double mean) const {
  return encode_with_scales(signal, valid_length, mean, bank_.scales(),
                            config_.norm, config_.constants);
}

ad::Tensor WaveletEncoder::reconstruct(const CoefficientPlane& plane) const {
  return f0vc::reconstruct(plane, config_.constants);
}

std::vector<double> dense_scale_grid(double lo, double hi, double dj) {
  if (!(lo > 0.0) || !(hi >= lo) || !(dj > 0.0))
    throw ContractError("dense_scale_grid: bad range");
  std::vector<double> grid;
  const double span = std::log2(hi / lo);
  for (int j = 0; j * dj <= span + 1e-9; ++j) grid.push_back(lo * std::exp2(j * dj));
  return grid;
}

std::vector<Index> adaptive_scale_select(
    const std::vector<CoefficientPlane>& corpus_a,
    const std::vector<CoefficientPlane>& corpus_b,
    const std::vector<ad::Array>& masks, Index count) {
  if (corpus_a.size() != corpus_b.size())
    throw ContractError("adaptive_scale_select: corpora differ in size");
  if (!masks.empty() && masks.size() != corpus_a.size())
    throw ContractError("adaptive_scale_select: one mask per pair expected");
  if (corpus_a.empty()) throw ContractError("adaptive_scale_select: empty corpus");
  const Index rows = corpus_a[0].rows();
  if (count < 1 || count > rows)
    throw ContractError("adaptive_scale_select: requested " +
                        std::to_string(count) + " of " + std::to_string(rows) +
                        " scales");
  ad::Array distance = ad::Array::Zero(rows);
  for (std::size_t p = 0; p < corpus_a.size(); ++p) {
    const auto a = corpus_a[p].coeffs.matrix();
    const auto b = corpus_b[p].coeffs.matrix();
    if (a.rows() != rows || b.rows() != rows || a.cols() != b.cols())
      throw DimensionError("adaptive_scale_select: plane shape mismatch");
    ad::Array w = masks.empty() ? ad::Array::Ones(a.cols()) : masks[p];
    if (w.size() != a.cols())
      throw DimensionError("adaptive_scale_select: mask length mismatch");
    const double total = w.sum();
    if (!(total > 0.0)) throw ContractError("adaptive_scale_select: empty mask");
    ad::Array weighted = ((a - b).array().abs().rowwise() * w.transpose())
                             .rowwise()
                             .sum();
    distance += weighted / total;
  }
  distance /= static_cast<double>(corpus_a.size());
  std::vector<Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
    return distance[i] > distance[j];
  });
  order.resize(static_cast<std::size_t>(count));
  return order;
}

void write_plane_csv(const std::string& path, const CoefficientPlane& plane) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << std::setprecision(17);
  const auto m = plane.coeffs.matrix();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << m(r, c);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace f0vc
