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

#include "f0vc/losses.hpp"

#include <cmath>
#include <sstream>

#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"

namespace f0vc::losses {

Tensor masked_l1(const Tensor& pred, const ModelInput& target) {
  const Index len = pred.size();
  if (len > target.signal.size())
    throw DimensionError("masked_l1: prediction longer than the signal");
  const Tensor ref(target.signal.head(len), {len});
  return ad::l1_masked_mean(pred, ref, target.voicing_mask.head(len));
}

Tensor rec_loss(const Tensor& rec_a, const ModelInput& a, const Tensor& rec_b,
                const ModelInput& b) {
  return ad::scale(ad::add(masked_l1(rec_a, a), masked_l1(rec_b, b)), 0.5);
}

Tensor cl_loss(const std::vector<Tensor>& probs, const std::vector<Index>& labels) {
  if (probs.empty() || probs.size() != labels.size())
    throw ContractError("cl_loss: need one label per block");
  std::vector<Tensor> terms;
  terms.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    Array onehot = Array::Zero(probs[i].size());
    if (labels[i] < 0 || labels[i] >= onehot.size())
      throw ContractError("cl_loss: label out of range");
    onehot[labels[i]] = 1.0;
    terms.push_back(ad::cross_entropy(probs[i], onehot));
  }
  return ad::scale(ad::add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Tensor ab_loss(const Tensor& converted_ab, const ModelInput& b, const Tensor& converted_ba,
               const ModelInput& a, double weight_ab, double weight_ba) {
  return ad::add(ad::scale(masked_l1(converted_ab, b), weight_ab),
                 ad::scale(masked_l1(converted_ba, a), weight_ba));
}

Tensor adv_d_loss(const std::vector<Tensor>& real_logits,
                  const std::vector<Tensor>& fake_logits) {
  if (real_logits.empty() || fake_logits.empty())
    throw ContractError("adv_d_loss: no blocks");
  std::vector<Tensor> real, fake;
  for (const auto& l : real_logits) real.push_back(ad::log_sigmoid(l));
  for (const auto& l : fake_logits) fake.push_back(ad::log_sigmoid(ad::neg(l)));
  const Tensor r = ad::scale(ad::add_n(real), -1.0 / static_cast<double>(real.size()));
  const Tensor f = ad::scale(ad::add_n(fake), -1.0 / static_cast<double>(fake.size()));
  return ad::add(r, f);
}

Tensor adv_g_loss(const std::vector<Tensor>& fake_logits) {
  if (fake_logits.empty()) throw ContractError("adv_g_loss: no blocks");
  std::vector<Tensor> terms;
  for (const auto& l : fake_logits) terms.push_back(ad::log_sigmoid(l));
  return ad::scale(ad::add_n(terms), -1.0 / static_cast<double>(terms.size()));
}

double adv_d_loss_from_scores(const std::vector<double>& real, const std::vector<double>& fake) {
  if (real.empty() || fake.empty()) throw ContractError("adv_d_loss: no blocks");
  double r = 0.0, f = 0.0;
  for (double p : real) r -= std::log(p);
  for (double p : fake) f -= std::log1p(-p);
  return r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size());
}

double adv_g_loss_from_scores(const std::vector<double>& fake) {
  if (fake.empty()) throw ContractError("adv_g_loss: no blocks");
  double f = 0.0;
  for (double p : fake) f -= std::log(p);
  return f / static_cast<double>(fake.size());
}

Tensor dual_loss(const Tensor& plane_a, const Tensor& gen_ab, const Tensor& plane_b,
                 const Tensor& gen_ba, const Array& column_mask, bool plain) {
  if (plane_a.shape() != gen_ab.shape() || plane_b.shape() != gen_ba.shape() ||
      plane_a.shape() != plane_b.shape() || plane_a.rank() != 2)
    throw DimensionError("dual_loss: planes must share one [N x T] shape");
  const Index rows = plane_a.dim(0), cols = plane_a.dim(1);
  if (column_mask.size() != cols) throw DimensionError("dual_loss: mask length");
  const Tensor lhs = plain ? gen_ab : ad::mul(plane_a, gen_ab);
  const Tensor rhs = plain ? gen_ba : ad::mul(plane_b, gen_ba);
  Array mask(rows * cols);
  for (Index r = 0; r < rows; ++r) mask.segment(r * cols, cols) = column_mask;
  return ad::l1_masked_mean(lhs, rhs, mask);
}

Tensor compose_pretrain(const Tensor& rec, const Tensor& cl, const LossWeights& w) {
  Tensor total = ad::scale(rec, w.alpha);
  if (cl.defined() && w.beta != 0.0) total = ad::add(total, ad::scale(cl, w.beta));
  return total;
}

Tensor compose_dualgan(const Tensor& ab, const Tensor& adv_g, const Tensor& dual,
                       const LossWeights& w) {
  return ad::add_n({ad::scale(ab, w.lambda), adv_g, ad::scale(dual, w.gamma)});
}

std::string format_loss_row(const LossRow& row) {
  std::ostringstream os;
  auto cell = [&os](double v) {
    os << ',';
    if (!std::isnan(v)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf;
    }
  };
  os << row.step << ',' << row.phase;
  for (double v : {row.rec, row.cl, row.ab, row.adv_d, row.adv_g, row.dual, row.total}) cell(v);
  return os.str();
}

LossLog::LossLog(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw IoError("cannot write loss log " + path);
  out_ << "step,phase,L_rec,L_cl,L_ab,L_adv_D,L_adv_G,L_dual,total\n";
}

void LossLog::append(const LossRow& row) {
  if (!out_) return;
  out_ << format_loss_row(row) << '\n';
  out_.flush();
}

}  // namespace f0vc::losses
