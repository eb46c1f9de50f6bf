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

// Training objectives. Every function works on already computed tensors
// (reconstructions, coefficient planes, discriminator logits) so each term
// can be checked on hand-built values.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "f0vc/pipeline.hpp"
#include "f0vc/tensor.hpp"

namespace f0vc::losses {

using ad::Array;
using ad::Index;
using ad::Tensor;

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.0;
  double lambda = 5.0;
  double gamma = 15.0;

  static LossWeights config_a() { return {1.0, 0.0, 5.0, 15.0}; }
  static LossWeights config_b() { return {10.0, 1.0, 5.0, 15.0}; }
};

/// Masked L1 between a prediction over the first pred.size() frames and the
/// prepared signal; the denominator is the voiced-frame count.
/// ContractError when no frame is voiced.
Tensor masked_l1(const Tensor& pred, const ModelInput& target);

/// Mean over the two utterances of the pair.
Tensor rec_loss(const Tensor& rec_a, const ModelInput& a, const Tensor& rec_b,
                const ModelInput& b);

/// Mean two-class cross entropy over every block of both utterances.
Tensor cl_loss(const std::vector<Tensor>& probs, const std::vector<Index>& labels);

/// Conversion error in both directions, each direction against the target
/// side's signal and mask, each scaled by its sample weight.
Tensor ab_loss(const Tensor& converted_ab, const ModelInput& b,
               const Tensor& converted_ba, const ModelInput& a, double weight_ab = 1.0,
               double weight_ba = 1.0);

/// One direction of the discriminator loss, from logits:
/// mean over blocks of -log D(real) - log(1 - D(fake)).
Tensor adv_d_loss(const std::vector<Tensor>& real_logits,
                  const std::vector<Tensor>& fake_logits);
/// One direction of the non-saturating generator loss: mean of -log D(fake).
Tensor adv_g_loss(const std::vector<Tensor>& fake_logits);

// Probability-form equivalents for scripted scores.
double adv_d_loss_from_scores(const std::vector<double>& real,
                              const std::vector<double>& fake);
double adv_g_loss_from_scores(const std::vector<double>& fake);

/// Mean |P_a * G_ab(P_a) - P_b * G_ba(P_b)| over all rows and the columns
/// where column_mask is 1. With plain = true the products are replaced by
/// the generator outputs alone.
Tensor dual_loss(const Tensor& plane_a, const Tensor& gen_ab, const Tensor& plane_b,
                 const Tensor& gen_ba, const Array& column_mask, bool plain = false);

/// L_pN = alpha L_rec + beta L_cl. An undefined cl term counts as zero.
Tensor compose_pretrain(const Tensor& rec, const Tensor& cl, const LossWeights& w);
/// L_DG = lambda L_ab + L_adv + gamma L_dual.
Tensor compose_dualgan(const Tensor& ab, const Tensor& adv_g, const Tensor& dual,
                       const LossWeights& w);

/// One row of the loss log; unused terms are NaN and print as empty.
struct LossRow {
  Index step = 0;
  std::string phase;
  double rec = NAN, cl = NAN, ab = NAN, adv_d = NAN, adv_g = NAN, dual = NAN,
         total = NAN;
};

std::string format_loss_row(const LossRow& row);

/// Appends rows to `step,phase,L_rec,L_cl,L_ab,L_adv_D,L_adv_G,L_dual,total`.
class LossLog {
 public:
  LossLog() = default;
  /// Truncates or creates the file and writes the header. IoError on failure.
  explicit LossLog(const std::string& path);
  void append(const LossRow& row);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

}  // namespace f0vc::losses
