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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "f0vc/error.hpp"
#include "f0vc/losses.hpp"
#include "f0vc/ops.hpp"
#include "f0vc/wavelet.hpp"
#include "f0vc/gradcheck.hpp"

using namespace f0vc;
using namespace f0vc::losses;
using ad::Shape;

namespace {

ModelInput input_from(const std::vector<double>& signal, const std::vector<double>& mask) {
  ModelInput in;
  in.signal = Eigen::Map<const Array>(signal.data(), static_cast<Index>(signal.size()));
  in.voicing_mask = Eigen::Map<const Array>(mask.data(), static_cast<Index>(mask.size()));
  in.valid_length = static_cast<Index>(signal.size());
  return in;
}

Tensor vec(const Array& a) { return Tensor(a, {a.size()}); }

}  // namespace

TEST_CASE("reconstruction loss") {
  const ModelInput x = input_from({1, 2, 3, 4, 5, 6, 7, 8}, {1, 0, 1, 1, 0, 0, 1, 0});
  CHECK(masked_l1(vec(x.signal), x).item() == 0.0);
  CHECK(masked_l1(vec(x.signal + 0.25), x).item() == doctest::Approx(0.25).epsilon(1e-15));

  // errors 0.1, 0.2, 0, 0.1 on the voiced frames, garbage elsewhere
  Array pred = x.signal;
  pred[0] += 0.1;
  pred[2] -= 0.2;
  pred[3] += 0.0;
  pred[6] += 0.1;
  pred[1] += 50.0;
  pred[5] -= 7.0;
  CHECK(std::abs(masked_l1(vec(pred), x).item() - 0.1) <= 1e-15);
  CHECK(std::abs(rec_loss(vec(pred), x, vec(x.signal), x).item() - 0.05) <= 1e-15);

  const ModelInput silent = input_from({1, 2, 3}, {0, 0, 0});
  CHECK_THROWS_AS(masked_l1(vec(silent.signal), silent), ContractError);
}

TEST_CASE("masking makes unvoiced frames irrelevant") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<double> s(50), m(50);
  for (int i = 0; i < 50; ++i) {
    s[i] = nd(rng);
    m[i] = i % 3 == 0 ? 0.0 : 1.0;
  }
  const ModelInput x = input_from(s, m);
  Array pred(50);
  for (auto& v : pred) v = nd(rng);
  const double before = masked_l1(vec(pred), x).item();
  ModelInput y = x;
  for (int i = 0; i < 50; i += 3) {
    pred[i] += 100.0 * nd(rng);
    y.signal[i] -= 3.0;
  }
  CHECK(masked_l1(vec(pred), y).item() == before);
}

TEST_CASE("classification loss") {
  const Tensor sure = vec(Eigen::Vector2d(1.0, 0.0).array());
  CHECK(cl_loss({sure, vec(Eigen::Vector2d(0.0, 1.0).array())}, {0, 1}).item() == 0.0);
  const Tensor uniform = vec(Eigen::Vector2d(0.5, 0.5).array());
  CHECK(cl_loss({uniform, uniform, uniform}, {0, 1, 1}).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const Tensor p = vec(Eigen::Vector2d(0.8, 0.2).array());
  const Tensor q = vec(Eigen::Vector2d(0.2, 0.8).array());
  CHECK(cl_loss({p, q, p}, {0, 1, 0}).item() == doctest::Approx(0.2231435513).epsilon(1e-9));
  CHECK_THROWS_AS(cl_loss({p}, {0, 1}), ContractError);
  CHECK_THROWS_AS(cl_loss({p}, {2}), ContractError);
}

TEST_CASE("transformation loss") {
  const ModelInput a = input_from({4.6, 4.7, 4.8, 4.9}, {1, 1, 0, 1});
  const ModelInput b = input_from({5.0, 5.1, 5.2, 5.3}, {1, 0, 1, 1});
  CHECK(ab_loss(vec(b.signal), b, vec(a.signal), a).item() == 0.0);
  CHECK(ab_loss(vec(b.signal + 0.3), b, vec(a.signal - 0.3), a).item() ==
        doctest::Approx(0.6).epsilon(1e-14));
  CHECK(ab_loss(vec(b.signal + 0.3), b, vec(a.signal), a, 0.5, 1.0).item() ==
        doctest::Approx(0.15).epsilon(1e-14));
}

TEST_CASE("transformation loss through a two-scale toy encoder") {
  // planes [2 x 3], reconstruction = pre * column sums + mean
  const ReconstructionConstants rc;
  const double pre = 0.125 * std::sqrt(1.2) / (3.541 * 0.867);
  const ModelInput a = input_from({4.0, 4.2, 4.1}, {1, 1, 0});
  const ModelInput b = input_from({4.5, 4.4, 4.6}, {1, 1, 1});
  Array g_ab(6), g_ba(6);
  g_ab << 1.0, 2.0, -1.0, 0.5, 0.0, 3.0;
  g_ba << -2.0, 0.0, 1.0, 1.0, 1.0, -1.0;
  const Tensor conv_ab = reconstruct({Tensor(g_ab, {2, 3}), 4.0}, rc);
  const Tensor conv_ba = reconstruct({Tensor(g_ba, {2, 3}), 4.5}, rc);
  // by hand: a->b columns sums 1.5, 2, 2 ; b->a sums -1, 1, 0
  const double ab = (std::abs(4.0 + 1.5 * pre - 4.5) + std::abs(4.0 + 2.0 * pre - 4.4) +
                     std::abs(4.0 + 2.0 * pre - 4.6)) / 3.0;
  const double ba = (std::abs(4.5 - 1.0 * pre - 4.0) + std::abs(4.5 + 1.0 * pre - 4.2)) / 2.0;
  CHECK(std::abs(ab_loss(conv_ab, b, conv_ba, a).item() - (ab + ba)) <= 1e-12);
}

TEST_CASE("adversarial losses") {
  CHECK(adv_d_loss_from_scores({0.5, 0.5}, {0.5}) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(adv_d_loss_from_scores({0.8}, {0.3}) == doctest::Approx(0.5798184953).epsilon(1e-9));
  double prev = 1e9;
  for (double eps : {1e-1, 1e-2, 1e-4, 1e-8}) {
    const double l = adv_d_loss_from_scores({1 - eps}, {eps});
    CHECK(l < prev);
    CHECK(l < 3 * eps);
    prev = l;
  }
  CHECK(adv_g_loss_from_scores({0.5}) == doctest::Approx(std::log(2.0)));

  // logit form agrees with the score form
  auto logit = [](double p) { return Tensor::scalar(std::log(p / (1 - p))); };
  CHECK(adv_d_loss({logit(0.8), logit(0.6)}, {logit(0.3)}).item() ==
        doctest::Approx(adv_d_loss_from_scores({0.8, 0.6}, {0.3})).epsilon(1e-13));
  CHECK(adv_g_loss({logit(0.3), logit(0.9)}).item() ==
        doctest::Approx(adv_g_loss_from_scores({0.3, 0.9})).epsilon(1e-13));
  CHECK(adv_g_loss({Tensor::scalar(40.0)}).item() >= 0.0);
  CHECK_THROWS_AS(adv_d_loss({}, {logit(0.3)}), ContractError);
}

TEST_CASE("dual loss") {
  std::mt19937_64 rng(2);
  const Tensor p = testing::random_tensor({3, 5}, rng, false);
  const Tensor g = testing::random_tensor({3, 5}, rng, false);
  const Array all = Array::Ones(5);
  CHECK(dual_loss(p, g, p, g, all).item() == 0.0);
  const Tensor z = Tensor::zeros({3, 5});
  CHECK(dual_loss(z, z, z, z, all).item() == 0.0);

  Array pa(4), ga(4), pb(4), gb(4);
  pa << 1, 2, 3, 4;
  ga << 0.5, -1, 2, 0;
  pb << -1, 1, 0, 2;
  gb << 1, 1, 5, 0.25;
  // products: a = [0.5, -2, 6, 0], b = [-1, 1, 0, 0.5]
  const auto t = [](const Array& v) { return Tensor(v, {2, 2}); };
  CHECK(dual_loss(t(pa), t(ga), t(pb), t(gb), Array::Ones(2)).item() ==
        doctest::Approx((1.5 + 3 + 6 + 0.5) / 4.0).epsilon(1e-15));
  // second column masked: only entries 0 and 2
  CHECK(dual_loss(t(pa), t(ga), t(pb), t(gb), Eigen::Vector2d(1, 0).array()).item() ==
        doctest::Approx((1.5 + 6) / 2.0).epsilon(1e-15));
  CHECK(dual_loss(t(pa), t(ga), t(pb), t(gb), Array::Ones(2), true).item() ==
        doctest::Approx((0.5 + 2 + 3 + 0.25) / 4.0).epsilon(1e-15));
}

TEST_CASE("composition") {
  const Tensor rec = Tensor::scalar(0.7), cl = Tensor::scalar(0.4);
  CHECK(compose_pretrain(rec, cl, LossWeights::config_a()).item() == 0.7);
  CHECK(compose_pretrain(rec, cl, LossWeights::config_b()).item() == doctest::Approx(7.4));
  const auto w = LossWeights::config_a();
  CHECK(compose_dualgan(Tensor::scalar(1), Tensor::scalar(2), Tensor::scalar(3), w).item() == 52.0);
  // linear in each term
  const double base = compose_dualgan(Tensor::scalar(0.3), Tensor::scalar(0.9), Tensor::scalar(0.1), w).item();
  const double h = 1e-3;
  CHECK((compose_dualgan(Tensor::scalar(0.3 + h), Tensor::scalar(0.9), Tensor::scalar(0.1), w).item() - base) / h ==
        doctest::Approx(5.0).epsilon(1e-9));
  CHECK((compose_dualgan(Tensor::scalar(0.3), Tensor::scalar(0.9 + h), Tensor::scalar(0.1), w).item() - base) / h ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK((compose_dualgan(Tensor::scalar(0.3), Tensor::scalar(0.9), Tensor::scalar(0.1 + h), w).item() - base) / h ==
        doctest::Approx(15.0).epsilon(1e-9));
}

TEST_CASE("reconstruction loss gradient reaches the scales") {
  WaveletEncoder enc(EncoderConfig{.scales = 4, .init_lo = 5.0, .init_hi = 200.0});
  std::vector<double> s(512), m(512);
  for (int i = 0; i < 512; ++i) {
    s[i] = 5.0 + 0.1 * std::sin(i / 30.0) + 0.05 * std::cos(i / 7.0);
    m[i] = (i / 40) % 4 == 3 ? 0.0 : 1.0;
  }
  const ModelInput x = input_from(s, m);
  auto loss = [&] {
    return masked_l1(enc.reconstruct(enc.encode(s, 512, 5.0)), x);
  };
  auto r = testing::check_gradients(loss, enc.parameters());
  CHECK(r.ok());
}

TEST_CASE("loss log") {
  const auto path = std::filesystem::temp_directory_path() / "f0vc_loss_log.csv";
  {
    LossLog log(path.string());
    log.append({3, "pretrain", 0.125, NAN, NAN, NAN, NAN, NAN, 0.125});
  }
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "step,phase,L_rec,L_cl,L_ab,L_adv_D,L_adv_G,L_dual,total");
  CHECK(row == "3,pretrain,0.125,,,,,,0.125");
  CHECK_THROWS_AS(LossLog("/nonexistent/dir/log.csv"), IoError);
}
