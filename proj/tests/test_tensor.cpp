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
#include <random>

#include "doctest.h"
#include "f0vc/adam.hpp"
#include "f0vc/error.hpp"
#include "f0vc/ops.hpp"
#include "f0vc/gradcheck.hpp"

using namespace f0vc;
using ad::Array;
using ad::Shape;
using ad::Tensor;
using testing::check_gradients;
using testing::random_tensor;

namespace {

Tensor row(std::initializer_list<double> v, bool rg = false) {
  return Tensor::vector(std::vector<double>(v), rg);
}

Tensor mat(ad::Index r, ad::Index c, std::initializer_list<double> v,
           bool rg = false) {
  return Tensor(Eigen::Map<const Array>(std::data(v), r * c), Shape{r, c}, rg);
}

void check_values(const Tensor& t, std::initializer_list<double> expected,
                  double tol = 1e-12) {
  REQUIRE(t.size() == static_cast<ad::Index>(expected.size()));
  ad::Index i = 0;
  for (double e : expected) CHECK(t.value()[i++] == doctest::Approx(e).epsilon(tol));
}

}  // namespace

TEST_CASE("conv1d examples") {
  SUBCASE("identity kernel") {
    Tensor y = ad::conv1d(mat(1, 3, {1, 2, 3}), Tensor(Array::Ones(1), Shape{1, 1, 1}),
                          Tensor());
    check_values(y, {1, 2, 3});
  }
  SUBCASE("zero input gives zero output") {
    std::mt19937_64 rng(3);
    Tensor x = Tensor::zeros(Shape{1, 512});
    Tensor y = ad::conv1d(x, random_tensor(Shape{2, 1, 7}, rng, false), Tensor());
    CHECK(y.value().abs().maxCoeff() == 0.0);
  }
  SUBCASE("same padding puts the extra zero on the left") {
    // hand cross-correlation: y[t] = x[t-1] + x[t]
    Tensor y = ad::conv1d(mat(1, 4, {1, 0, 0, 1}), Tensor(Array::Ones(2), Shape{1, 1, 2}),
                          Tensor());
    check_values(y, {1, 1, 0, 1});
  }
  SUBCASE("stride gives ceil(T / stride) outputs") {
    Tensor y = ad::conv1d(Tensor::zeros(Shape{2, 9}), Tensor::zeros(Shape{3, 2, 5}),
                          Tensor(), 2);
    CHECK(y.shape() == Shape{3, 5});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(ad::conv1d(Tensor::zeros(Shape{2, 8}), Tensor::zeros(Shape{1, 3, 3}),
                               Tensor()),
                    DimensionError);
  }
}

TEST_CASE("dense examples") {
  check_values(ad::dense(row({3, 4}), mat(2, 2, {1, 0, 0, 1}), row({0, 0})), {3, 4});
  check_values(ad::dense(row({7, -2}), mat(2, 2, {0, 0, 0, 0}), row({1, 2})), {1, 2});
  check_values(ad::dense(row({2, 3}), mat(2, 2, {1, 1, 1, -1}), row({0, 0})), {5, -1});
  CHECK_THROWS_AS(ad::dense(row({1, 2, 3}), mat(2, 2, {1, 0, 0, 1}), row({0, 0})),
                  DimensionError);
}

TEST_CASE("activations") {
  check_values(ad::relu(row({-1, 0, 2})), {0, 0, 2});
  check_values(ad::softmax(row({0, 0})), {0.5, 0.5});
  check_values(ad::sigmoid(row({0})), {0.5});
  CHECK_THROWS_AS(ad::log(row({1, 0})), DomainError);
  CHECK_THROWS_AS(ad::log(row({-2})), DomainError);
  check_values(ad::leaky_relu(row({-1, 3}), 0.2), {-0.2, 3});
  // log_sigmoid stays finite far in the tail
  CHECK(ad::log_sigmoid(row({-800})).item() == doctest::Approx(-800));
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(Shape{64}, rng, false);
  CHECK((ad::dropout(x, 0.0, 1u, true).value() == x.value()).all());
  CHECK((ad::dropout(x, 0.7, 1u, false).value() == x.value()).all());
  CHECK_THROWS_AS(ad::dropout(x, 1.0, 1u, true), ContractError);

  Tensor ones(Array::Ones(10000), Shape{10000});
  Tensor y = ad::dropout(ones, 0.5, 1234u, true);
  const double survivors = (y.value() != 0.0).count();
  // every survivor carries exactly 1 / (1 - rate)
  CHECK(y.value().sum() == doctest::Approx(2.0 * survivors));
  CHECK(std::abs(y.value().mean() - 1.0) <= 0.05);
  // same seed, same mask
  CHECK((ad::dropout(ones, 0.5, 1234u, true).value() == y.value()).all());
}

TEST_CASE("reductions") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor(Shape{7}, rng, false);
  CHECK(ad::l1_mean(x, x).item() == 0.0);
  CHECK(ad::cross_entropy(row({0.5, 0.5}), Eigen::VectorXd::Unit(2, 0).array()).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ad::l1_mean(row({1, 2}), row({2, 4})).item() == doctest::Approx(1.5));
  CHECK_THROWS_AS(ad::cross_entropy(row({0.0, 1.0}), Eigen::VectorXd::Unit(2, 0).array()), DomainError);
  Array mask(4);
  mask << 1, 0, 1, 0;
  CHECK(ad::l1_masked_mean(row({1, 100, 3, -7}), row({0, 0, 0, 0}), mask).item() ==
        doctest::Approx(2.0));
  CHECK_THROWS_AS(ad::l1_masked_mean(row({1}), row({1}), Array::Zero(1)), ContractError);
}

TEST_CASE("backward basics") {
  Tensor w = row({0.5, -1.0, 2.0}, true);
  Tensor unused = row({1.0}, true);
  Array xv(3);
  xv << 3, 4, 5;
  ad::backward(ad::dot_const(w, xv));
  CHECK((w.grad() == xv).all());
  CHECK(unused.grad()[0] == 0.0);

  // grads accumulate when a tensor is used twice and across passes
  w.zero_grad();
  ad::backward(ad::sum(ad::add(w, w)));
  CHECK((w.grad() == 2.0).all());
  ad::backward(ad::sum(w));
  CHECK((w.grad() == 3.0).all());

  CHECK_THROWS_AS(ad::backward(ad::add(w, w)), ContractError);
}

TEST_CASE("tape visits each node once in reverse creation order") {
  Tensor a = row({1.0, 2.0}, true);
  Tensor b = ad::exp(a);
  Tensor c = ad::mul(b, b);
  Tensor loss = ad::sum(ad::add(c, b));
  ad::Tape tape(loss);
  const auto& nodes = tape.nodes();
  for (std::size_t i = 1; i < nodes.size(); ++i) CHECK(nodes[i - 1]->seq < nodes[i]->seq);
  for (const ad::Node* n : nodes)
    for (const auto& p : n->parents)
      if (p->requires_grad) CHECK(p->seq < n->seq);
  CHECK(nodes.size() == 5);  // a, b, c, add, sum
}

TEST_CASE("composed graphs match central differences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor(Shape{3, 24}, rng, true);
    Tensor k1 = random_tensor(Shape{4, 3, 5}, rng, true, 0.4);
    Tensor b1 = random_tensor(Shape{4}, rng, true, 0.1);
    Tensor k2 = random_tensor(Shape{2, 4 + 4, 3}, rng, true, 0.4);
    Tensor img_k = random_tensor(Shape{3, 1, 3, 3}, rng, true, 0.4);
    Tensor w = random_tensor(Shape{2, 3 * 2 * 6}, rng, true, 0.2);
    Tensor bw = random_tensor(Shape{2}, rng, true, 0.1);
    Tensor taps_scale = Tensor::scalar(1.7 + trial * 0.3, true);
    Array target = Eigen::VectorXd::Unit(2, trial % 2).array();
    auto loss = [&] {
      Tensor h = ad::relu(ad::conv1d(x, k1, b1, 2));                 // [4 x 12]
      Tensor up = ad::upsample2(h);                                  // [4 x 24]
      Tensor skip = ad::slice_cols(ad::leaky_relu(ad::conv1d(x, k1, Tensor()), 0.2), 0, 24);
      Tensor cat = ad::concat_rows({up, skip});                      // [8 x 24]
      Tensor y = ad::conv1d(cat, k2, Tensor());                      // [2 x 24]
      Tensor img = ad::reshape(ad::sigmoid(y), Shape{1, 2, 24});
      Tensor c2 = ad::conv2d(img, img_k, Tensor(), 1, 1);            // [3 x 2 x 24]
      Tensor pooled = ad::max_pool_last(c2, 4);                      // [3 x 2 x 6]
      Tensor p = ad::softmax(ad::dense(pooled, w, bw));
      Tensor ce = ad::cross_entropy(p, target);
      Tensor sig = ad::slice_cols(ad::reshape(ad::correlate_same(
                                      ad::reshape(ad::slice_cols(x, 0, 24), Shape{72}),
                                      ad::ricker_taps(taps_scale, 9)),
                                  Shape{1, 72}), 10, 20);
      return ad::add(ce, ad::scale(ad::mean(ad::softplus(sig)), 0.3));
    };
    auto r = check_gradients(loss, {x, k1, b1, k2, img_k, w, bw, taps_scale});
    INFO(r.worst_where);
    CHECK(r.ok());
  }
}

TEST_CASE("structural ops match central differences") {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor(Shape{3, 5}, rng, true);
  Tensor f = random_tensor(Shape{3}, rng, true);
  Tensor v = random_tensor(Shape{6}, rng, true);
  auto loss = [&] {
    Tensor s = ad::scale_rows(a, f);
    Tensor blocks = ad::concat_cols({ad::slice_cols(s, 0, 4), ad::slice_cols(s, 4, 4)}, {4, 1});
    Tensor cs = ad::cumsum(v);
    Tensor st = ad::stack({ad::select(cs, 5), ad::select(cs, 2)});
    return ad::add_n({ad::mean(ad::square(ad::sum_rows(blocks))),
                      ad::sum(ad::exp(ad::scale(st, 0.1))),
                      ad::sum(ad::log(ad::add_scalar(ad::abs(v), 1.0)))});
  };
  auto r = check_gradients(loss, {a, f, v});
  INFO(r.worst_where);
  CHECK(r.ok());
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(9);
  Tensor k = random_tensor(Shape{2, 2, 3}, rng, true);
  Tensor x = random_tensor(Shape{2, 16}, rng, false);
  auto base = [&] { return ad::mean(ad::square(ad::conv1d(x, k, Tensor()))); };
  ad::backward(base());
  const Array g1 = k.grad();
  k.zero_grad();
  ad::backward(ad::scale(base(), 2.0));
  CHECK((k.grad() == 2.0 * g1).all());
  k.zero_grad();
  ad::backward(ad::scale(base(), -0.37));
  CHECK(((k.grad() - (-0.37) * g1).abs() <= 1e-14 * g1.abs().maxCoeff()).all());
}

TEST_CASE("identical seeds give bit-identical values and grads") {
  auto run = [] {
    std::mt19937_64 rng(2024);
    Tensor k = random_tensor(Shape{3, 2, 5}, rng, true);
    Tensor x = random_tensor(Shape{2, 40}, rng, false);
    Tensor y = ad::dropout(ad::relu(ad::conv1d(x, k, Tensor(), 2)), 0.5, rng, true);
    Tensor loss = ad::mean(y);
    ad::backward(loss);
    return std::make_pair(loss.item(), Array(k.grad()));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK((a.second == b.second).all());
}

TEST_CASE("softmax sums to one") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    Tensor p = ad::softmax(random_tensor(Shape{2 + i % 7}, rng, false, 10.0));
    CHECK(std::abs(p.value().sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("non-finite values are rejected") {
  CHECK_THROWS_AS(ad::exp(row({1000.0})), NumericError);
}

TEST_CASE("adam") {
  SUBCASE("first step moves by about lr") {
    Tensor p = row({1.0, -2.0}, true);
    std::vector<Tensor> params{p};
    AdamState st;
    p.grad_mut() << 0.3, -7.0;
    adam_step(params, st);
    CHECK(p.value()[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-7));
    CHECK(p.value()[1] == doctest::Approx(-2.0 + 1e-4).epsilon(1e-7));
    CHECK(st.step == 1);
    CHECK((p.grad() == 0.0).all());
  }
  SUBCASE("zero grad leaves parameters unchanged") {
    Tensor p = row({0.25}, true);
    std::vector<Tensor> params{p};
    AdamState st;
    adam_step(params, st);
    CHECK(p.value()[0] == 0.25);
  }
  SUBCASE("two steps follow the scripted recurrence") {
    Tensor p = row({0.0}, true);
    std::vector<Tensor> params{p};
    AdamState st;
    double m = 0, v = 0, x = 0;
    for (int t = 1; t <= 2; ++t) {
      p.grad_mut()[0] = 1.0;
      adam_step(params, st);
      m = 0.9 * m + 0.1 * 1.0;
      v = 0.999 * v + 0.001 * 1.0;
      const double mh = m / (1 - std::pow(0.9, t));
      const double vh = v / (1 - std::pow(0.999, t));
      x -= 1e-4 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::abs(p.value()[0] - x) <= 1e-12);
  }
  SUBCASE("missing grad is a contract error") {
    Tensor p = row({1.0}, false);
    std::vector<Tensor> params{p};
    AdamState st;
    CHECK_THROWS_AS(adam_step(params, st), ContractError);
  }
}
