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

#include "f0vc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "f0vc/error.hpp"

namespace f0vc::ad {
namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_seq{1};

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("shape dimensions must be positive");
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Array values, Shape shape, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape_size(shape) != values.size())
    throw DimensionError("tensor shape " + shape_string(shape) +
                         " does not match " + std::to_string(values.size()) +
                         " values");
  node_->value = std::move(values);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
  node_->seq = g_next_seq++;
  if (requires_grad) node_->grad = Array::Zero(node_->value.size());
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const Index n = shape_size(shape);
  return Tensor(Array::Zero(n), std::move(shape), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Array::Constant(1, value), Shape{1}, requires_grad);
}

Tensor Tensor::vector(const std::vector<double>& values, bool requires_grad) {
  Array a = Eigen::Map<const Array>(values.data(),
                                    static_cast<Index>(values.size()));
  return Tensor(std::move(a), Shape{static_cast<Index>(values.size())},
                requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on a non-scalar tensor");
  return node_->value[0];
}

ConstMatrixMap Tensor::matrix() const {
  const Shape& s = shape();
  if (s.size() == 1) return ConstMatrixMap(value().data(), 1, s[0]);
  if (s.size() != 2)
    throw DimensionError("matrix view needs rank 2, got " + shape_string(s));
  return ConstMatrixMap(value().data(), s[0], s[1]);
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.setZero(node_->value.size());
}

Tensor Tensor::detach() const { return Tensor(value(), shape(), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Array value, Shape shape, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward) {
  if (!value.allFinite())
    throw NumericError("non-finite value produced by tensor op");
  auto node = std::make_shared<Node>();
  if (shape_size(shape) != value.size())
    throw DimensionError("op result shape mismatch");
  node->value = std::move(value);
  node->shape = std::move(shape);
  node->seq = g_next_seq++;
  bool any = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) any = any || (t.defined() && t.requires_grad());
  }
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tape::Tape(const Tensor& loss) {
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n || !n->requires_grad || !seen.insert(n).second) continue;
    nodes_.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(nodes_.begin(), nodes_.end(),
            [](const Node* a, const Node* b) { return a->seq < b->seq; });
}

void Tape::run_backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward) {
      n.backward(n);
      if (!n.grad.allFinite())
        throw NumericError("non-finite gradient during backward");
    }
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;
  Tape tape(loss);
  // Interior nodes start from zero on every pass; leaves keep accumulating.
  for (Node* n : tape.nodes()) {
    if (n->backward || n->grad.size() != n->value.size())
      n->grad.setZero(n->value.size());
  }
  Node& root = *loss.node();
  if (root.grad.size() != 1) root.grad.setZero(1);
  root.grad[0] += 1.0;
  tape.run_backward();
}

Array numerical_gradient(const std::function<double()>& f, Tensor& param,
                         double step) {
  Array g(param.size());
  Array& v = param.value_mut();
  for (Index i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + step;
    const double up = f();
    v[i] = saved - step;
    const double down = f();
    v[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace f0vc::ad
