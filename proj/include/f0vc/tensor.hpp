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

// Dense row-major tensors with reverse-mode gradient accumulation.
//
// A Tensor is a shared handle onto a graph node. Leaves created with
// requires_grad are parameters: their grad buffer persists and accumulates
// across backward() calls until zero_grad(). Intermediate nodes record a
// backward rule and their parents; backward() walks the reachable subgraph
// once in reverse creation order.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace f0vc::ad {

using Index = Eigen::Index;
using Array = Eigen::ArrayXd;
using Shape = std::vector<Index>;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Array value;
  Array grad;
  Shape shape;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Array values, Shape shape, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(const std::vector<double>& values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  Index dim(std::size_t axis) const { return node_->shape.at(axis); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const Array& value() const { return node_->value; }
  // Mutable access is for optimizers and initializers acting on leaves.
  Array& value_mut() { return node_->value; }
  const Array& grad() const { return node_->grad; }
  Array& grad_mut() { return node_->grad; }
  double item() const;

  // Rank-2 views (rank-1 tensors are viewed as a single row).
  ConstMatrixMap matrix() const;

  void zero_grad();
  // Same values, no history, no grad.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Array, Shape, const std::vector<Tensor>&,
                            std::function<void(Node&)>);

  std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates an op output. The backward rule is attached only when recording is
/// enabled and some input requires grad. Throws NumericError on non-finite
/// values.
Tensor make_result(Array value, Shape shape, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward);

/// The recorded history reachable from a loss, in creation order.
class Tape {
 public:
  explicit Tape(const Tensor& loss);

  const std::vector<Node*>& nodes() const { return nodes_; }
  // Runs every backward rule exactly once, last node first.
  void run_backward();

 private:
  std::vector<Node*> nodes_;
};

/// Fills d(loss)/d(leaf) into every reachable requires_grad leaf (additively).
void backward(const Tensor& loss);

/// Central finite-difference gradient of `f` with respect to every entry of
/// `param`. The function must be deterministic.
Array numerical_gradient(const std::function<double()>& f, Tensor& param,
                         double step);

}  // namespace f0vc::ad
