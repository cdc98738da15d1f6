// Copyright 2026 The VLP Toy Planner Authors
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

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every tensor in the model is 2-D; grids are stored as
// (batch * H * W) x C with row index b * H * W + row * W + col.

#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

namespace vlp::ag
{

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node
{
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node &)> backward;
};

class Var
{
public:
  Var() = default;
  explicit Var(Mat value, bool requires_grad = false);
  static Var scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Mat & value() const { return node_->value; }
  Mat & mutable_value() { return node_->value; }
  const Mat & grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node> & node() const { return node_; }

private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

bool grad_enabled();

/// Runs backpropagation from a 1x1 loss. Gradients accumulate into every
/// reachable node that requires them.
void backward(const Var & loss);

// Linear algebra
Var matmul(const Var & a, const Var & b);
Var matmul_nt(const Var & a, const Var & b);  // a * b^T
Var transpose(const Var & a);

// Elementwise
Var add(const Var & a, const Var & b);
Var sub(const Var & a, const Var & b);
Var mul(const Var & a, const Var & b);
Var scale(const Var & a, double c);
Var add_row(const Var & a, const Var & row);  // broadcast 1 x n over rows
Var mul_scalar(const Var & a, const Var & s);  // s is 1x1
Var exp(const Var & a);
Var relu(const Var & a);

// Row-wise
Var softmax_rows(const Var & a);
Var layer_norm_rows(const Var & a, double eps = 1e-5);
/// Divides each row by its Euclidean norm; throws DegenerateError when a row
/// norm falls below min_norm.
Var normalize_rows(const Var & a, double min_norm = 1e-12);

// Structural
/// Copy of the value that is cut from the graph.
Var detach(const Var & a);
Var slice_rows(const Var & a, Index begin, Index count);
Var concat_rows(const std::vector<Var> & parts);
Var gather_rows(const Var & a, const std::vector<Index> & rows);
/// Row g of the result is the mean of rows groups[g] of a. Groups must be
/// nonempty.
Var segment_mean(const Var & a, const std::vector<std::vector<Index>> & groups);
/// 3x3 neighbourhood unfolding with zero padding: (B*H*W) x C -> (B*H*W) x 9C.
Var im2col3x3(const Var & a, Index batch, Index height, Index width);
/// 2x2 average pooling: (B*H*W) x C -> (B*H/2*W/2) x C.
Var avg_pool2x2(const Var & a, Index batch, Index height, Index width);

// Reductions and losses (all return 1x1)
Var sum(const Var & a);
Var mean(const Var & a);
Var cross_entropy_rows(const Var & logits, const std::vector<Index> & targets);
Var l1_loss(const Var & a, const Mat & target);
Var bce_with_logits(const Var & logits, const Mat & target);

}  // namespace vlp::ag
