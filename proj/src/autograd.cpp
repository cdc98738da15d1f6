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

#include "vlp/autograd.hpp"

#include "vlp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace vlp::ag
{

namespace
{

thread_local bool g_grad_enabled = true;

void accumulate(Node & node, const Mat & g)
{
  if (!node.requires_grad) {
    return;
  }
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Mat & grad_buffer(Node & node)
{
  if (node.grad.size() == 0) {
    node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Var make_result(Mat value, std::initializer_list<Var> inputs, std::function<void(Node &)> bw)
{
  Var out(std::move(value));
  if (!g_grad_enabled) {
    return out;
  }
  bool any = false;
  for (const auto & in : inputs) {
    any = any || in.requires_grad();
  }
  if (!any) {
    return out;
  }
  auto & node = *out.node();
  node.requires_grad = true;
  for (const auto & in : inputs) {
    node.inputs.push_back(in.node());
  }
  node.backward = std::move(bw);
  return out;
}

void require_same_shape(const Var & a, const Var & b, const char * op)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(
      std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<Node>())
{
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v, bool requires_grad)
{
  Mat m(1, 1);
  m(0, 0) = v;
  return Var(std::move(m), requires_grad);
}

double Var::item() const
{
  if (rows() != 1 || cols() != 1) {
    throw ArgumentError("item() on a non-scalar tensor");
  }
  return node_->value(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var & loss)
{
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ArgumentError("backward() requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    return;
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node *> order;
  std::unordered_set<Node *> visited;
  std::vector<std::pair<Node *, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto & [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node * child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  accumulate(*loss.node(), Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node * node = *it;
    if (node->backward && node->grad.size() > 0) {
      node->backward(*node);
    }
  }
}

Var matmul(const Var & a, const Var & b)
{
  if (a.cols() != b.rows()) {
    throw ArgumentError("matmul: inner dimensions differ");
  }
  Mat v(a.rows(), b.cols());
  v.noalias() = a.value() * b.value();
  return make_result(std::move(v), {a, b}, [](Node & self) {
    Node & na = *self.inputs[0];
    Node & nb = *self.inputs[1];
    if (na.requires_grad) {
      grad_buffer(na).noalias() += self.grad * nb.value.transpose();
    }
    if (nb.requires_grad) {
      grad_buffer(nb).noalias() += na.value.transpose() * self.grad;
    }
  });
}

Var matmul_nt(const Var & a, const Var & b)
{
  if (a.cols() != b.cols()) {
    throw ArgumentError("matmul_nt: column counts differ");
  }
  Mat v(a.rows(), b.rows());
  v.noalias() = a.value() * b.value().transpose();
  return make_result(std::move(v), {a, b}, [](Node & self) {
    Node & na = *self.inputs[0];
    Node & nb = *self.inputs[1];
    if (na.requires_grad) {
      grad_buffer(na).noalias() += self.grad * nb.value;
    }
    if (nb.requires_grad) {
      grad_buffer(nb).noalias() += self.grad.transpose() * na.value;
    }
  });
}

Var transpose(const Var & a)
{
  Mat v = a.value().transpose();
  return make_result(std::move(v), {a}, [](Node & self) {
    accumulate(*self.inputs[0], self.grad.transpose());
  });
}

Var add(const Var & a, const Var & b)
{
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node & self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

Var sub(const Var & a, const Var & b)
{
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node & self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], -self.grad);
  });
}

Var mul(const Var & a, const Var & b)
{
  require_same_shape(a, b, "mul");
  Mat v = a.value().cwiseProduct(b.value());
  return make_result(std::move(v), {a, b}, [](Node & self) {
    Node & na = *self.inputs[0];
    Node & nb = *self.inputs[1];
    if (na.requires_grad) {
      grad_buffer(na) += self.grad.cwiseProduct(nb.value);
    }
    if (nb.requires_grad) {
      grad_buffer(nb) += self.grad.cwiseProduct(na.value);
    }
  });
}

Var scale(const Var & a, double c)
{
  return make_result(a.value() * c, {a}, [c](Node & self) {
    accumulate(*self.inputs[0], self.grad * c);
  });
}

Var add_row(const Var & a, const Var & row)
{
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ArgumentError("add_row: bias must be 1 x cols");
  }
  Mat v = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(v), {a, row}, [](Node & self) {
    accumulate(*self.inputs[0], self.grad);
    Node & nr = *self.inputs[1];
    if (nr.requires_grad) {
      grad_buffer(nr) += self.grad.colwise().sum();
    }
  });
}

Var mul_scalar(const Var & a, const Var & s)
{
  if (s.rows() != 1 || s.cols() != 1) {
    throw ArgumentError("mul_scalar: scale must be 1x1");
  }
  Mat v = a.value() * s.value()(0, 0);
  return make_result(std::move(v), {a, s}, [](Node & self) {
    Node & na = *self.inputs[0];
    Node & ns = *self.inputs[1];
    const double sv = ns.value(0, 0);
    if (na.requires_grad) {
      grad_buffer(na) += self.grad * sv;
    }
    if (ns.requires_grad) {
      grad_buffer(ns)(0, 0) += self.grad.cwiseProduct(na.value).sum();
    }
  });
}

Var exp(const Var & a)
{
  Mat v = a.value().array().exp().matrix();
  return make_result(std::move(v), {a}, [](Node & self) {
    accumulate(*self.inputs[0], self.grad.cwiseProduct(self.value));
  });
}

Var relu(const Var & a)
{
  Mat v = a.value().cwiseMax(0.0);
  return make_result(std::move(v), {a}, [](Node & self) {
    Node & na = *self.inputs[0];
    Mat g = (na.value.array() > 0.0).select(self.grad, 0.0);
    accumulate(na, g);
  });
}

Var softmax_rows(const Var & a)
{
  Mat v = a.value();
  for (Index i = 0; i < v.rows(); ++i) {
    const double mx = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - mx).exp().matrix();
    v.row(i) /= v.row(i).sum();
  }
  return make_result(std::move(v), {a}, [](Node & self) {
    const Mat & y = self.value;
    Mat gy = self.grad.cwiseProduct(y);
    Eigen::VectorXd dot = gy.rowwise().sum();
    Mat g = gy - (y.array().colwise() * dot.array()).matrix();
    accumulate(*self.inputs[0], g);
  });
}

Var layer_norm_rows(const Var & a, double eps)
{
  const Mat & x = a.value();
  const Index n = x.cols();
  Eigen::VectorXd inv_std(x.rows());
  Mat v(x.rows(), n);
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    v.row(i) = ((x.row(i).array() - mu) * inv_std(i)).matrix();
  }
  return make_result(std::move(v), {a}, [inv_std](Node & self) {
    const Mat & xhat = self.value;
    const Mat & g = self.grad;
    Mat gx(g.rows(), g.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      const double gm = g.row(i).mean();
      const double gxm = g.row(i).dot(xhat.row(i)) / static_cast<double>(g.cols());
      gx.row(i) = ((g.row(i).array() - gm - xhat.row(i).array() * gxm) * inv_std(i)).matrix();
    }
    accumulate(*self.inputs[0], gx);
  });
}

Var normalize_rows(const Var & a, double min_norm)
{
  const Mat & x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) >= min_norm)) {
      throw DegenerateError("normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    }
  }
  Mat v = (x.array().colwise() / norms.array()).matrix();
  return make_result(std::move(v), {a}, [norms](Node & self) {
    const Mat & y = self.value;
    const Mat & g = self.grad;
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Mat gx = ((g - (y.array().colwise() * dot.array()).matrix()).array().colwise() / norms.array())
               .matrix();
    accumulate(*self.inputs[0], gx);
  });
}

Var detach(const Var & a) { return Var(a.value(), false); }

Var slice_rows(const Var & a, Index begin, Index count)
{
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ArgumentError("slice_rows: range out of bounds");
  }
  Mat v = a.value().middleRows(begin, count);
  return make_result(std::move(v), {a}, [begin, count](Node & self) {
    Node & na = *self.inputs[0];
    if (na.requires_grad) {
      grad_buffer(na).middleRows(begin, count) += self.grad;
    }
  });
}

Var concat_rows(const std::vector<Var> & parts)
{
  if (parts.empty()) {
    throw ArgumentError("concat_rows: no inputs");
  }
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto & p : parts) {
    if (p.cols() != cols) {
      throw ArgumentError("concat_rows: column mismatch");
    }
    rows += p.rows();
  }
  Mat v(rows, cols);
  Index r = 0;
  bool any = false;
  for (const auto & p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    any = any || p.requires_grad();
  }
  Var out(std::move(v));
  if (!g_grad_enabled || !any) {
    return out;
  }
  auto & node = *out.node();
  node.requires_grad = true;
  for (const auto & p : parts) {
    node.inputs.push_back(p.node());
  }
  node.backward = [](Node & self) {
    Index offset = 0;
    for (auto & in : self.inputs) {
      const Index n = in->value.rows();
      if (in->requires_grad) {
        grad_buffer(*in) += self.grad.middleRows(offset, n);
      }
      offset += n;
    }
  };
  return out;
}

Var gather_rows(const Var & a, const std::vector<Index> & rows)
{
  Mat v(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw ArgumentError("gather_rows: index out of range");
    }
    v.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  return make_result(std::move(v), {a}, [rows](Node & self) {
    Node & na = *self.inputs[0];
    if (!na.requires_grad) {
      return;
    }
    Mat & g = grad_buffer(na);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g.row(rows[i]) += self.grad.row(static_cast<Index>(i));
    }
  });
}

Var segment_mean(const Var & a, const std::vector<std::vector<Index>> & groups)
{
  Mat v = Mat::Zero(static_cast<Index>(groups.size()), a.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto & idx = groups[g];
    if (idx.empty()) {
      throw EmptyRegionError("segment_mean: empty group");
    }
    for (Index r : idx) {
      if (r < 0 || r >= a.rows()) {
        throw ArgumentError("segment_mean: index out of range");
      }
      v.row(static_cast<Index>(g)) += a.value().row(r);
    }
    v.row(static_cast<Index>(g)) /= static_cast<double>(idx.size());
  }
  return make_result(std::move(v), {a}, [groups](Node & self) {
    Node & na = *self.inputs[0];
    if (!na.requires_grad) {
      return;
    }
    Mat & ga = grad_buffer(na);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double w = 1.0 / static_cast<double>(groups[g].size());
      for (Index r : groups[g]) {
        ga.row(r) += w * self.grad.row(static_cast<Index>(g));
      }
    }
  });
}

Var im2col3x3(const Var & a, Index batch, Index height, Index width)
{
  const Index cells = height * width;
  if (a.rows() != batch * cells) {
    throw ArgumentError("im2col3x3: row count does not match batch x H x W");
  }
  const Index c = a.cols();
  const Mat & x = a.value();
  Mat v = Mat::Zero(a.rows(), 9 * c);
  for (Index b = 0; b < batch; ++b) {
    for (Index r = 0; r < height; ++r) {
      for (Index col = 0; col < width; ++col) {
        const Index out_row = b * cells + r * width + col;
        for (Index dy = -1; dy <= 1; ++dy) {
          const Index rr = r + dy;
          if (rr < 0 || rr >= height) {
            continue;
          }
          for (Index dx = -1; dx <= 1; ++dx) {
            const Index cc = col + dx;
            if (cc < 0 || cc >= width) {
              continue;
            }
            const Index k = (dy + 1) * 3 + (dx + 1);
            v.row(out_row).segment(k * c, c) = x.row(b * cells + rr * width + cc);
          }
        }
      }
    }
  }
  return make_result(std::move(v), {a}, [batch, height, width, c, cells](Node & self) {
    Node & na = *self.inputs[0];
    if (!na.requires_grad) {
      return;
    }
    Mat & ga = grad_buffer(na);
    for (Index b = 0; b < batch; ++b) {
      for (Index r = 0; r < height; ++r) {
        for (Index col = 0; col < width; ++col) {
          const Index out_row = b * cells + r * width + col;
          for (Index dy = -1; dy <= 1; ++dy) {
            const Index rr = r + dy;
            if (rr < 0 || rr >= height) {
              continue;
            }
            for (Index dx = -1; dx <= 1; ++dx) {
              const Index cc = col + dx;
              if (cc < 0 || cc >= width) {
                continue;
              }
              const Index k = (dy + 1) * 3 + (dx + 1);
              ga.row(b * cells + rr * width + cc) += self.grad.row(out_row).segment(k * c, c);
            }
          }
        }
      }
    }
  });
}

Var avg_pool2x2(const Var & a, Index batch, Index height, Index width)
{
  if (height % 2 != 0 || width % 2 != 0) {
    throw ArgumentError("avg_pool2x2: grid dimensions must be even");
  }
  const Index cells = height * width;
  if (a.rows() != batch * cells) {
    throw ArgumentError("avg_pool2x2: row count does not match batch x H x W");
  }
  const Index oh = height / 2;
  const Index ow = width / 2;
  const Mat & x = a.value();
  Mat v = Mat::Zero(batch * oh * ow, a.cols());
  for (Index b = 0; b < batch; ++b) {
    for (Index r = 0; r < oh; ++r) {
      for (Index c = 0; c < ow; ++c) {
        auto out = v.row(b * oh * ow + r * ow + c);
        for (Index k = 0; k < 4; ++k) {
          out += x.row(b * cells + (2 * r + k / 2) * width + 2 * c + k % 2);
        }
        out *= 0.25;
      }
    }
  }
  return make_result(std::move(v), {a}, [batch, width, cells, oh, ow](Node & self) {
    Node & na = *self.inputs[0];
    if (!na.requires_grad) {
      return;
    }
    Mat & ga = grad_buffer(na);
    for (Index b = 0; b < batch; ++b) {
      for (Index r = 0; r < oh; ++r) {
        for (Index c = 0; c < ow; ++c) {
          const auto g = self.grad.row(b * oh * ow + r * ow + c) * 0.25;
          for (Index k = 0; k < 4; ++k) {
            ga.row(b * cells + (2 * r + k / 2) * width + 2 * c + k % 2) += g;
          }
        }
      }
    }
  });
}

Var sum(const Var & a)
{
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return make_result(std::move(v), {a}, [](Node & self) {
    Node & na = *self.inputs[0];
    accumulate(na, Mat::Constant(na.value.rows(), na.value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var & a)
{
  const double n = static_cast<double>(a.value().size());
  if (n == 0) {
    throw ArgumentError("mean of an empty tensor");
  }
  return scale(sum(a), 1.0 / n);
}

Var cross_entropy_rows(const Var & logits, const std::vector<Index> & targets)
{
  const Mat & z = logits.value();
  if (static_cast<Index>(targets.size()) != z.rows() || z.rows() == 0) {
    throw ArgumentError("cross_entropy_rows: one target per row required");
  }
  const double n = static_cast<double>(z.rows());
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    const Index t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= z.cols()) {
      throw ArgumentError("cross_entropy_rows: target out of range");
    }
    const double mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp().matrix();
    const double s = probs.row(i).sum();
    probs.row(i) /= s;
    total += (mx + std::log(s)) - z(i, t);
  }
  Mat v(1, 1);
  v(0, 0) = total / n;
  return make_result(std::move(v), {logits}, [probs, targets, n](Node & self) {
    Mat g = probs;
    for (Index i = 0; i < g.rows(); ++i) {
      g(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
    }
    accumulate(*self.inputs[0], g * (self.grad(0, 0) / n));
  });
}

Var l1_loss(const Var & a, const Mat & target)
{
  if (a.rows() != target.rows() || a.cols() != target.cols() || target.size() == 0) {
    throw ArgumentError("l1_loss: shape mismatch");
  }
  Mat diff = a.value() - target;
  const double n = static_cast<double>(diff.size());
  Mat v(1, 1);
  v(0, 0) = diff.cwiseAbs().sum() / n;
  Mat sign = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
  return make_result(std::move(v), {a}, [sign, n](Node & self) {
    accumulate(*self.inputs[0], sign * (self.grad(0, 0) / n));
  });
}

Var bce_with_logits(const Var & logits, const Mat & target)
{
  if (logits.rows() != target.rows() || logits.cols() != target.cols() || target.size() == 0) {
    throw ArgumentError("bce_with_logits: shape mismatch");
  }
  const Mat & z = logits.value();
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double zi = z.data()[i];
    total += std::max(zi, 0.0) - zi * target.data()[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  Mat v(1, 1);
  v(0, 0) = total / n;
  return make_result(std::move(v), {logits}, [target, n](Node & self) {
    const Mat & z = self.inputs[0]->value;
    Mat sig = z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    accumulate(*self.inputs[0], (sig - target) * (self.grad(0, 0) / n));
  });
}

}  // namespace vlp::ag
