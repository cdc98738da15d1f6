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

#include "vlp/nn.hpp"

#include "vlp/errors.hpp"

#include <cmath>

namespace vlp::nn
{

Var ParamStore::add(const std::string & name, Mat init)
{
  if (find(name) != nullptr) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  Var v(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

const Var * ParamStore::find(const std::string & name) const
{
  for (const auto & [n, v] : entries_) {
    if (n == name) {
      return &v;
    }
  }
  return nullptr;
}

std::size_t ParamStore::scalar_count() const
{
  std::size_t n = 0;
  for (const auto & [name, v] : entries_) {
    n += static_cast<std::size_t>(v.value().size());
  }
  return n;
}

void ParamStore::zero_grad()
{
  for (auto & [name, v] : entries_) {
    v.zero_grad();
  }
}

Mat glorot(std::mt19937_64 & rng, Eigen::Index fan_in, Eigen::Index fan_out)
{
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng);
  }
  return m;
}

Var Linear::operator()(const Var & x) const { return ag::add_row(ag::matmul(x, weight), bias); }

Linear make_linear(
  ParamStore & store, const std::string & name, Eigen::Index in, Eigen::Index out,
  std::mt19937_64 & rng)
{
  Linear l;
  l.weight = store.add(name + ".weight", glorot(rng, in, out));
  l.bias = store.add(name + ".bias", Mat::Zero(1, out));
  return l;
}

Var CrossAttention::operator()(const Var & queries, const Var & memory) const
{
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(query.out_dim()));
  Var q = query(queries);
  Var k = key(memory);
  Var v = value(memory);
  Var attn = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), inv_sqrt));
  return out(ag::matmul(attn, v));
}

CrossAttention make_cross_attention(
  ParamStore & store, const std::string & name, Eigen::Index dim, std::mt19937_64 & rng)
{
  return CrossAttention{
    make_linear(store, name + ".q", dim, dim, rng), make_linear(store, name + ".k", dim, dim, rng),
    make_linear(store, name + ".v", dim, dim, rng), make_linear(store, name + ".o", dim, dim, rng)};
}

Var Mlp::operator()(const Var & x) const { return second(ag::relu(first(x))); }

Mlp make_mlp(
  ParamStore & store, const std::string & name, Eigen::Index in, Eigen::Index hidden,
  Eigen::Index out, std::mt19937_64 & rng)
{
  return Mlp{
    make_linear(store, name + ".fc1", in, hidden, rng),
    make_linear(store, name + ".fc2", hidden, out, rng)};
}

AdamW::AdamW(std::vector<Var> params, AdamWConfig config)
: params_(std::move(params)), config_(config)
{
  for (const auto & p : params_) {
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

double AdamW::step()
{
  double sq = 0.0;
  for (const auto & p : params_) {
    if (p.has_grad()) {
      sq += p.grad().squaredNorm();
    }
  }
  const double norm = std::sqrt(sq);
  double clip = 1.0;
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm) {
    clip = config_.clip_norm / norm;
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto & p = params_[i];
    if (!p.has_grad()) {
      continue;
    }
    Mat g = p.grad() * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    Mat & w = p.mutable_value();
    if (config_.weight_decay > 0.0 && w.rows() > 1) {
      w *= (1.0 - config_.lr * config_.weight_decay);
    }
    w.array() -=
      config_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
  return norm;
}

void AdamW::zero_grad()
{
  for (auto & p : params_) {
    p.zero_grad();
  }
}

}  // namespace vlp::nn
