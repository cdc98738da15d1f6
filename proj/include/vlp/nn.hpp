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

#pragma once

#include "vlp/autograd.hpp"

#include <random>
#include <string>
#include <vector>

namespace vlp::nn
{

using ag::Mat;
using ag::Var;

/// Ordered, named collection of trainable tensors. Order is the insertion
/// order and is what checkpoints and the optimizer iterate over.
class ParamStore
{
public:
  Var add(const std::string & name, Mat init);
  const Var * find(const std::string & name) const;
  const std::vector<std::pair<std::string, Var>> & entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();

private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Uniform Glorot initialisation.
Mat glorot(std::mt19937_64 & rng, Eigen::Index fan_in, Eigen::Index fan_out);

struct Linear
{
  Var weight;  // in x out
  Var bias;    // 1 x out

  Var operator()(const Var & x) const;
  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
};

Linear make_linear(
  ParamStore & store, const std::string & name, Eigen::Index in, Eigen::Index out,
  std::mt19937_64 & rng);

/// Single-head scaled dot-product cross attention with output projection.
struct CrossAttention
{
  Linear query;
  Linear key;
  Linear value;
  Linear out;

  Var operator()(const Var & queries, const Var & memory) const;
};

CrossAttention make_cross_attention(
  ParamStore & store, const std::string & name, Eigen::Index dim, std::mt19937_64 & rng);

/// Two affine layers with a ReLU between.
struct Mlp
{
  Linear first;
  Linear second;

  Var operator()(const Var & x) const;
};

Mlp make_mlp(
  ParamStore & store, const std::string & name, Eigen::Index in, Eigen::Index hidden,
  Eigen::Index out, std::mt19937_64 & rng);

struct AdamWConfig
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

/// AdamW with decoupled weight decay on tensors with more than one row;
/// bias rows and scalars are not decayed.
class AdamW
{
public:
  AdamW(std::vector<Var> params, AdamWConfig config);

  /// Applies one update from the gradients currently stored on the
  /// parameters. Returns the pre-clipping global gradient norm.
  double step();
  void zero_grad();
  const AdamWConfig & config() const { return config_; }

private:
  std::vector<Var> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  AdamWConfig config_;
  long step_count_ = 0;
};

}  // namespace vlp::nn
