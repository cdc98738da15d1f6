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

// Scaled cosine similarity between paired feature sets and the symmetric
// cross-entropy objective against an identity target.

#pragma once

#include "vlp/autograd.hpp"
#include "vlp/bev.hpp"
#include "vlp/nn.hpp"

#include <string>
#include <vector>

namespace vlp
{

inline constexpr double kDefaultLogitScale = 1.0 / 0.07;
inline constexpr double kMaxLogitScale = 100.0;

/// Learnable positive temperature. Stored as raw = log(alpha) so alpha stays
/// positive; clamp() enforces alpha <= max_alpha.
class LogitScale
{
public:
  explicit LogitScale(double alpha = kDefaultLogitScale, double max_alpha = kMaxLogitScale);
  /// Registers the raw parameter in a store under the given name.
  LogitScale(nn::ParamStore & store, const std::string & name, double alpha = kDefaultLogitScale,
             double max_alpha = kMaxLogitScale);

  const ag::Var & raw() const { return raw_; }
  double alpha() const;
  /// exp(raw) as a graph node.
  ag::Var alpha_var() const;
  void clamp();

private:
  ag::Var raw_;
  double max_alpha_;
};

/// Expectation rows paired one-to-one with produced rows.
struct ExpectationBatch
{
  ag::Var features;  // N x C
  std::vector<AgentMeta> meta;
};

/// S[i][j] = alpha * cos(produced_i, expected_j). Throws ArgumentError on
/// shape mismatch or empty inputs, DegenerateError on a zero row.
ag::Var similarity(const ag::Var & produced, const ag::Var & expected, const LogitScale & scale);

/// Mean of the row-wise and column-wise softmax cross-entropy with target
/// class i for row i. Throws ArgumentError for a non-square matrix.
ag::Var symmetric_ce_loss(const ag::Var & s);

/// Throws PairingError unless the two batches carry identical metadata.
ag::Var alp_loss(
  const AgentFeatureBatch & produced, const ExpectationBatch & expected, const LogitScale & scale);

/// Sample-wise loss; throws PairingError on row-count mismatch.
ag::Var slp_loss(const ag::Var & ego_features, const ag::Var & ego_prompts, const LogitScale & scale);

/// Fraction of rows whose maximum sits on the diagonal (ties count as misses
/// unless the diagonal is the first maximum).
double diagonal_accuracy(const ag::Mat & s);

/// Number of rows that duplicate an earlier row exactly.
int count_duplicate_rows(const ag::Mat & m);

}  // namespace vlp
