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

#include "vlp/contrastive.hpp"

#include "vlp/errors.hpp"

#include <cmath>
#include <numeric>

namespace vlp
{

namespace
{

void check_alpha(double alpha, double max_alpha)
{
  if (!(alpha > 0.0) || !(max_alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("logit scale must be positive and finite");
  }
}

}  // namespace

LogitScale::LogitScale(double alpha, double max_alpha) : max_alpha_(max_alpha)
{
  check_alpha(alpha, max_alpha);
  raw_ = ag::Var::scalar(std::log(std::min(alpha, max_alpha)), true);
}

LogitScale::LogitScale(nn::ParamStore & store, const std::string & name, double alpha, double max_alpha)
: max_alpha_(max_alpha)
{
  check_alpha(alpha, max_alpha);
  ag::Mat init(1, 1);
  init(0, 0) = std::log(std::min(alpha, max_alpha));
  raw_ = store.add(name, init);
}

double LogitScale::alpha() const { return std::exp(raw_.item()); }

ag::Var LogitScale::alpha_var() const { return ag::exp(raw_); }

void LogitScale::clamp()
{
  const double cap = std::log(max_alpha_);
  if (raw_.mutable_value()(0, 0) > cap) {
    raw_.mutable_value()(0, 0) = cap;
  }
}

ag::Var similarity(const ag::Var & produced, const ag::Var & expected, const LogitScale & scale)
{
  if (produced.rows() == 0 || produced.rows() != expected.rows() || produced.cols() != expected.cols()) {
    throw ArgumentError(
      "similarity needs two N x C inputs of equal shape, got " + std::to_string(produced.rows()) + "x" +
      std::to_string(produced.cols()) + " and " + std::to_string(expected.rows()) + "x" +
      std::to_string(expected.cols()));
  }
  const ag::Var cos = ag::matmul_nt(ag::normalize_rows(produced), ag::normalize_rows(expected));
  return ag::mul_scalar(cos, scale.alpha_var());
}

ag::Var symmetric_ce_loss(const ag::Var & s)
{
  if (s.rows() == 0 || s.rows() != s.cols()) {
    throw ArgumentError("symmetric_ce_loss needs a nonempty square matrix");
  }
  std::vector<ag::Index> targets(static_cast<std::size_t>(s.rows()));
  std::iota(targets.begin(), targets.end(), ag::Index{0});
  const ag::Var rows = ag::cross_entropy_rows(s, targets);
  const ag::Var cols = ag::cross_entropy_rows(ag::transpose(s), targets);
  return ag::scale(ag::add(rows, cols), 0.5);
}

ag::Var alp_loss(
  const AgentFeatureBatch & produced, const ExpectationBatch & expected, const LogitScale & scale)
{
  if (produced.meta != expected.meta) {
    throw PairingError("ALP rows are not paired: agent metadata differs between features and prompts");
  }
  if (produced.features.rows() != static_cast<ag::Index>(produced.meta.size()) ||
      expected.features.rows() != static_cast<ag::Index>(expected.meta.size())) {
    throw PairingError("ALP metadata length does not match the feature row count");
  }
  return symmetric_ce_loss(similarity(produced.features, expected.features, scale));
}

ag::Var slp_loss(const ag::Var & ego_features, const ag::Var & ego_prompts, const LogitScale & scale)
{
  if (ego_features.rows() != ego_prompts.rows()) {
    throw PairingError("SLP needs one prompt per sample");
  }
  return symmetric_ce_loss(similarity(ego_features, ego_prompts, scale));
}

double diagonal_accuracy(const ag::Mat & s)
{
  if (s.rows() == 0 || s.rows() != s.cols()) {
    throw ArgumentError("diagonal_accuracy needs a nonempty square matrix");
  }
  int hits = 0;
  for (ag::Index i = 0; i < s.rows(); ++i) {
    ag::Index arg = 0;
    s.row(i).maxCoeff(&arg);
    hits += arg == i ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

int count_duplicate_rows(const ag::Mat & m)
{
  int dup = 0;
  for (ag::Index i = 1; i < m.rows(); ++i) {
    for (ag::Index j = 0; j < i; ++j) {
      if (m.row(i) == m.row(j)) {
        ++dup;
        break;
      }
    }
  }
  return dup;
}

}  // namespace vlp
