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

// Experiment runner: INI configs, content-hashed run directories, dataset
// construction, evaluation, the study drivers (ablation, cross-world,
// long-tail) and report rendering.

#pragma once

#include "vlp/hash.hpp"
#include "vlp/metrics.hpp"
#include "vlp/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vlp
{

inline constexpr int kResultSchemaVersion = 1;
/// Scene seeds of one run: seed0 + run_seed * kSeedStride + i.
inline constexpr std::uint64_t kSeedStride = 1000000;

struct DataConfig
{
  std::string train_world = "cityA";
  std::string test_world = "cityA";
  int train_size = 512;
  int test_size = 128;
  std::uint64_t train_seed0 = 0;
  std::uint64_t test_seed0 = 50000;

  friend bool operator==(const DataConfig &, const DataConfig &) = default;
};

struct EvalConfig
{
  L2Convention l2 = L2Convention::AtHorizon;
  double miss_threshold = 2.0;
  double match_radius = 4.0;  // forecast: predicted center to GT center
  double rare_mass = 0.06;    // long-tail: cumulative frequency of the rare set
  int batch_size = 16;

  friend bool operator==(const EvalConfig &, const EvalConfig &) = default;
};

/// Everything that determines a run. The content hash covers the fields that
/// influence the trained weights: model, vlp, optim and the training half of
/// data. Evaluation settings and the test split are excluded, so one
/// checkpoint serves every evaluation of it.
struct ExperimentConfig
{
  std::string name = "experiment";
  ModelConfig model;
  DataConfig data;
  VlpConfig vlp;
  TrainConfig optim;  // optim.seed is ignored; the run seed is used
  EvalConfig eval;

  /// Throws ConfigError on unknown keys, unparsable values or a failed
  /// validate().
  static ExperimentConfig from_ini(const std::string & text);
  static ExperimentConfig load(const std::string & path);
  std::string to_ini() const;

  void validate() const;
  std::uint64_t content_hash() const;
  std::string hash_hex() const { return to_hex(content_hash()); }

  WorldConfig world(const std::string & name) const;
};

/// One predicted agent matched to a GT agent.
struct MatchedForecast
{
  AgentClass label = AgentClass::Car;
  std::vector<Point> pred;  // absolute positions
  std::vector<Point> gt;
};

struct EvalReport
{
  PlanEval plan;
  ForecastEval forecast;
  std::vector<MatchedForecast> matched;
  int gt_agents = 0;
};

/// Infer-mode evaluation. A query is a detection when its argmax class is
/// not the no-object class; detections are greedily matched to GT centers
/// within match_radius and scored with a single mode.
EvalReport evaluate_model(const PlannerModel & model, const std::vector<PreparedScene> & data, const EvalConfig & eval);

/// Forecast metrics over the matched agents accepted by keep.
ForecastEval forecast_subset(
  const std::vector<MatchedForecast> & matched, const std::function<bool(AgentClass)> & keep, double miss_threshold);

/// Rarest classes whose cumulative frequency stays within mass. Throws
/// ProtocolError when the nonzero frequencies span less than a 10x ratio or
/// the rare set is empty.
std::vector<AgentClass> rare_classes(const WorldConfig & world, double mass = 0.06);

struct RunPaths
{
  std::string dir;
  std::string checkpoint;
  std::string result;
  std::string losses;
  std::string config;
};
RunPaths run_paths(const std::string & runs_dir, const ExperimentConfig & config, std::uint64_t seed);

struct RunOptions
{
  std::string runs_dir = "runs";
  bool reuse = true;  // load an existing checkpoint instead of retraining
  bool verbose = false;
};

struct RunOutcome
{
  nlohmann::json result;  // data.test_world ExperimentResult
  std::vector<nlohmann::json> cross;  // one per extra evaluation world
  bool diverged = false;
  bool reused = false;
};

std::vector<Scene> train_scenes(const ExperimentConfig & config, std::uint64_t seed);
/// Test scenes of the given world; seeds never overlap the training range.
std::vector<Scene> test_scenes(const ExperimentConfig & config, const std::string & world, std::uint64_t seed, int n = -1);

/// Trains (or reuses) runs/<hash>/<seed> and evaluates it. result.json holds
/// the train-world test split; data.test_world and every extra world, when
/// different, go to result_<world>.json. outcome.result is the
/// data.test_world evaluation.
RunOutcome run_one(
  const ExperimentConfig & config, std::uint64_t seed, const RunOptions & options,
  const std::vector<std::string> & extra_worlds = {});

/// Builds an ExperimentResult document.
nlohmann::json make_result(
  const ExperimentConfig & config, std::uint64_t seed, const std::string & test_world, const EvalReport & eval,
  const std::vector<LossRecord> & history, bool diverged, double train_seconds, const std::string & checkpoint,
  const AlignmentAccuracy & alignment, const PlannerModel & model);

/// Throws SchemaError when required fields are missing or mistyped.
void validate_result(const nlohmann::json & result);

struct Variant
{
  std::string name;
  bool slp = false;
  bool alp = false;
  std::optional<FieldMask> fields;
  std::optional<std::string> encoder;

  ExperimentConfig apply(const ExperimentConfig & base) const;
};

/// baseline, +SLP, +SLP+ALP.
std::vector<Variant> standard_ladder();
/// SLP+ALP with every field, then with each single field removed.
std::vector<Variant> field_ablation();
/// SLP+ALP once per text encoder spec, named "+SLP+ALP <spec>". Throws
/// ArgumentError on an empty list.
std::vector<Variant> encoder_ablation(const std::vector<std::string> & encoders);
/// Parses "baseline,slp,slp+alp,alp" style lists.
std::vector<Variant> parse_variants(const std::string & list);

struct SeedResult
{
  std::uint64_t seed = 0;
  double l2_avg = 0.0;
  double col_avg = 0.0;
  double min_ade = 0.0;
  bool diverged = false;
  std::string hash;
};

struct TableRow
{
  std::string variant;
  std::string train_world;
  std::string test_world;
  std::vector<SeedResult> seeds;
  double median_l2 = 0.0;
  double median_col = 0.0;
  double median_min_ade = 0.0;
  int diverged = 0;
  // long-tail only
  double median_rare_min_ade = 0.0;
  double median_common_min_ade = 0.0;
};

struct StudyTable
{
  std::string study;
  std::vector<TableRow> rows;

  /// Empty world names match any row.
  const TableRow & row(
    const std::string & variant, const std::string & train_world = "", const std::string & test_world = "") const;
  std::string to_markdown() const;
  std::string to_csv() const;
};

/// Median over finite values; NaN when none.
double median(std::vector<double> values);

StudyTable run_ablation(
  const ExperimentConfig & base, const std::vector<Variant> & variants, const std::vector<std::uint64_t> & seeds,
  const RunOptions & options);

/// Rows for train_world->{train_world, test_world} and the reverse, per
/// variant. Throws ProtocolError when the worlds coincide.
StudyTable run_generalization(
  const ExperimentConfig & base, const std::string & train_world, const std::string & test_world,
  const std::vector<Variant> & variants, const std::vector<std::uint64_t> & seeds, const RunOptions & options);

/// Trains and tests on longtail_world; rows carry rare/common minADE.
StudyTable run_longtail(
  const ExperimentConfig & base, const std::string & longtail_world, const std::vector<Variant> & variants,
  const std::vector<std::uint64_t> & seeds, const RunOptions & options);

/// Scans runs_dir for result*.json and writes table.csv, table.md,
/// loss_curves.svg and l2_horizon.svg into out_dir. Returns the number of
/// results. Throws SchemaError on mixed schema versions, ArgumentError when
/// no result is found.
int report(const std::string & runs_dir, const std::string & out_dir);

}  // namespace vlp
