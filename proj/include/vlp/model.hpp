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

// Miniature query-based planner: rasterised scene -> convolutional BEV
// encoder -> agent/lane query decoder -> ego query interaction -> waypoint
// head. Optional training-only attachments (two adapters, two logit scales)
// align BEV agent features and the final ego query with prompt embeddings.

#pragma once

#include "vlp/autograd.hpp"
#include "vlp/bev.hpp"
#include "vlp/contrastive.hpp"
#include "vlp/nn.hpp"
#include "vlp/prompt.hpp"
#include "vlp/scene.hpp"
#include "vlp/text_encoder.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vlp
{

/// Channel layout of the rasterised planner input.
///   0-7   agent class one-hot
///   8-9   velocity / 10 (agents and ego)
///   10-11 cos / sin of heading
///   12    ego footprint
///   13-15 divider, boundary, crossing masks
///   16-17 cell center x and y over the half extent
inline constexpr int kInputChannels = 18;
inline constexpr int kNoObjectClass = kNumClasses;
inline constexpr int kBoxDims = 6;  // dx, dy, length, width, sin yaw, cos yaw

struct ModelConfig
{
  int channels = 32;
  int agent_queries = 12;
  int lane_queries = 6;
  int decoder_layers = 2;
  GridSpec grid;

  /// Throws ConfigError on non-positive sizes or a grid with odd H or W.
  void validate() const;
  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Training-only language supervision. slp and alp are independent switches.
struct VlpConfig
{
  bool slp = false;
  bool alp = false;
  std::string encoder = "hash-ngram";
  int text_dim = 64;
  FieldMask fields;
  double w_enc = 1.0;
  double w_dec = 1.0;
  bool detach_alp = false;

  bool any() const { return slp || alp; }
  void validate() const;
  friend bool operator==(const VlpConfig &, const VlpConfig &) = default;
};

void to_json(nlohmann::json & j, const ModelConfig & c);
void from_json(const nlohmann::json & j, ModelConfig & c);
void to_json(nlohmann::json & j, const VlpConfig & c);
void from_json(const nlohmann::json & j, VlpConfig & c);

/// Row-major (H*W) x kInputChannels raster of one scene.
ag::Mat rasterize_scene_input(const Scene & scene);

/// Scene plus everything derived from it that stays fixed during training:
/// raster, agent regions, rendered prompts and their frozen encodings.
struct PreparedScene
{
  Scene scene;
  ag::Mat input;
  SceneRegions regions;
  std::vector<int> center_cells;      // objectness targets
  std::vector<std::string> alp_prompts;  // one per regions row
  ag::Mat alp_text;                      // rows x D, empty without ALP
  std::string slp_prompt;
  ag::Mat slp_text;                      // 1 x D, empty without SLP
};

/// Encodes prompts only for the enabled switches; cache may be null when
/// both are off.
PreparedScene prepare_scene(const Scene & scene, const VlpConfig & vlp, EmbeddingCache * cache);
std::vector<PreparedScene> prepare_scenes(
  const std::vector<Scene> & scenes, const VlpConfig & vlp, EmbeddingCache * cache);

enum class Mode { Train, Infer };

/// Per-scene decoder predictions for the agent queries.
struct AgentPredictions
{
  ag::Var class_logits;  // N_q x (kNumClasses + 1)
  ag::Var box;           // N_q x kBoxDims, offsets relative to reference
  ag::Var traj;          // N_q x 2*kTrajSteps displacements from the center
  std::vector<int> reference_cells;
  std::vector<Point> reference_points;
};

struct VlpTaps
{
  std::optional<AgentFeatureBatch> agent_features;
  std::optional<ExpectationBatch> expectations;
  std::optional<ag::Var> ego_prompts;  // B x C
};

struct ForwardOutput
{
  ag::Var bev;         // (B*H*W) x C
  ag::Var objectness;  // (B*H*W) x 1 logits
  std::vector<AgentPredictions> agents;
  ag::Var agent_queries;  // (B*N_q) x C, final decoder state
  ag::Var lane_queries;   // (B*N_l) x C
  ag::Var ego_qfeat;      // B x C
  ag::Var plan;           // B x 2P, row = x1 y1 x2 y2 ...
  std::optional<VlpTaps> taps;

  /// Plan of scene b as P points.
  std::vector<Point> plan_points(int b) const;
};

struct LossBreakdown
{
  double l_perc = 0.0;
  double l_pred = 0.0;
  double l_plan = 0.0;
  double l_slp = 0.0;
  double l_alp = 0.0;
  double total = 0.0;
  double w_enc = 1.0;
  double w_dec = 1.0;
  int duplicate_prompts = 0;
  ag::Var graph;  // differentiable total
};

struct TaskLosses
{
  ag::Var perc;
  ag::Var pred;
  ag::Var plan;
};

/// Greedy nearest-center assignment of GT agents to query reference points:
/// pairs are taken in ascending distance, ties broken by lower query index
/// then lower GT index. Returns, per GT agent, the matched query or -1.
std::vector<int> greedy_match(const std::vector<Point> & queries, const std::vector<Point> & targets);

class PlannerModel
{
public:
  /// Base weights depend only on (config, seed); attachments draw from a
  /// separate stream, so a model with and without them shares base weights.
  PlannerModel(const ModelConfig & config, const VlpConfig & vlp, std::uint64_t seed);

  ForwardOutput forward(const std::vector<const PreparedScene *> & batch, Mode mode) const;

  const ModelConfig & config() const { return config_; }
  const VlpConfig & vlp_config() const { return vlp_; }
  std::uint64_t seed() const { return seed_; }
  bool has_vlp() const { return vlp_store_.has_value(); }

  nn::ParamStore & base_params() { return base_; }
  const nn::ParamStore & base_params() const { return base_; }
  /// Null when no attachment is present.
  const nn::ParamStore * vlp_params() const { return vlp_store_ ? &*vlp_store_ : nullptr; }
  nn::ParamStore * vlp_params() { return vlp_store_ ? &*vlp_store_ : nullptr; }
  std::vector<ag::Var> trainable() const;
  std::size_t parameter_count() const;
  std::size_t vlp_parameter_count() const;

  LogitScale * alp_scale() { return alp_scale_ ? &*alp_scale_ : nullptr; }
  LogitScale * slp_scale() { return slp_scale_ ? &*slp_scale_ : nullptr; }
  const LogitScale * alp_scale() const { return alp_scale_ ? &*alp_scale_ : nullptr; }
  const LogitScale * slp_scale() const { return slp_scale_ ? &*slp_scale_ : nullptr; }
  void clamp_logit_scales();

  /// Deep copy of the base network with every attachment removed.
  PlannerModel strip_vlp() const;

  /// Copies all parameter values; shapes and names must match.
  void load_values(const PlannerModel & other);

private:
  struct DecoderLayer
  {
    nn::CrossAttention attn;
    nn::Mlp ffn;
  };

  ModelConfig config_;
  VlpConfig vlp_;
  std::uint64_t seed_;
  nn::ParamStore base_;
  nn::Linear conv1_;
  nn::Linear conv2_;
  nn::Linear objectness_;
  ag::Var lane_query_embed_;
  std::vector<DecoderLayer> decoder_;
  nn::Linear cls_head_;
  nn::Linear box_head_;
  nn::Linear traj_head_;
  ag::Var ego_query_;
  ag::Var command_embed_;
  nn::Mlp past_encoder_;
  nn::CrossAttention ego_to_queries_;
  nn::CrossAttention ego_to_bev_;
  nn::Mlp ego_ffn_;
  nn::Mlp plan_head_;

  std::optional<nn::ParamStore> vlp_store_;
  std::optional<AdapterMLP> bev_adapter_;
  std::optional<AdapterMLP> ego_adapter_;
  std::optional<LogitScale> alp_scale_;
  std::optional<LogitScale> slp_scale_;
};

/// Perception, prediction and planning losses of a train-mode output.
TaskLosses task_losses(const ForwardOutput & out, const std::vector<const PreparedScene *> & batch);

/// Forward in train mode and the full weighted objective
///   total = w_enc * l_alp + w_dec * (l_perc + l_pred + l_plan + l_slp)
/// with disabled switches contributing 0.
LossBreakdown total_loss(const PlannerModel & model, const std::vector<const PreparedScene *> & batch);

/// Diagonal argmax accuracy of the ALP and SLP similarity matrices over a
/// batch (NaN for a disabled switch).
struct AlignmentAccuracy
{
  double alp = 0.0;
  double slp = 0.0;
};
AlignmentAccuracy alignment_accuracy(const PlannerModel & model, const std::vector<const PreparedScene *> & batch);

struct TrainConfig
{
  int steps = 300;
  int batch_size = 8;
  nn::AdamWConfig adamw;
  std::uint64_t seed = 0;
};

struct LossRecord
{
  int step = 0;
  double total = 0.0;
  double l_perc = 0.0;
  double l_pred = 0.0;
  double l_plan = 0.0;
  double l_slp = 0.0;
  double l_alp = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult
{
  std::vector<LossRecord> history;
  bool diverged = false;
  int duplicate_prompts = 0;
};

/// Deterministic given (model seed, config seed, data). On a non-finite loss
/// the parameters are restored to the last finite step and training stops
/// with diverged = true.
TrainResult train(PlannerModel & model, const std::vector<PreparedScene> & data, const TrainConfig & config);

/// Checkpoint container: 8-byte magic "VLPCKPT1", uint32 header length, JSON
/// header {format_version, model, vlp, seed, has_vlp, tensors: [{name,
/// rows, cols, group}]}, then every tensor as row-major float64 in header
/// order. Little-endian.
void save_checkpoint(const PlannerModel & model, const std::string & path);
/// Mode::Infer drops any attachment; Mode::Train restores it.
PlannerModel load_checkpoint(const std::string & path, Mode mode = Mode::Train);

}  // namespace vlp
