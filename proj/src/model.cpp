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

#include "vlp/model.hpp"

#include "vlp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vlp
{

namespace
{

constexpr std::uint64_t kAttachmentStream = 0xa77ac4d5e1f00d5ULL;

ag::Var zero_scalar() { return ag::Var::scalar(0.0); }

// Maps per-step deltas (1 x 2P) to cumulative waypoints.
const ag::Mat & cumsum_matrix()
{
  static const ag::Mat k = [] {
    ag::Mat m = ag::Mat::Zero(2 * kPlanSteps, 2 * kPlanSteps);
    for (int i = 0; i < kPlanSteps; ++i) {
      for (int j = i; j < kPlanSteps; ++j) {
        m(2 * i, 2 * j) = 1.0;
        m(2 * i + 1, 2 * j + 1) = 1.0;
      }
    }
    return m;
  }();
  return k;
}

ag::Var small_normal(nn::ParamStore & store, const std::string & name, Eigen::Index r, Eigen::Index c,
                     std::mt19937_64 & rng, double stddev)
{
  std::normal_distribution<double> d(0.0, stddev);
  ag::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = d(rng);
  }
  return store.add(name, std::move(m));
}

std::vector<int> top_k_cells(const ag::Mat & logits, Eigen::Index offset, int cells, int k)
{
  std::vector<int> idx(static_cast<std::size_t>(cells));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    const double la = logits(offset + a, 0);
    const double lb = logits(offset + b, 0);
    return la != lb ? la > lb : a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

void check_batch(const std::vector<const PreparedScene *> & batch, const GridSpec & grid)
{
  if (batch.empty()) {
    throw BatchError("empty batch");
  }
  for (const auto * s : batch) {
    if (!(s->scene.grid == grid)) {
      throw BatchError("batch mixes grid specs or does not match the model grid");
    }
  }
}

double ego_speed(const Scene & scene)
{
  return scene.ego.past.empty() ? 0.0 : -scene.ego.past.front().x / kStepSeconds;
}

}  // namespace

void ModelConfig::validate() const
{
  grid.validate();
  if (channels <= 0 || agent_queries <= 0 || lane_queries < 0 || decoder_layers < 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (grid.height() % 2 != 0 || grid.width() % 2 != 0) {
    throw ConfigError("grid height and width must be even");
  }
  if (agent_queries > grid.cell_count()) {
    throw ConfigError("more agent queries than grid cells");
  }
}

void VlpConfig::validate() const
{
  if (!(w_enc >= 0.0) || !(w_dec >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (text_dim <= 0) {
    throw ConfigError("text dimension must be positive");
  }
}

void to_json(nlohmann::json & j, const ModelConfig & c)
{
  j = {
    {"channels", c.channels},
    {"agent_queries", c.agent_queries},
    {"lane_queries", c.lane_queries},
    {"decoder_layers", c.decoder_layers},
    {"grid", {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"y_min", c.grid.y_min},
              {"y_max", c.grid.y_max}, {"resolution", c.grid.resolution}}},
  };
}

void from_json(const nlohmann::json & j, ModelConfig & c)
{
  c.channels = j.at("channels").get<int>();
  c.agent_queries = j.at("agent_queries").get<int>();
  c.lane_queries = j.at("lane_queries").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  const auto & g = j.at("grid");
  c.grid = GridSpec{g.at("x_min").get<double>(), g.at("x_max").get<double>(), g.at("y_min").get<double>(),
                    g.at("y_max").get<double>(), g.at("resolution").get<double>()};
}

void to_json(nlohmann::json & j, const VlpConfig & c)
{
  j = {
    {"slp", c.slp},         {"alp", c.alp},     {"encoder", c.encoder},
    {"text_dim", c.text_dim}, {"fields", c.fields.to_string()},
    {"w_enc", c.w_enc},     {"w_dec", c.w_dec}, {"detach_alp", c.detach_alp},
  };
}

void from_json(const nlohmann::json & j, VlpConfig & c)
{
  c.slp = j.at("slp").get<bool>();
  c.alp = j.at("alp").get<bool>();
  c.encoder = j.at("encoder").get<std::string>();
  c.text_dim = j.at("text_dim").get<int>();
  c.fields = FieldMask::parse(j.at("fields").get<std::string>());
  c.w_enc = j.at("w_enc").get<double>();
  c.w_dec = j.at("w_dec").get<double>();
  c.detach_alp = j.at("detach_alp").get<bool>();
}

ag::Mat rasterize_scene_input(const Scene & scene)
{
  const GridSpec & g = scene.grid;
  const int h = g.height();
  const int w = g.width();
  ag::Mat m = ag::Mat::Zero(static_cast<Eigen::Index>(h) * w, kInputChannels);
  const double half_x = 0.5 * (g.x_max - g.x_min);
  const double half_y = 0.5 * (g.y_max - g.y_min);
  const double mid_x = 0.5 * (g.x_max + g.x_min);
  const double mid_y = 0.5 * (g.y_max + g.y_min);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Point p = g.cell_center(r, c);
      m(g.index(r, c), 16) = (p.x - mid_x) / half_x;
      m(g.index(r, c), 17) = (p.y - mid_y) / half_y;
    }
  }
  for (const auto & lane : scene.lanes) {
    for (int cell : lane_region(g, lane)) {
      m(cell, 13 + static_cast<int>(lane.kind)) = 1.0;
    }
  }
  for (int cell : box_region(g, scene.ego.footprint)) {
    m(cell, 12) = 1.0;
    m(cell, 8) = ego_speed(scene) / 10.0;
    m(cell, 10) = std::cos(scene.ego.footprint.yaw);
    m(cell, 11) = std::sin(scene.ego.footprint.yaw);
  }
  for (const auto & a : scene.agents) {
    for (int cell : box_region(g, a.bev_box)) {
      m(cell, static_cast<int>(a.label)) = 1.0;
      m(cell, 8) = a.velocity.x / 10.0;
      m(cell, 9) = a.velocity.y / 10.0;
      m(cell, 10) = std::cos(a.bev_box.yaw);
      m(cell, 11) = std::sin(a.bev_box.yaw);
    }
  }
  return m;
}

PreparedScene prepare_scene(const Scene & scene, const VlpConfig & vlp, EmbeddingCache * cache)
{
  PreparedScene p;
  p.scene = scene;
  p.input = rasterize_scene_input(scene);
  p.regions = scene_regions(scene, 0);
  for (const auto & a : scene.agents) {
    p.center_cells.push_back(scene.grid.nearest_cell({a.bev_box.cx, a.bev_box.cy}));
  }
  if (vlp.any() && cache == nullptr) {
    throw ArgumentError("prepare_scene needs an embedding cache when language supervision is on");
  }
  if (vlp.alp) {
    p.alp_prompts.push_back(render_prompt(PromptRole::AlpEgo, alp_ego_record(scene.ego), vlp.fields));
    std::vector<const AgentRecord *> agents;
    for (const auto & a : scene.agents) {
      agents.push_back(&a);
    }
    std::stable_sort(agents.begin(), agents.end(), [](const auto * a, const auto * b) { return a->id < b->id; });
    for (const auto * a : agents) {
      p.alp_prompts.push_back(render_prompt(PromptRole::AlpFg, prompt_record(*a), vlp.fields));
    }
    for (const auto & lane : scene.lanes) {
      p.alp_prompts.push_back(render_prompt(PromptRole::AlpLane, prompt_record(lane), vlp.fields));
    }
    p.alp_text = cache->encode_batch(p.alp_prompts);
  }
  if (vlp.slp) {
    p.slp_prompt = render_prompt(PromptRole::SlpEgo, slp_ego_record(scene.ego), vlp.fields);
    p.slp_text = cache->encode_batch(std::vector<std::string>{p.slp_prompt});
  }
  return p;
}

std::vector<PreparedScene> prepare_scenes(
  const std::vector<Scene> & scenes, const VlpConfig & vlp, EmbeddingCache * cache)
{
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const auto & s : scenes) {
    out.push_back(prepare_scene(s, vlp, cache));
  }
  return out;
}

std::vector<Point> ForwardOutput::plan_points(int b) const
{
  std::vector<Point> pts;
  for (int t = 0; t < kPlanSteps; ++t) {
    pts.push_back({plan.value()(b, 2 * t), plan.value()(b, 2 * t + 1)});
  }
  return pts;
}

std::vector<int> greedy_match(const std::vector<Point> & queries, const std::vector<Point> & targets)
{
  struct Pair
  {
    double d;
    int q;
    int t;
  };
  std::vector<Pair> pairs;
  pairs.reserve(queries.size() * targets.size());
  for (int q = 0; q < static_cast<int>(queries.size()); ++q) {
    for (int t = 0; t < static_cast<int>(targets.size()); ++t) {
      const auto & a = queries[static_cast<std::size_t>(q)];
      const auto & b = targets[static_cast<std::size_t>(t)];
      pairs.push_back({std::hypot(a.x - b.x, a.y - b.y), q, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair & a, const Pair & b) {
    if (a.d != b.d) {
      return a.d < b.d;
    }
    return a.q != b.q ? a.q < b.q : a.t < b.t;
  });
  std::vector<int> match(targets.size(), -1);
  std::vector<bool> used(queries.size(), false);
  for (const auto & p : pairs) {
    if (!used[static_cast<std::size_t>(p.q)] && match[static_cast<std::size_t>(p.t)] < 0) {
      used[static_cast<std::size_t>(p.q)] = true;
      match[static_cast<std::size_t>(p.t)] = p.q;
    }
  }
  return match;
}

PlannerModel::PlannerModel(const ModelConfig & config, const VlpConfig & vlp, std::uint64_t seed)
: config_(config), vlp_(vlp), seed_(seed)
{
  config_.validate();
  vlp_.validate();
  std::mt19937_64 rng(seed);
  const Eigen::Index c = config_.channels;
  conv1_ = nn::make_linear(base_, "bev.conv1", 9 * kInputChannels, c, rng);
  conv2_ = nn::make_linear(base_, "bev.conv2", 9 * c, c, rng);
  objectness_ = nn::make_linear(base_, "bev.objectness", c, 1, rng);
  lane_query_embed_ = small_normal(base_, "decoder.lane_queries", config_.lane_queries, c, rng, 1.0);
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string name = "decoder.layer" + std::to_string(l);
    decoder_.push_back({nn::make_cross_attention(base_, name + ".attn", c, rng),
                        nn::make_mlp(base_, name + ".ffn", c, 2 * c, c, rng)});
  }
  cls_head_ = nn::make_linear(base_, "head.cls", c, kNumClasses + 1, rng);
  box_head_ = nn::make_linear(base_, "head.box", c, kBoxDims, rng);
  traj_head_ = nn::make_linear(base_, "head.traj", c, 2 * kTrajSteps, rng);
  ego_query_ = small_normal(base_, "ego.query", 1, c, rng, 1.0);
  command_embed_ = small_normal(base_, "ego.command", kNumCommands, c, rng, 1.0);
  past_encoder_ = nn::make_mlp(base_, "ego.past", 2 * kPastSteps, c, c, rng);
  ego_to_queries_ = nn::make_cross_attention(base_, "ego.attn_queries", c, rng);
  ego_to_bev_ = nn::make_cross_attention(base_, "ego.attn_bev", c, rng);
  ego_ffn_ = nn::make_mlp(base_, "ego.ffn", c, 2 * c, c, rng);
  plan_head_ = nn::make_mlp(base_, "plan.head", c, c, 2 * kPlanSteps, rng);

  if (vlp_.any()) {
    std::mt19937_64 attach_rng(seed ^ kAttachmentStream);
    vlp_store_.emplace();
    if (vlp_.alp) {
      bev_adapter_ = make_adapter(*vlp_store_, "vlp.bev_adapter", vlp_.text_dim, c, attach_rng);
      alp_scale_.emplace(*vlp_store_, "vlp.alp_logit_scale");
    }
    if (vlp_.slp) {
      ego_adapter_ = make_adapter(*vlp_store_, "vlp.ego_adapter", vlp_.text_dim, c, attach_rng);
      slp_scale_.emplace(*vlp_store_, "vlp.slp_logit_scale");
    }
  }
}

std::vector<ag::Var> PlannerModel::trainable() const
{
  std::vector<ag::Var> out;
  for (const auto & [name, v] : base_.entries()) {
    out.push_back(v);
  }
  if (vlp_store_) {
    for (const auto & [name, v] : vlp_store_->entries()) {
      out.push_back(v);
    }
  }
  return out;
}

std::size_t PlannerModel::parameter_count() const { return base_.scalar_count() + vlp_parameter_count(); }

std::size_t PlannerModel::vlp_parameter_count() const { return vlp_store_ ? vlp_store_->scalar_count() : 0; }

void PlannerModel::clamp_logit_scales()
{
  if (alp_scale_) {
    alp_scale_->clamp();
  }
  if (slp_scale_) {
    slp_scale_->clamp();
  }
}

PlannerModel PlannerModel::strip_vlp() const
{
  VlpConfig off = vlp_;
  off.slp = false;
  off.alp = false;
  PlannerModel m(config_, off, seed_);
  m.load_values(*this);
  return m;
}

void PlannerModel::load_values(const PlannerModel & other)
{
  auto copy = [](nn::ParamStore & dst, const nn::ParamStore & src) {
    for (const auto & [name, v] : dst.entries()) {
      const ag::Var * s = src.find(name);
      if (s == nullptr || s->rows() != v.rows() || s->cols() != v.cols()) {
        throw ArgumentError("parameter mismatch while copying " + name);
      }
      ag::Var target = v;
      target.mutable_value() = s->value();
    }
  };
  copy(base_, other.base_);
  if (vlp_store_ && other.vlp_store_) {
    copy(*vlp_store_, *other.vlp_store_);
  }
}

ForwardOutput PlannerModel::forward(const std::vector<const PreparedScene *> & batch, Mode mode) const
{
  check_batch(batch, config_.grid);
  const int b_count = static_cast<int>(batch.size());
  const int h = config_.grid.height();
  const int w = config_.grid.width();
  const int cells = h * w;
  const int pooled = cells / 4;
  const int nq = config_.agent_queries;

  ag::Mat x(static_cast<Eigen::Index>(b_count) * cells, kInputChannels);
  ag::Mat past(b_count, 2 * kPastSteps);
  std::vector<ag::Index> commands;
  for (int b = 0; b < b_count; ++b) {
    x.middleRows(static_cast<Eigen::Index>(b) * cells, cells) = batch[static_cast<std::size_t>(b)]->input;
    const auto & ego = batch[static_cast<std::size_t>(b)]->scene.ego;
    for (int k = 0; k < kPastSteps; ++k) {
      const Point p = k < static_cast<int>(ego.past.size()) ? ego.past[static_cast<std::size_t>(k)] : Point{};
      past(b, 2 * k) = p.x / 10.0;
      past(b, 2 * k + 1) = p.y / 10.0;
    }
    commands.push_back(static_cast<ag::Index>(ego.command));
  }

  ForwardOutput out;
  const ag::Var input(std::move(x));
  const ag::Var hidden = ag::relu(conv1_(ag::im2col3x3(input, b_count, h, w)));
  out.bev = conv2_(ag::im2col3x3(hidden, b_count, h, w));
  out.objectness = objectness_(out.bev);
  const ag::Var memory = ag::avg_pool2x2(out.bev, b_count, h, w);

  const ag::Var ego_init = ag::add(
    ag::add_row(ag::gather_rows(command_embed_, commands), ego_query_), past_encoder_(ag::Var(past)));

  std::vector<ag::Var> agent_q;
  std::vector<ag::Var> lane_q;
  std::vector<ag::Var> ego_feats;
  for (int b = 0; b < b_count; ++b) {
    const auto idx = top_k_cells(out.objectness.value(), static_cast<Eigen::Index>(b) * cells, cells, nq);
    std::vector<ag::Index> rows;
    AgentPredictions preds;
    for (int cell : idx) {
      rows.push_back(static_cast<ag::Index>(b) * cells + cell);
      preds.reference_cells.push_back(cell);
      preds.reference_points.push_back(config_.grid.cell_center(cell / w, cell % w));
    }
    const ag::Var mem_b = ag::slice_rows(memory, static_cast<ag::Index>(b) * pooled, pooled);
    ag::Var q = ag::gather_rows(out.bev, rows);
    if (config_.lane_queries > 0) {
      q = ag::concat_rows({q, lane_query_embed_});
    }
    for (const auto & layer : decoder_) {
      q = ag::layer_norm_rows(ag::add(q, layer.attn(q, mem_b)));
      q = ag::layer_norm_rows(ag::add(q, layer.ffn(q)));
    }
    const ag::Var qa = ag::slice_rows(q, 0, nq);
    preds.class_logits = cls_head_(qa);
    preds.box = box_head_(qa);
    preds.traj = traj_head_(qa);
    out.agents.push_back(std::move(preds));
    agent_q.push_back(qa);
    if (config_.lane_queries > 0) {
      lane_q.push_back(ag::slice_rows(q, nq, config_.lane_queries));
    }

    ag::Var e = ag::slice_rows(ego_init, b, 1);
    e = ag::layer_norm_rows(ag::add(e, ego_to_queries_(e, q)));
    e = ag::layer_norm_rows(ag::add(e, ego_to_bev_(e, mem_b)));
    e = ag::layer_norm_rows(ag::add(e, ego_ffn_(e)));
    ego_feats.push_back(e);
  }
  out.agent_queries = ag::concat_rows(agent_q);
  if (!lane_q.empty()) {
    out.lane_queries = ag::concat_rows(lane_q);
  }
  out.ego_qfeat = ag::concat_rows(ego_feats);
  out.plan = ag::matmul(plan_head_(out.ego_qfeat), ag::Var(cumsum_matrix()));

  if (mode == Mode::Train && vlp_store_) {
    VlpTaps taps;
    if (vlp_.alp) {
      std::vector<SceneRegions> regions;
      std::vector<ag::Mat> texts;
      Eigen::Index rows = 0;
      for (int b = 0; b < b_count; ++b) {
        SceneRegions r = batch[static_cast<std::size_t>(b)]->regions;
        for (auto & m : r.meta) {
          m.scene_index = b;
        }
        regions.push_back(std::move(r));
        const ag::Mat & t = batch[static_cast<std::size_t>(b)]->alp_text;
        if (t.rows() != static_cast<Eigen::Index>(regions.back().meta.size()) || t.cols() != vlp_.text_dim) {
          throw PairingError("scene was prepared without matching ALP prompt encodings");
        }
        texts.push_back(t);
        rows += t.rows();
      }
      const ag::Var source = vlp_.detach_alp ? ag::detach(out.bev) : out.bev;
      taps.agent_features = agent_bev_features(source, regions, cells);
      ag::Mat text(rows, vlp_.text_dim);
      Eigen::Index at = 0;
      for (const auto & t : texts) {
        text.middleRows(at, t.rows()) = t;
        at += t.rows();
      }
      taps.expectations = ExpectationBatch{expectation_features(text, *bev_adapter_), taps.agent_features->meta};
    }
    if (vlp_.slp) {
      ag::Mat text(b_count, vlp_.text_dim);
      for (int b = 0; b < b_count; ++b) {
        const ag::Mat & t = batch[static_cast<std::size_t>(b)]->slp_text;
        if (t.rows() != 1 || t.cols() != vlp_.text_dim) {
          throw PairingError("scene was prepared without an SLP prompt encoding");
        }
        text.row(b) = t.row(0);
      }
      taps.ego_prompts = expectation_features(text, *ego_adapter_);
    }
    out.taps = std::move(taps);
  }
  return out;
}

TaskLosses task_losses(const ForwardOutput & out, const std::vector<const PreparedScene *> & batch)
{
  if (out.agents.size() != batch.size()) {
    throw BatchError("forward output does not belong to this batch");
  }
  std::vector<ag::Var> logits;
  std::vector<ag::Index> class_targets;
  std::vector<ag::Var> boxes;
  std::vector<ag::Var> trajs;
  std::vector<ag::Index> matched_rows;
  std::vector<ag::Mat> box_targets;
  std::vector<ag::Mat> traj_targets;
  const int cells = batch.front()->scene.grid.cell_count();
  ag::Mat objectness_target = ag::Mat::Zero(static_cast<Eigen::Index>(batch.size()) * cells, 1);
  ag::Index query_offset = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Scene & scene = batch[b]->scene;
    const AgentPredictions & preds = out.agents[b];
    const auto nq = static_cast<ag::Index>(preds.reference_points.size());
    for (int cell : batch[b]->center_cells) {
      objectness_target(static_cast<Eigen::Index>(b) * cells + cell, 0) = 1.0;
    }
    std::vector<Point> centers;
    for (const auto & a : scene.agents) {
      centers.push_back({a.bev_box.cx, a.bev_box.cy});
    }
    const auto match = greedy_match(preds.reference_points, centers);
    std::vector<ag::Index> targets(static_cast<std::size_t>(nq), kNoObjectClass);
    for (std::size_t t = 0; t < match.size(); ++t) {
      const int q = match[t];
      if (q < 0) {
        continue;
      }
      const auto & a = scene.agents[t];
      targets[static_cast<std::size_t>(q)] = static_cast<ag::Index>(a.label);
      matched_rows.push_back(query_offset + q);
      const Point ref = preds.reference_points[static_cast<std::size_t>(q)];
      ag::Mat bt(1, kBoxDims);
      bt << a.bev_box.cx - ref.x, a.bev_box.cy - ref.y, a.bev_box.length, a.bev_box.width,
        std::sin(a.bev_box.yaw), std::cos(a.bev_box.yaw);
      box_targets.push_back(bt);
      ag::Mat tt(1, 2 * kTrajSteps);
      for (int k = 0; k < kTrajSteps; ++k) {
        tt(0, 2 * k) = a.future_traj[static_cast<std::size_t>(k)].x - a.bev_box.cx;
        tt(0, 2 * k + 1) = a.future_traj[static_cast<std::size_t>(k)].y - a.bev_box.cy;
      }
      traj_targets.push_back(tt);
    }
    class_targets.insert(class_targets.end(), targets.begin(), targets.end());
    logits.push_back(preds.class_logits);
    boxes.push_back(preds.box);
    trajs.push_back(preds.traj);
    query_offset += nq;
  }

  TaskLosses losses;
  ag::Var perc = ag::add(
    ag::cross_entropy_rows(ag::concat_rows(logits), class_targets),
    ag::bce_with_logits(out.objectness, objectness_target));
  if (!matched_rows.empty()) {
    const auto m = static_cast<Eigen::Index>(matched_rows.size());
    ag::Mat bt(m, kBoxDims);
    ag::Mat tt(m, 2 * kTrajSteps);
    for (Eigen::Index i = 0; i < m; ++i) {
      bt.row(i) = box_targets[static_cast<std::size_t>(i)];
      tt.row(i) = traj_targets[static_cast<std::size_t>(i)];
    }
    perc = ag::add(perc, ag::l1_loss(ag::gather_rows(ag::concat_rows(boxes), matched_rows), bt));
    // Mean over matched agents and waypoints of |dx| + |dy|.
    losses.pred = ag::scale(ag::l1_loss(ag::gather_rows(ag::concat_rows(trajs), matched_rows), tt), 2.0);
  } else {
    losses.pred = zero_scalar();
  }
  losses.perc = perc;

  ag::Mat gt(static_cast<Eigen::Index>(batch.size()), 2 * kPlanSteps);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto & plan = batch[b]->scene.ego.gt_plan;
    if (static_cast<int>(plan.size()) != kPlanSteps) {
      throw ArgumentError("ground-truth plan must have exactly six waypoints");
    }
    for (int t = 0; t < kPlanSteps; ++t) {
      gt(static_cast<Eigen::Index>(b), 2 * t) = plan[static_cast<std::size_t>(t)].x;
      gt(static_cast<Eigen::Index>(b), 2 * t + 1) = plan[static_cast<std::size_t>(t)].y;
    }
  }
  // Mean over samples and waypoints of |dx| + |dy|.
  losses.plan = ag::scale(ag::l1_loss(out.plan, gt), 2.0);
  return losses;
}

LossBreakdown total_loss(const PlannerModel & model, const std::vector<const PreparedScene *> & batch)
{
  const VlpConfig & vlp = model.vlp_config();
  const ForwardOutput out = model.forward(batch, Mode::Train);
  const TaskLosses task = task_losses(out, batch);
  ag::Var slp = zero_scalar();
  ag::Var alp = zero_scalar();
  LossBreakdown lb;
  if (vlp.slp) {
    slp = slp_loss(out.ego_qfeat, *out.taps->ego_prompts, *model.slp_scale());
  }
  if (vlp.alp) {
    alp = alp_loss(*out.taps->agent_features, *out.taps->expectations, *model.alp_scale());
    std::vector<std::string> prompts;
    for (const auto * s : batch) {
      prompts.insert(prompts.end(), s->alp_prompts.begin(), s->alp_prompts.end());
    }
    std::sort(prompts.begin(), prompts.end());
    lb.duplicate_prompts = static_cast<int>(prompts.end() - std::unique(prompts.begin(), prompts.end()));
  }
  const ag::Var dec = ag::add(ag::add(ag::add(task.perc, task.pred), task.plan), slp);
  lb.graph = ag::add(ag::scale(alp, vlp.w_enc), ag::scale(dec, vlp.w_dec));
  lb.l_perc = task.perc.item();
  lb.l_pred = task.pred.item();
  lb.l_plan = task.plan.item();
  lb.l_slp = slp.item();
  lb.l_alp = alp.item();
  lb.total = lb.graph.item();
  lb.w_enc = vlp.w_enc;
  lb.w_dec = vlp.w_dec;
  return lb;
}

AlignmentAccuracy alignment_accuracy(const PlannerModel & model, const std::vector<const PreparedScene *> & batch)
{
  ag::NoGradGuard guard;
  const ForwardOutput out = model.forward(batch, Mode::Train);
  AlignmentAccuracy acc{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (model.vlp_config().alp) {
    acc.alp = diagonal_accuracy(
      similarity(out.taps->agent_features->features, out.taps->expectations->features, *model.alp_scale()).value());
  }
  if (model.vlp_config().slp) {
    acc.slp = diagonal_accuracy(similarity(out.ego_qfeat, *out.taps->ego_prompts, *model.slp_scale()).value());
  }
  return acc;
}

TrainResult train(PlannerModel & model, const std::vector<PreparedScene> & data, const TrainConfig & config)
{
  if (data.empty()) {
    throw ArgumentError("training set is empty");
  }
  if (config.steps < 0 || config.batch_size <= 0) {
    throw ConfigError("steps must be non-negative and batch size positive");
  }
  const auto params = model.trainable();
  nn::AdamW opt(params, config.adamw);
  std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + 0x5151);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  std::vector<ag::Mat> last_good;

  TrainResult result;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<const PreparedScene *> batch;
    const std::size_t size = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), data.size());
    while (batch.size() < size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor++]]);
    }
    opt.zero_grad();
    const LossBreakdown lb = total_loss(model, batch);
    if (!std::isfinite(lb.total)) {
      result.diverged = true;
      break;
    }
    last_good.clear();
    for (const auto & p : params) {
      last_good.push_back(p.value());
    }
    ag::backward(lb.graph);
    const double gn = opt.step();
    if (!std::isfinite(gn)) {
      result.diverged = true;
      break;
    }
    model.clamp_logit_scales();
    result.duplicate_prompts += lb.duplicate_prompts;
    result.history.push_back({step, lb.total, lb.l_perc, lb.l_pred, lb.l_plan, lb.l_slp, lb.l_alp, gn});
  }
  if (result.diverged && !last_good.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      ag::Var p = params[i];
      p.mutable_value() = last_good[i];
    }
  }
  return result;
}

}  // namespace vlp
