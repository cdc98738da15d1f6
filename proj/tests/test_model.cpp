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

#include "fd_check.hpp"
#include "vlp/errors.hpp"
#include "vlp/model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace vlp;

namespace
{

// 10 x 10 grid keeps every forward pass cheap.
WorldConfig small_world()
{
  WorldConfig w = WorldConfig::city_a();
  w.grid = GridSpec{-8.0, 8.0, -8.0, 8.0, 1.6};
  return w;
}

ModelConfig small_model()
{
  ModelConfig m;
  m.channels = 8;
  m.agent_queries = 6;
  m.lane_queries = 2;
  m.decoder_layers = 1;
  m.grid = small_world().grid;
  return m;
}

VlpConfig both()
{
  VlpConfig v;
  v.slp = true;
  v.alp = true;
  v.encoder = "hash-numeric";
  v.text_dim = 16;
  return v;
}

struct Fixture
{
  std::vector<PreparedScene> data;
  EmbeddingCache cache;

  explicit Fixture(const VlpConfig & vlp, int n = 4)
      : cache(make_text_encoder(vlp.encoder, vlp.text_dim))
  {
    data = prepare_scenes(make_dataset(small_world(), n, 100), vlp, &cache);
  }

  std::vector<const PreparedScene *> batch(int n = -1) const
  {
    std::vector<const PreparedScene *> b;
    for (int i = 0; i < (n < 0 ? static_cast<int>(data.size()) : n); ++i) {
      b.push_back(&data[static_cast<std::size_t>(i)]);
    }
    return b;
  }
};

double max_abs_diff(const ag::Mat & a, const ag::Mat & b)
{
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

std::size_t adapter_size(std::size_t d, std::size_t c)
{
  const std::size_t h = std::max(d, c);
  return d * h + h + h * c + c;
}

}  // namespace

TEST_CASE("greedy matching")
{
  const std::vector<Point> q = {{0, 0}, {5, 0}, {10, 0}};
  CHECK(greedy_match(q, {{9, 0}, {0.5, 0}}) == std::vector<int>{2, 0});
  // Both targets prefer query 0; the closer one wins it.
  CHECK(greedy_match(q, {{1, 0}, {0.2, 0}}) == std::vector<int>{1, 0});
  // Equal distances: lower query index, then lower target index.
  CHECK(greedy_match({{-1, 0}, {1, 0}}, {{0, 0}}) == std::vector<int>{0});
  CHECK(greedy_match({{0, 0}}, {{1, 0}, {-1, 0}}) == std::vector<int>{0, -1});
  CHECK(greedy_match({}, {{1, 0}}) == std::vector<int>{-1});
}

TEST_CASE("config validation")
{
  ModelConfig m = small_model();
  m.channels = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = small_model();
  m.grid = GridSpec{-8.0, 8.0, -8.8, 8.0, 1.6};  // 11 rows
  CHECK_THROWS_AS(m.validate(), ConfigError);
  VlpConfig v = both();
  v.w_enc = -1.0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("forward shapes and taps")
{
  Fixture fx(both(), 3);
  const PlannerModel model(small_model(), both(), 7);
  const auto batch = fx.batch();
  const ForwardOutput out = model.forward(batch, Mode::Train);
  const int hw = small_model().grid.cell_count();
  CHECK(out.bev.rows() == 3 * hw);
  CHECK(out.bev.cols() == 8);
  CHECK(out.objectness.rows() == 3 * hw);
  CHECK(out.plan.rows() == 3);
  CHECK(out.plan.cols() == 2 * kPlanSteps);
  CHECK(out.agents.size() == 3);
  CHECK(out.agents[0].class_logits.cols() == kNumClasses + 1);
  CHECK(out.agents[0].class_logits.rows() == 6);
  CHECK(out.agents[0].box.cols() == kBoxDims);
  CHECK(out.agents[0].traj.cols() == 2 * kTrajSteps);
  CHECK(out.agent_queries.rows() == 18);
  CHECK(out.lane_queries.rows() == 6);
  CHECK(out.plan_points(1).size() == kPlanSteps);
  REQUIRE(out.taps.has_value());
  std::size_t rows = 0;
  for (const auto & p : fx.data) {
    rows += p.regions.cells.size();
  }
  CHECK(out.taps->agent_features->features.rows() == static_cast<Eigen::Index>(rows));
  CHECK(out.taps->expectations->features.rows() == static_cast<Eigen::Index>(rows));
  CHECK(out.taps->agent_features->meta == out.taps->expectations->meta);
  CHECK(out.taps->ego_prompts->rows() == 3);
  CHECK(out.taps->agent_features->meta[0].kind == AgentKind::Ego);
  CHECK(out.taps->agent_features->meta.back().scene_index == 2);

  CHECK_FALSE(model.forward(batch, Mode::Infer).taps.has_value());
}

TEST_CASE("forward errors")
{
  Fixture fx(both(), 2);
  const PlannerModel model(small_model(), both(), 1);
  CHECK_THROWS_AS(model.forward({}, Mode::Infer), BatchError);

  WorldConfig other = small_world();
  other.grid = GridSpec{-9.6, 9.6, -9.6, 9.6, 1.6};
  const auto odd = prepare_scenes(make_dataset(other, 1, 3), VlpConfig{}, nullptr);
  CHECK_THROWS_AS(model.forward({&fx.data[0], &odd[0]}, Mode::Infer), BatchError);

  // Scenes prepared without prompt encodings cannot feed a VLP model in training.
  const auto plain = prepare_scenes(make_dataset(small_world(), 1, 3), VlpConfig{}, nullptr);
  CHECK_THROWS_AS(model.forward({&plain[0]}, Mode::Train), PairingError);
  CHECK_NOTHROW(model.forward({&plain[0]}, Mode::Infer));

  CHECK_THROWS_AS(prepare_scenes(make_dataset(small_world(), 1, 3), both(), nullptr), ArgumentError);
}

TEST_CASE("attachments are separate from the base network")
{
  const PlannerModel plain(small_model(), VlpConfig{}, 5);
  const PlannerModel vlp(small_model(), both(), 5);
  CHECK_FALSE(plain.has_vlp());
  CHECK(vlp.has_vlp());
  REQUIRE(plain.base_params().entries().size() == vlp.base_params().entries().size());
  for (std::size_t i = 0; i < plain.base_params().entries().size(); ++i) {
    const auto & [name, a] = plain.base_params().entries()[i];
    CHECK(name == vlp.base_params().entries()[i].first);
    CHECK(max_abs_diff(a.value(), vlp.base_params().entries()[i].second.value()) == 0.0);
  }
  const std::size_t expected = 2 * adapter_size(16, 8) + 2;
  CHECK(vlp.vlp_parameter_count() == expected);
  CHECK(vlp.parameter_count() - plain.parameter_count() == expected);

  VlpConfig slp_only = both();
  slp_only.alp = false;
  const PlannerModel s(small_model(), slp_only, 5);
  CHECK(s.vlp_parameter_count() == adapter_size(16, 8) + 1);
  CHECK(s.alp_scale() == nullptr);
  CHECK(s.slp_scale() != nullptr);
}

TEST_CASE("inference is unchanged by stripping the attachments")
{
  Fixture fx(both(), 4);
  PlannerModel model(small_model(), both(), 3);
  TrainConfig tc;
  tc.steps = 5;
  tc.batch_size = 2;
  train(model, fx.data, tc);

  const PlannerModel stripped = model.strip_vlp();
  CHECK_FALSE(stripped.has_vlp());
  CHECK(model.parameter_count() - stripped.parameter_count() == 2 * adapter_size(16, 8) + 2);
  const auto batch = fx.batch();
  const ForwardOutput a = model.forward(batch, Mode::Infer);
  const ForwardOutput b = stripped.forward(batch, Mode::Infer);
  CHECK(max_abs_diff(a.plan.value(), b.plan.value()) == 0.0);
  CHECK(max_abs_diff(a.bev.value(), b.bev.value()) == 0.0);
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    CHECK(max_abs_diff(a.agents[i].class_logits.value(), b.agents[i].class_logits.value()) == 0.0);
    CHECK(max_abs_diff(a.agents[i].traj.value(), b.agents[i].traj.value()) == 0.0);
  }
}

TEST_CASE("planning loss is the mean L1 waypoint offset")
{
  Fixture fx(VlpConfig{}, 2);
  const PlannerModel model(small_model(), VlpConfig{}, 2);
  const auto batch = fx.batch();
  ForwardOutput out = model.forward(batch, Mode::Train);
  ag::Mat plan(2, 2 * kPlanSteps);
  for (int b = 0; b < 2; ++b) {
    for (int t = 0; t < kPlanSteps; ++t) {
      const Point p = fx.data[static_cast<std::size_t>(b)].scene.ego.gt_plan[static_cast<std::size_t>(t)];
      plan(b, 2 * t) = p.x + 1.0;
      plan(b, 2 * t + 1) = p.y;
    }
  }
  out.plan = ag::Var(plan);
  CHECK(task_losses(out, batch).plan.item() == doctest::Approx(1.0).epsilon(1e-12));
  plan.array() -= 1.0;  // x exact, y off by one
  out.plan = ag::Var(plan);
  CHECK(task_losses(out, batch).plan.item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("total loss composition")
{
  VlpConfig v = both();
  v.w_enc = 0.5;
  v.w_dec = 2.0;
  Fixture fx(v, 3);
  const PlannerModel model(small_model(), v, 9);
  const LossBreakdown l = total_loss(model, fx.batch());
  CHECK(l.l_alp > 0.0);
  CHECK(l.l_slp > 0.0);
  CHECK(l.total == 0.5 * l.l_alp + 2.0 * (((l.l_perc + l.l_pred) + l.l_plan) + l.l_slp));
  CHECK(l.graph.item() == l.total);

  Fixture plain(VlpConfig{}, 3);
  const PlannerModel base(small_model(), VlpConfig{}, 9);
  const LossBreakdown b = total_loss(base, plain.batch());
  CHECK(b.l_alp == 0.0);
  CHECK(b.l_slp == 0.0);
  CHECK(b.total == ((b.l_perc + b.l_pred) + b.l_plan));
  CHECK(std::isnan(alignment_accuracy(base, plain.batch()).alp));
}

TEST_CASE("total loss gradient matches finite differences")
{
  VlpConfig v = both();
  v.text_dim = 8;
  Fixture fx(v, 2);
  ModelConfig m = small_model();
  m.channels = 4;
  const PlannerModel model(m, v, 4);
  const ag::Var * ego_query = model.base_params().find("ego.query");
  const ag::Var * plan_bias = model.base_params().find("plan.head.fc2.bias");
  REQUIRE(ego_query != nullptr);
  REQUIRE(plan_bias != nullptr);
  std::vector<ag::Var> params = {*ego_query, *plan_bias};
  params.push_back(model.vlp_params()->entries().front().second);
  params.push_back(model.alp_scale()->raw());
  const auto batch = fx.batch();
  const auto r = testing::fd_check([&] { return total_loss(model, batch).graph; }, params, 1e-6);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("training is deterministic and reduces the loss")
{
  Fixture fx(both(), 6);
  TrainConfig tc;
  tc.steps = 40;
  tc.batch_size = 3;
  tc.adamw.lr = 3e-3;
  tc.seed = 11;
  PlannerModel a(small_model(), both(), 1);
  PlannerModel b(small_model(), both(), 1);
  const TrainResult ra = train(a, fx.data, tc);
  const TrainResult rb = train(b, fx.data, tc);
  REQUIRE(ra.history.size() == 40);
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].total == rb.history[i].total);
  }
  CHECK_FALSE(ra.diverged);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 5; ++i) {
    head += ra.history[static_cast<std::size_t>(i)].total;
    tail += ra.history[ra.history.size() - 1 - static_cast<std::size_t>(i)].total;
  }
  CHECK(tail < head);

  tc.seed = 12;
  PlannerModel c(small_model(), both(), 1);
  CHECK(train(c, fx.data, tc).history.back().total != ra.history.back().total);
}

TEST_CASE("divergence restores the last finite parameters")
{
  Fixture fx(VlpConfig{}, 4);
  PlannerModel model(small_model(), VlpConfig{}, 1);
  TrainConfig tc;
  tc.steps = 50;
  tc.batch_size = 2;
  tc.adamw.lr = 1e200;
  tc.adamw.clip_norm = 0.0;
  const TrainResult r = train(model, fx.data, tc);
  CHECK(r.diverged);
  CHECK(r.history.size() < 50);
  for (const auto & [name, p] : model.base_params().entries()) {
    CHECK_MESSAGE(p.value().allFinite(), name);
  }
  CHECK_THROWS_AS(train(model, {}, tc), ArgumentError);
}

TEST_CASE("checkpoint round trip")
{
  Fixture fx(both(), 3);
  PlannerModel model(small_model(), both(), 21);
  TrainConfig tc;
  tc.steps = 3;
  tc.batch_size = 2;
  train(model, fx.data, tc);
  const auto dir = std::filesystem::temp_directory_path() / "vlp_test_model";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "ckpt.bin").string();
  save_checkpoint(model, path);

  const PlannerModel full = load_checkpoint(path, Mode::Train);
  CHECK(full.has_vlp());
  CHECK(full.config() == model.config());
  CHECK(full.vlp_config() == model.vlp_config());
  CHECK(full.parameter_count() == model.parameter_count());
  const auto batch = fx.batch();
  CHECK(total_loss(full, batch).total == total_loss(model, batch).total);

  const PlannerModel lean = load_checkpoint(path, Mode::Infer);
  CHECK_FALSE(lean.has_vlp());
  CHECK(lean.parameter_count() == model.strip_vlp().parameter_count());
  CHECK(max_abs_diff(lean.forward(batch, Mode::Infer).plan.value(), model.forward(batch, Mode::Infer).plan.value()) == 0.0);

  // Corruptions.
  {
    std::ofstream(dir / "bad_magic.bin") << "NOTACKPT0000";
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "bad_magic.bin").string()), SchemaError);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir / "short.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "short.bin").string()), SchemaError);
  CHECK_THROWS(load_checkpoint((dir / "missing.bin").string()));
  std::filesystem::remove_all(dir);
}
