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

#include "vlp/errors.hpp"
#include "vlp/geometry.hpp"
#include "vlp/grid.hpp"
#include "vlp/scene.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

using namespace vlp;

TEST_CASE("box corners and point containment")
{
  const BevBox b{1.0, 2.0, 4.0, 2.0, std::numbers::pi / 2};
  CHECK(point_in_box(b, {1.0, 2.0}));
  CHECK(point_in_box(b, {1.9, 3.9}));
  CHECK_FALSE(point_in_box(b, {2.1, 2.0}));
  const auto c = box_corners(b);
  CHECK(c[0].x == doctest::Approx(0.0));
  CHECK(c[0].y == doctest::Approx(4.0));
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK_THROWS_AS(require_valid_box({0, 0, 0.0, 1.0, 0}, "t"), DegenerateError);
}

TEST_CASE("separating axis overlap")
{
  const BevBox a{0, 0, 4, 2, 0};
  CHECK(boxes_intersect(a, {3.9, 0, 4, 2, 0}));
  CHECK_FALSE(boxes_intersect(a, {4.1, 0, 4, 2, 0}));
  CHECK(boxes_intersect(a, {4.0, 0, 4, 2, 0}));  // touching
  // Axis-aligned hulls overlap but the rotated boxes do not.
  CHECK_FALSE(boxes_intersect({0, 0, 4, 0.5, std::numbers::pi / 4}, {2.0, -1.2, 1, 1, std::numbers::pi / 4}));
}

TEST_CASE("grid spec")
{
  GridSpec g;
  CHECK(g.height() == 64);
  CHECK(g.width() == 64);
  const Point p = g.cell_center(0, 1);
  CHECK(p.x == doctest::Approx(-25.6 + 1.2));
  CHECK(p.y == doctest::Approx(-25.6 + 0.4));
  CHECK(g.nearest_cell({100.0, 100.0}) == g.cell_count() - 1);
  GridSpec bad = g;
  bad.resolution = 0.7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generate_scene is deterministic and respects invariants")
{
  const auto cfg = WorldConfig::city_a();
  const Scene a = generate_scene(7, cfg);
  const Scene b = generate_scene(7, cfg);
  CHECK(a == b);
  CHECK(a.ego.gt_plan.size() == kPlanSteps);
  CHECK(a.ego.past.size() == kPastSteps);
  for (int seed = 0; seed < 100; ++seed) {
    for (const auto * c : {&cfg}) {
      const Scene s = generate_scene(static_cast<std::uint64_t>(seed), *c);
      for (const auto & ag : s.agents) {
        CHECK(ag.bev_box.length > 0.0);
        CHECK(ag.future_traj.size() == kTrajSteps);
        CHECK(ag.bev_box.yaw >= -std::numbers::pi);
        CHECK(ag.bev_box.yaw < std::numbers::pi);
        for (const auto & corner : box_corners(ag.bev_box)) {
          CHECK(s.grid.contains(corner));
        }
      }
      for (const auto & lane : s.lanes) {
        CHECK(lane.polyline.size() >= 2);
        CHECK(lane.width > 0.0);
        for (const auto & p : lane.polyline) {
          CHECK(s.grid.contains(p));
        }
      }
    }
  }
}

TEST_CASE("turn commands curve the plan in the commanded direction")
{
  for (const auto & cfg : {WorldConfig::city_a(), WorldConfig::city_b()}) {
    // An ego held behind a lead vehicle may not reach the curve start, so the
    // sign is checked weakly and most turns must actually curve.
    int turns = 0, curved = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Scene s = generate_scene(seed, cfg);
      if (s.ego.command == Command::GoStraight) {
        continue;
      }
      ++turns;
      const double y = s.ego.gt_plan.back().y * (s.ego.command == Command::TurnLeft ? 1.0 : -1.0);
      CHECK(y >= 0.0);
      curved += y > 0.0 ? 1 : 0;
    }
    CHECK(turns > 20);
    CHECK(curved >= 0.9 * turns);
  }
}

TEST_CASE("degenerate and single-class configs")
{
  auto cfg = WorldConfig::city_a();
  cfg.agents_min = cfg.agents_max = 0;
  const Scene empty = generate_scene(0, cfg);
  CHECK(empty.agents.empty());
  CHECK_FALSE(empty.lanes.empty());

  cfg = WorldConfig::city_a();
  cfg.class_freq = {1, 0, 0, 0, 0, 0, 0, 0};
  for (const auto & ag : generate_scene(7, cfg).agents) {
    CHECK(ag.label == AgentClass::Car);
  }

  cfg = WorldConfig::city_a();
  cfg.class_freq = {};
  CHECK_THROWS_AS(generate_scene(0, cfg), ConfigError);
  cfg = WorldConfig::city_a();
  cfg.ego_speed = {5.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("make_dataset")
{
  const auto cfg = WorldConfig::city_a();
  CHECK_THROWS_AS(make_dataset(cfg, 0, 0), ArgumentError);
  const auto one = make_dataset(cfg, 1, 3);
  CHECK(one.front() == generate_scene(3, cfg));
  const auto five = make_dataset(cfg, 5, 0);
  for (std::size_t i = 0; i < five.size(); ++i) {
    CHECK(five[i].seed == i);
    for (std::size_t j = 0; j < i; ++j) {
      CHECK_FALSE(five[i].agents == five[j].agents);
    }
  }
}

TEST_CASE("class frequencies follow the config")
{
  const auto cfg = WorldConfig::long_tail();
  std::array<double, kNumClasses> counts{};
  double total = 0.0;
  for (const auto & s : make_dataset(cfg, 1000, 100)) {
    for (const auto & ag : s.agents) {
      counts[static_cast<std::size_t>(ag.label)] += 1.0;
      total += 1.0;
    }
  }
  REQUIRE(total > 1000.0);
  const double rare = (counts[2] + counts[4] + counts[5] + counts[6] + counts[7]) / total;
  CHECK(std::abs(rare - 0.06) <= 0.02);
  for (int c = 0; c < kNumClasses; ++c) {
    const double p = cfg.class_freq[static_cast<std::size_t>(c)];
    const double se = std::sqrt(p * (1.0 - p) / total);
    CAPTURE(c);
    CHECK(std::abs(counts[static_cast<std::size_t>(c)] / total - p) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("lane mask oracle")
{
  GridSpec g{-4.0, 4.0, -4.0, 4.0, 1.0};
  // Horizontal line through cell centers of row 4 (y = 0.5), width one cell.
  LaneElement e{LaneKind::Divider, {{-4.0, 0.5}, {4.0, 0.5}}, 1.0};
  const auto mask = rasterize_lane_mask(g, e);
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const bool expect = point_polyline_distance(g.cell_center(r, c), e.polyline) <= 0.5;
      CHECK(mask[static_cast<std::size_t>(g.index(r, c))] == expect);
    }
  }
  int rows_hit = 0;
  for (int r = 0; r < g.height(); ++r) {
    rows_hit += mask[static_cast<std::size_t>(g.index(r, 0))] ? 1 : 0;
  }
  CHECK(rows_hit >= 1);
  LaneElement coincident{LaneKind::Divider, {{1.0, 1.0}, {1.0, 1.0}}, 1.0};
  CHECK_THROWS_AS(rasterize_lane_mask(g, coincident), DegenerateError);
  LaneElement outside{LaneKind::Divider, {{40.0, 40.0}, {50.0, 40.0}}, 1.0};
  CHECK_THROWS_AS(rasterize_lane_mask(g, outside), EmptyRegionError);
}

TEST_CASE("scene json round trip")
{
  const Scene s = generate_scene(11, WorldConfig::city_b());
  nlohmann::json j = s;
  CHECK(j.at("schema_version") == kSceneSchemaVersion);
  const Scene back = j.get<Scene>();
  CHECK(back == s);
  j["schema_version"] = 99;
  CHECK_THROWS_AS(j.get<Scene>(), SchemaError);

  const auto path = (std::filesystem::temp_directory_path() / "vlp_scenes_test.jsonl").string();
  const auto ds = make_dataset(WorldConfig::city_a(), 3, 5);
  write_jsonl(path, ds);
  CHECK(read_jsonl(path) == ds);
  std::filesystem::remove(path);
}
