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
#include "oracles.hpp"
#include "vlp/bev.hpp"
#include "vlp/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

using namespace vlp;
using vlp::testing::random_mat;

using vlp::testing::brute_force_cells;

TEST_CASE("cells_in_box spec examples")
{
  const GridSpec g{-4.0, 4.0, -4.0, 4.0, 1.0};
  CHECK(cells_in_box(g, {0.0, 0.0, 2.0, 2.0, 0.0}).size() == 4);
  CHECK(cells_in_box(g, {0.5, 0.5, 3.0, 3.0, 0.0}) == cells_in_box(g, {0.5, 0.5, 3.0, 3.0, std::numbers::pi / 2}));
  CHECK(cells_in_box(g, {20.0, 20.0, 2.0, 2.0, 0.3}).empty());
  CHECK(cells_in_box(g, {0.0, 0.0, 0.2, 0.2, 0.0}).empty());
  CHECK(box_region(g, {0.0, 0.0, 0.2, 0.2, 0.0}).size() == 1);
  CHECK_THROWS_AS(cells_in_box(g, {0.0, 0.0, -1.0, 1.0, 0.0}), DegenerateError);
}

TEST_CASE("cells_in_box matches brute force on random rotated boxes")
{
  const GridSpec g{-6.4, 6.4, -6.4, 6.4, 0.8};
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pos(-8.0, 8.0), size(0.1, 6.0), yaw(-3.2, 3.2);
  for (int i = 0; i < 300; ++i) {
    const BevBox b{pos(rng), pos(rng), size(rng), size(rng), yaw(rng)};
    CHECK(cells_in_box(g, b) == brute_force_cells(g, b));
  }
}

TEST_CASE("pool_region")
{
  const GridSpec g{-2.0, 2.0, -2.0, 2.0, 1.0};
  ag::Mat f = ag::Mat::Zero(16, 1);
  f(0, 0) = 1; f(1, 0) = 2; f(4, 0) = 3; f(5, 0) = 4;
  const BevGrid grid{g, ag::Var(f)};
  const std::vector<int> cells = {0, 1, 4, 5};
  CHECK(pool_region(grid, cells).item() == doctest::Approx(2.5));
  std::vector<int> all(16);
  std::iota(all.begin(), all.end(), 0);
  CHECK(pool_region(grid, all).item() == doctest::Approx(f.mean()));
  const BevGrid zero{g, ag::Var(ag::Mat::Zero(16, 3))};
  CHECK(pool_region(zero, cells).value().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(pool_region(grid, std::vector<int>{}), EmptyRegionError);
}

TEST_CASE("pool_region is linear, translation consistent and differentiable")
{
  const GridSpec g{-3.2, 3.2, -3.2, 3.2, 0.8};  // 8 x 8
  std::mt19937_64 rng(3);
  const ag::Mat a = random_mat(rng, 64, 4);
  const ag::Mat b = random_mat(rng, 64, 4);
  const auto cells = cells_in_box(g, {0.0, 0.0, 2.5, 1.7, 0.4});
  REQUIRE_FALSE(cells.empty());
  const ag::Mat lhs = pool_region({g, ag::Var(ag::Mat(2.0 * a - 0.5 * b))}, cells).value();
  const ag::Mat rhs = 2.0 * pool_region({g, ag::Var(a)}, cells).value() - 0.5 * pool_region({g, ag::Var(b)}, cells).value();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

  // Shift content and box by one cell in x.
  ag::Mat shifted = ag::Mat::Zero(64, 4);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c + 1 < 8; ++c) {
      shifted.row(g.index(r, c + 1)) = a.row(g.index(r, c));
    }
  }
  const BevBox box{-1.2, 0.0, 1.5, 1.5, 0.2};
  BevBox moved = box;
  moved.cx += 0.8;
  const ag::Mat p0 = pool_region({g, ag::Var(a)}, cells_in_box(g, box)).value();
  const ag::Mat p1 = pool_region({g, ag::Var(shifted)}, cells_in_box(g, moved)).value();
  CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-12);

  ag::Var feats(a, true);
  const ag::Mat w = random_mat(rng, 1, 4);
  auto loss = [&] {
    return ag::sum(ag::mul(pool_region({g, feats}, cells), ag::Var(w)));
  };
  CHECK(vlp::testing::fd_check(loss, {feats}).max_rel_error < 1e-4);
}

TEST_CASE("agent_bev_features row accounting and order")
{
  Scene s;
  s.ego.footprint = {0.0, 0.0, 4.5, 1.9, 0.0};
  const GridSpec g = s.grid;
  std::mt19937_64 rng(9);
  const BevGrid grid{g, ag::Var(random_mat(rng, g.cell_count(), 3))};
  auto batch = agent_bev_features(grid, s);
  CHECK(batch.features.rows() == 1);
  CHECK(batch.meta.front().kind == AgentKind::Ego);

  s.agents.push_back({5, AgentClass::Car, {10.0, 3.0, 4.0, 2.0, 0.1}, {}, {}});
  s.agents.push_back({2, AgentClass::Bus, {-10.0, -3.0, 10.0, 2.5, 0.0}, {}, {}});
  for (double y : {-5.0, 0.0, 5.0}) {
    s.lanes.push_back({LaneKind::Divider, {{-20.0, y + 1.7}, {20.0, y + 1.7}}, 0.8});
  }
  batch = agent_bev_features(grid, s);
  REQUIRE(batch.features.rows() == 6);
  const std::vector<AgentKind> kinds = {AgentKind::Ego, AgentKind::FG, AgentKind::FG, AgentKind::Lane, AgentKind::Lane, AgentKind::Lane};
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    CHECK(batch.meta[i].kind == kinds[i]);
  }
  CHECK(batch.meta[1].agent_id == 2);
  CHECK(batch.meta[2].agent_id == 5);
  const auto regions = scene_regions(s);
  for (std::size_t i = 0; i < regions.cells.size(); ++i) {
    const ag::Mat row = pool_region(grid, regions.cells[i]).value();
    CHECK((batch.features.value().row(static_cast<Eigen::Index>(i)) - row).cwiseAbs().maxCoeff() == 0.0);
  }

  // Batched call concatenates in scene order.
  Scene t = s;
  t.agents.clear();
  ag::Mat stacked(2 * g.cell_count(), 3);
  stacked << grid.features.value(), grid.features.value();
  const auto both = agent_bev_features(ag::Var(stacked), {scene_regions(s, 0), scene_regions(t, 1)}, g.cell_count());
  CHECK(both.features.rows() == 6 + 4);
  CHECK(both.meta[6].scene_index == 1);

  Scene other = s;
  other.grid.resolution = 1.6;
  CHECK_THROWS_AS(agent_bev_features(grid, other), BatchError);
}

TEST_CASE("grid dump writes binary and header")
{
  const GridSpec g{-1.6, 1.6, -1.6, 1.6, 0.8};
  const BevGrid grid{g, ag::Var(ag::Mat::Constant(16, 2, 1.5))};
  const auto prefix = (std::filesystem::temp_directory_path() / "vlp_grid_dump").string();
  dump_grid(grid, prefix);
  CHECK(std::filesystem::file_size(prefix + ".bin") == 16 * 2 * sizeof(double));
  CHECK(std::filesystem::exists(prefix + ".json"));
  std::filesystem::remove(prefix + ".bin");
  std::filesystem::remove(prefix + ".json");
}
