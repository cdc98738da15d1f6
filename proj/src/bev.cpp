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

#include "vlp/bev.hpp"

#include "vlp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace vlp
{

std::vector<int> cells_in_box(const GridSpec & spec, const BevBox & box)
{
  require_valid_box(box, "cells_in_box");
  double lo_x = std::numeric_limits<double>::infinity();
  double hi_x = -lo_x;
  double lo_y = lo_x;
  double hi_y = -lo_x;
  for (const auto & c : box_corners(box)) {
    lo_x = std::min(lo_x, c.x);
    hi_x = std::max(hi_x, c.x);
    lo_y = std::min(lo_y, c.y);
    hi_y = std::max(hi_y, c.y);
  }
  const int h = spec.height();
  const int w = spec.width();
  // Candidate columns/rows whose centers may fall inside the axis-aligned hull.
  auto to_index = [](double v, int n) {
    return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(n)));
  };
  const int c0 = std::max(0, to_index(std::floor((lo_x - spec.x_min) / spec.resolution - 0.5), w));
  const int c1 = std::min(w - 1, to_index(std::ceil((hi_x - spec.x_min) / spec.resolution - 0.5), w));
  const int r0 = std::max(0, to_index(std::floor((lo_y - spec.y_min) / spec.resolution - 0.5), h));
  const int r1 = std::min(h - 1, to_index(std::ceil((hi_y - spec.y_min) / spec.resolution - 0.5), h));
  std::vector<int> out;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (point_in_box(box, spec.cell_center(r, c))) {
        out.push_back(spec.index(r, c));
      }
    }
  }
  return out;
}

std::vector<int> box_region(const GridSpec & spec, const BevBox & box)
{
  auto cells = cells_in_box(spec, box);
  if (cells.empty()) {
    cells.push_back(spec.nearest_cell({box.cx, box.cy}));
  }
  return cells;
}

std::vector<int> lane_region(const GridSpec & spec, const LaneElement & lane)
{
  const auto mask = rasterize_lane_mask(spec, lane);
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

SceneRegions scene_regions(const Scene & scene, int scene_index)
{
  SceneRegions regions;
  regions.cells.push_back(box_region(scene.grid, scene.ego.footprint));
  regions.meta.push_back({scene_index, AgentKind::Ego, 0});
  std::vector<const AgentRecord *> agents;
  for (const auto & a : scene.agents) {
    agents.push_back(&a);
  }
  std::stable_sort(agents.begin(), agents.end(), [](const AgentRecord * a, const AgentRecord * b) {
    return a->id < b->id;
  });
  for (const auto * a : agents) {
    regions.cells.push_back(box_region(scene.grid, a->bev_box));
    regions.meta.push_back({scene_index, AgentKind::FG, a->id});
  }
  for (std::size_t i = 0; i < scene.lanes.size(); ++i) {
    regions.cells.push_back(lane_region(scene.grid, scene.lanes[i]));
    regions.meta.push_back({scene_index, AgentKind::Lane, static_cast<int>(i)});
  }
  return regions;
}

ag::Var pool_region(const BevGrid & grid, std::span<const int> cells)
{
  if (cells.empty()) {
    throw EmptyRegionError("pool_region: empty cell set");
  }
  std::vector<ag::Index> rows(cells.begin(), cells.end());
  return ag::segment_mean(grid.features, {rows});
}

AgentFeatureBatch agent_bev_features(const BevGrid & grid, const Scene & scene)
{
  if (!(grid.spec == scene.grid)) {
    throw BatchError("grid and scene use different grid specs");
  }
  return agent_bev_features(grid.features, {scene_regions(scene, 0)}, grid.spec.cell_count());
}

AgentFeatureBatch agent_bev_features(
  const ag::Var & stacked_features, const std::vector<SceneRegions> & regions, int cells_per_grid)
{
  if (stacked_features.rows() != static_cast<ag::Index>(regions.size()) * cells_per_grid) {
    throw BatchError("stacked feature rows do not match scene count x cells");
  }
  std::vector<std::vector<ag::Index>> groups;
  AgentFeatureBatch batch;
  for (std::size_t s = 0; s < regions.size(); ++s) {
    const ag::Index offset = static_cast<ag::Index>(s) * cells_per_grid;
    for (std::size_t i = 0; i < regions[s].cells.size(); ++i) {
      std::vector<ag::Index> g;
      g.reserve(regions[s].cells[i].size());
      for (int c : regions[s].cells[i]) {
        g.push_back(offset + c);
      }
      groups.push_back(std::move(g));
      batch.meta.push_back(regions[s].meta[i]);
    }
  }
  batch.features = ag::segment_mean(stacked_features, groups);
  return batch;
}

void dump_grid(const BevGrid & grid, const std::string & prefix)
{
  const auto & v = grid.features.value();
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) {
    throw ArgumentError("cannot write " + prefix + ".bin");
  }
  bin.write(reinterpret_cast<const char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  nlohmann::json header = {
    {"dtype", "float64"},
    {"layout", "row-major H x W x C"},
    {"height", grid.spec.height()},
    {"width", grid.spec.width()},
    {"channels", v.cols()},
    {"extent", {grid.spec.x_min, grid.spec.x_max, grid.spec.y_min, grid.spec.y_max}},
    {"resolution", grid.spec.resolution},
  };
  std::ofstream(prefix + ".json") << header.dump(2) << '\n';
}

}  // namespace vlp
