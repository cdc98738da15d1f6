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

// Crop / segment / pool operators that turn regions of a BEV feature map into
// one feature row per agent (ego, foreground objects, lane elements).

#pragma once

#include "vlp/autograd.hpp"
#include "vlp/grid.hpp"
#include "vlp/scene.hpp"

#include <span>
#include <string>
#include <vector>

namespace vlp
{

/// BEV feature map. features is (H * W) x C, row = grid.index(row, col).
struct BevGrid
{
  GridSpec spec;
  ag::Var features;
};

enum class AgentKind : int { Ego = 0, FG, Lane };

struct AgentMeta
{
  int scene_index = 0;
  AgentKind kind = AgentKind::Ego;
  int agent_id = 0;  // agent id for FG, lane list position for Lane, 0 for Ego

  friend bool operator==(const AgentMeta &, const AgentMeta &) = default;
};

struct AgentFeatureBatch
{
  ag::Var features;  // N_B x C
  std::vector<AgentMeta> meta;
};

/// Flat indices (ascending) of cells whose centers lie inside the rotated
/// rectangle. Empty when the box falls between cell centers or outside the
/// extent. Throws DegenerateError for non-positive length or width.
std::vector<int> cells_in_box(const GridSpec & spec, const BevBox & box);

/// cells_in_box, falling back to the single cell nearest the box center when
/// no cell center is covered.
std::vector<int> box_region(const GridSpec & spec, const BevBox & box);

/// Flat indices of the rasterised lane mask.
std::vector<int> lane_region(const GridSpec & spec, const LaneElement & lane);

/// Cell sets of every agent row of a scene, in row order: ego, agents by id,
/// lanes in list order.
struct SceneRegions
{
  std::vector<std::vector<int>> cells;
  std::vector<AgentMeta> meta;
};
SceneRegions scene_regions(const Scene & scene, int scene_index = 0);

/// Mean over the given cells, per channel (1 x C). Throws EmptyRegionError
/// for an empty cell set.
ag::Var pool_region(const BevGrid & grid, std::span<const int> cells);

AgentFeatureBatch agent_bev_features(const BevGrid & grid, const Scene & scene);

/// Batched form: features holds scenes.size() stacked grids sharing one
/// GridSpec. Rows are concatenated in scene order.
AgentFeatureBatch agent_bev_features(
  const ag::Var & stacked_features, const std::vector<SceneRegions> & regions, int cells_per_grid);

/// Writes <prefix>.bin (little-endian float64, row-major H x W x C) and
/// <prefix>.json (extent, resolution, shape).
void dump_grid(const BevGrid & grid, const std::string & prefix);

}  // namespace vlp
