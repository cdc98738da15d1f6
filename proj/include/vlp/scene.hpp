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

// Procedural driving scenes: ego record with a planned ground-truth future,
// surrounding agents with futures, and lane polylines, all in the ego frame.

#pragma once

#include "vlp/grid.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vlp
{

inline constexpr int kPlanSteps = 6;        // 3 s at 2 Hz
inline constexpr int kTrajSteps = 6;        // agent futures share the cadence
inline constexpr int kPastSteps = 4;
inline constexpr double kStepSeconds = 0.5;
inline constexpr int kSceneSchemaVersion = 1;

enum class AgentClass : int {
  Car = 0,
  Truck,
  Bus,
  Pedestrian,
  Cyclist,
  Motorcycle,
  Trailer,
  Construction,
};
inline constexpr int kNumClasses = 8;

enum class LaneKind : int { Divider = 0, Boundary, Crossing };
inline constexpr int kNumLaneKinds = 3;

enum class Command : int { TurnLeft = 0, TurnRight, GoStraight };
inline constexpr int kNumCommands = 3;

std::string_view to_string(AgentClass c);
std::string_view to_string(LaneKind k);
std::string_view to_string(Command c);
AgentClass agent_class_from_string(std::string_view s);
LaneKind lane_kind_from_string(std::string_view s);
Command command_from_string(std::string_view s);

struct AgentRecord
{
  int id = 0;
  AgentClass label = AgentClass::Car;
  BevBox bev_box;
  Point velocity;
  std::vector<Point> future_traj;  // kTrajSteps absolute positions

  friend bool operator==(const AgentRecord &, const AgentRecord &) = default;
};

struct LaneElement
{
  LaneKind kind = LaneKind::Divider;
  std::vector<Point> polyline;
  double width = 0.0;

  friend bool operator==(const LaneElement &, const LaneElement &) = default;
};

struct EgoRecord
{
  BevBox footprint;
  Command command = Command::GoStraight;
  std::vector<Point> gt_plan;  // kPlanSteps
  std::vector<Point> past;     // kPastSteps, most recent first

  friend bool operator==(const EgoRecord &, const EgoRecord &) = default;
};

struct Scene
{
  EgoRecord ego;
  std::vector<AgentRecord> agents;
  std::vector<LaneElement> lanes;
  std::string world_tag;
  std::uint64_t seed = 0;
  GridSpec grid;

  friend bool operator==(const Scene &, const Scene &) = default;
};

struct Range
{
  double lo = 0.0;
  double hi = 0.0;
};

struct WorldConfig
{
  std::string name = "cityA";
  int agents_min = 6;
  int agents_max = 12;
  std::array<double, kNumClasses> class_freq{};
  double straight_curvature_max = 0.005;
  Range turn_curvature{0.02, 0.05};
  int lanes_min = 2;
  int lanes_max = 3;
  double lane_width = 3.5;
  double lane_width_jitter = 0.08;  // per-scene relative width change, uniform in +-
  double lane_offset_max = 0.6;     // ego offset from its lane center, uniform in +- (m)
  Range ego_speed{4.0, 9.0};
  double agent_speed_scale = 1.0;
  std::array<double, kNumCommands> command_mix{0.25, 0.25, 0.5};  // left, right, straight
  double crossing_prob = 0.3;
  GridSpec grid;

  /// Throws ConfigError on negative or inverted ranges, frequencies that do
  /// not sum to one, or an empty class set.
  void validate() const;

  /// Low curvature, dense traffic, wide roads.
  static WorldConfig city_a();
  /// High curvature, sparse traffic, narrow roads.
  static WorldConfig city_b();
  /// cityA geometry with a heavily skewed class distribution; the five rarest
  /// classes carry 6% of the mass.
  static WorldConfig long_tail();
  /// Looks up one of the presets above by name.
  static WorldConfig preset(std::string_view name);
};

Scene generate_scene(std::uint64_t seed, const WorldConfig & config);
std::vector<Scene> make_dataset(const WorldConfig & config, int n, std::uint64_t seed0);

/// Boolean mask (row-major H x W) of cells whose center lies within width/2
/// of the element polyline. Throws EmptyRegionError when no cell qualifies
/// and DegenerateError on a zero-length polyline.
std::vector<bool> rasterize_lane_mask(const GridSpec & grid, const LaneElement & element);

void to_json(nlohmann::json & j, const Scene & scene);
void from_json(const nlohmann::json & j, Scene & scene);
void to_json(nlohmann::json & j, const WorldConfig & config);

/// Writes one JSON document per line.
void write_jsonl(const std::string & path, const std::vector<Scene> & scenes);
std::vector<Scene> read_jsonl(const std::string & path);

}  // namespace vlp
