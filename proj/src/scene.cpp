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

#include "vlp/scene.hpp"

#include "vlp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

namespace vlp
{

namespace
{

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
  "car", "truck", "bus", "pedestrian", "cyclist", "motorcycle", "trailer", "construction"};
constexpr std::array<std::string_view, kNumLaneKinds> kLaneNames = {"divider", "boundary", "crossing"};
constexpr std::array<std::string_view, kNumCommands> kCommandNames = {
  "turn-left", "turn-right", "go-straight"};

enum class Placement { Lane, Roadside };

struct ClassTraits
{
  Range length;
  Range width;
  Range speed;
  Placement placement;
};

constexpr std::array<ClassTraits, kNumClasses> kTraits = {{
  {{4.2, 4.9}, {1.7, 2.0}, {2.0, 10.0}, Placement::Lane},       // car
  {{6.5, 9.0}, {2.3, 2.6}, {2.0, 8.0}, Placement::Lane},        // truck
  {{10.0, 12.0}, {2.5, 2.8}, {2.0, 8.0}, Placement::Lane},      // bus
  {{0.5, 0.8}, {0.5, 0.8}, {0.5, 1.8}, Placement::Roadside},    // pedestrian
  {{1.6, 1.9}, {0.6, 0.8}, {2.0, 6.0}, Placement::Lane},        // cyclist
  {{2.0, 2.3}, {0.8, 1.0}, {3.0, 10.0}, Placement::Lane},       // motorcycle
  {{8.0, 12.0}, {2.4, 2.6}, {0.0, 6.0}, Placement::Lane},       // trailer
  {{5.0, 7.0}, {2.5, 3.0}, {0.0, 0.5}, Placement::Roadside},    // construction
}};

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N> & names, std::string_view s, const char * what)
{
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) {
      return i;
    }
  }
  throw ArgumentError(std::string("unknown ") + what + ": " + std::string(s));
}

using Rng = std::mt19937_64;

double uniform(Rng & rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(Rng & rng, Range r) { return uniform(rng, r.lo, r.hi); }

template <std::size_t N>
std::size_t categorical(Rng & rng, const std::array<double, N> & weights)
{
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (weights[i] <= 0.0) {
      continue;
    }
    acc += weights[i];
    last = i;
    if (u < acc) {
      return i;
    }
  }
  return last;
}

// Reference path of the ego lane: straight until s0, then a constant
// curvature arc. Straight backwards for s < 0.
struct EgoPath
{
  double s0 = 0.0;
  double kappa = 0.0;

  Point position(double s) const
  {
    if (s <= s0 || std::abs(kappa) < 1e-12) {
      return {s, 0.0};
    }
    const double theta = kappa * (s - s0);
    return {s0 + std::sin(theta) / kappa, (1.0 - std::cos(theta)) / kappa};
  }

  double heading(double s) const { return s <= s0 ? 0.0 : kappa * (s - s0); }

  double curvature(double s) const { return s <= s0 ? 0.0 : kappa; }

  // Point at arc length s shifted laterally by d (positive = left).
  Point offset(double s, double d) const
  {
    const Point p = position(s);
    const double h = heading(s);
    return {p.x - d * std::sin(h), p.y + d * std::cos(h)};
  }
};

struct LaneLayout
{
  int count = 1;
  int ego_index = 0;
  double width = 3.5;

  double shift = 0.0;  // lateral position of the ego lane center

  double center(int lane) const { return (lane - ego_index) * width + shift; }
  double right_edge() const { return (-ego_index - 0.5) * width + shift; }
  double left_edge() const { return (count - ego_index - 0.5) * width + shift; }
};

bool box_inside(const GridSpec & grid, const BevBox & box)
{
  for (const auto & c : box_corners(box)) {
    if (!(c.x > grid.x_min && c.x < grid.x_max && c.y > grid.y_min && c.y < grid.y_max)) {
      return false;
    }
  }
  return true;
}

std::vector<Point> constant_turn_future(Point p, double heading, double speed, double yaw_rate)
{
  std::vector<Point> out;
  out.reserve(kTrajSteps);
  for (int k = 1; k <= kTrajSteps; ++k) {
    const double t = k * kStepSeconds;
    if (std::abs(yaw_rate) < 1e-9) {
      out.push_back({p.x + speed * t * std::cos(heading), p.y + speed * t * std::sin(heading)});
    } else {
      const double r = speed / yaw_rate;
      out.push_back(
        {p.x + r * (std::sin(heading + yaw_rate * t) - std::sin(heading)),
         p.y - r * (std::cos(heading + yaw_rate * t) - std::cos(heading))});
    }
  }
  return out;
}

// Bookkeeping for agents placed on lanes, used to find the lead vehicle.
struct Placed
{
  AgentRecord record;
  std::optional<int> lane;
  bool oncoming = false;
  double s = 0.0;
  double speed = 0.0;
};

std::vector<Point> plan_ego(
  const EgoPath & path, double v0, const BevBox & ego_box, const std::vector<Placed> & agents,
  int ego_lane, std::vector<double> * arc_out)
{
  // Nearest same-direction agent ahead in the ego lane.
  std::optional<std::pair<double, double>> lead;  // (gap at t=0, speed)
  for (const auto & a : agents) {
    if (!a.lane || *a.lane != ego_lane || a.oncoming || a.s <= 0.0) {
      continue;
    }
    const double gap = a.s - 0.5 * a.record.bev_box.length - 0.5 * ego_box.length;
    if (!lead || gap < lead->first) {
      lead = {gap, a.speed};
    }
  }
  constexpr int substeps = 10;
  const double dt = kStepSeconds / substeps;
  double v = v0;
  double s = 0.0;
  std::vector<Point> plan;
  for (int k = 1; k <= kPlanSteps; ++k) {
    for (int i = 0; i < substeps; ++i) {
      const double t = ((k - 1) * substeps + i) * dt;
      double v_des = v0;
      if (lead) {
        const double gap = lead->first + lead->second * t - s;
        v_des = std::min(v0, std::max(0.0, (gap - 4.0) / 1.2));
      }
      const double a = std::clamp(2.0 * (v_des - v), -4.0, 1.5);
      v = std::max(0.0, v + a * dt);
      s += v * dt;
    }
    plan.push_back(path.position(s));
    if (arc_out != nullptr) {
      arc_out->push_back(s);
    }
  }
  return plan;
}

std::optional<LaneElement> make_polyline_element(
  const GridSpec & grid, LaneKind kind, double width, const std::vector<Point> & samples)
{
  // Longest contiguous run of samples inside the extent.
  std::size_t best_begin = 0;
  std::size_t best_len = 0;
  std::size_t begin = 0;
  std::size_t len = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto & p = samples[i];
    const bool inside = p.x > grid.x_min && p.x < grid.x_max && p.y > grid.y_min && p.y < grid.y_max;
    if (inside) {
      if (len == 0) {
        begin = i;
      }
      ++len;
      if (len > best_len) {
        best_len = len;
        best_begin = begin;
      }
    } else {
      len = 0;
    }
  }
  if (best_len < 2) {
    return std::nullopt;
  }
  LaneElement e;
  e.kind = kind;
  e.width = width;
  e.polyline.assign(
    samples.begin() + static_cast<std::ptrdiff_t>(best_begin),
    samples.begin() + static_cast<std::ptrdiff_t>(best_begin + best_len));
  try {
    rasterize_lane_mask(grid, e);
  } catch (const EmptyRegionError &) {
    return std::nullopt;
  }
  return e;
}

}  // namespace

std::string_view to_string(AgentClass c) { return kClassNames.at(static_cast<std::size_t>(c)); }
std::string_view to_string(LaneKind k) { return kLaneNames.at(static_cast<std::size_t>(k)); }
std::string_view to_string(Command c) { return kCommandNames.at(static_cast<std::size_t>(c)); }

AgentClass agent_class_from_string(std::string_view s)
{
  return static_cast<AgentClass>(lookup(kClassNames, s, "agent class"));
}
LaneKind lane_kind_from_string(std::string_view s)
{
  return static_cast<LaneKind>(lookup(kLaneNames, s, "lane kind"));
}
Command command_from_string(std::string_view s)
{
  return static_cast<Command>(lookup(kCommandNames, s, "command"));
}

void WorldConfig::validate() const
{
  grid.validate();
  if (agents_min < 0 || agents_max < agents_min) {
    throw ConfigError("agent count range must satisfy 0 <= min <= max");
  }
  double total = 0.0;
  for (double f : class_freq) {
    if (!(f >= 0.0)) {
      throw ConfigError("class frequencies must be non-negative");
    }
    total += f;
  }
  if (total == 0.0) {
    throw ConfigError("class frequency vector is empty");
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("class frequencies must sum to 1");
  }
  auto check_range = [](Range r, const char * what, bool allow_zero) {
    if (!(r.lo >= 0.0) || !(r.hi > r.lo) || (!allow_zero && r.lo <= 0.0)) {
      throw ConfigError(std::string(what) + " range must be non-negative and non-degenerate");
    }
  };
  check_range(turn_curvature, "turn curvature", false);
  check_range(ego_speed, "ego speed", true);
  if (!(straight_curvature_max >= 0.0)) {
    throw ConfigError("straight curvature bound must be non-negative");
  }
  if (lanes_min < 1 || lanes_max < lanes_min) {
    throw ConfigError("lane count range must satisfy 1 <= min <= max");
  }
  if (!(lane_width > 0.0) || !(agent_speed_scale >= 0.0)) {
    throw ConfigError("lane width and speed scale must be positive");
  }
  if (!(lane_width_jitter >= 0.0 && lane_width_jitter < 0.5)) {
    throw ConfigError("lane width jitter must lie in [0, 0.5)");
  }
  if (!(lane_offset_max >= 0.0 && lane_offset_max < 0.25 * lane_width)) {
    throw ConfigError("lane offset bound must lie in [0, lane_width / 4)");
  }
  // Offset curves of the outermost lane edge must not fold over.
  const double max_offset = (lanes_max - 0.5) * lane_width * (1.0 + lane_width_jitter) + lane_offset_max;
  if (turn_curvature.hi * max_offset >= 0.9) {
    throw ConfigError("turn curvature too large for the lane layout");
  }
  double mix = 0.0;
  for (double m : command_mix) {
    if (!(m >= 0.0)) {
      throw ConfigError("command mixture must be non-negative");
    }
    mix += m;
  }
  if (std::abs(mix - 1.0) > 1e-9) {
    throw ConfigError("command mixture must sum to 1");
  }
  if (!(crossing_prob >= 0.0 && crossing_prob <= 1.0)) {
    throw ConfigError("crossing probability must lie in [0, 1]");
  }
}

WorldConfig WorldConfig::city_a()
{
  WorldConfig c;
  c.name = "cityA";
  c.class_freq = {0.50, 0.10, 0.05, 0.15, 0.08, 0.05, 0.04, 0.03};
  return c;
}

WorldConfig WorldConfig::city_b()
{
  WorldConfig c;
  c.name = "cityB";
  c.agents_min = 2;
  c.agents_max = 6;
  c.class_freq = {0.45, 0.05, 0.08, 0.22, 0.10, 0.06, 0.02, 0.02};
  c.straight_curvature_max = 0.02;
  c.turn_curvature = {0.05, 0.08};
  c.lanes_min = 1;
  c.lanes_max = 2;
  c.lane_width = 3.2;
  c.ego_speed = {2.0, 6.0};
  c.agent_speed_scale = 0.7;
  c.command_mix = {0.3, 0.3, 0.4};
  c.crossing_prob = 0.5;
  return c;
}

WorldConfig WorldConfig::long_tail()
{
  WorldConfig c = city_a();
  c.name = "longtail";
  // construction, trailer, motorcycle, cyclist, bus: 0.06 together
  c.class_freq = {0.62, 0.10, 0.02, 0.22, 0.015, 0.01, 0.01, 0.005};
  return c;
}

WorldConfig WorldConfig::preset(std::string_view name)
{
  if (name == "cityA") {
    return city_a();
  }
  if (name == "cityB") {
    return city_b();
  }
  if (name == "longtail") {
    return long_tail();
  }
  throw ConfigError("unknown world preset: " + std::string(name));
}

std::vector<bool> rasterize_lane_mask(const GridSpec & grid, const LaneElement & element)
{
  grid.validate();
  if (element.polyline.size() < 2) {
    throw DegenerateError("lane polyline needs at least two points");
  }
  if (!(element.width > 0.0)) {
    throw DegenerateError("lane width must be positive");
  }
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < element.polyline.size(); ++i) {
    length += std::hypot(
      element.polyline[i + 1].x - element.polyline[i].x,
      element.polyline[i + 1].y - element.polyline[i].y);
  }
  if (length <= 0.0) {
    throw DegenerateError("lane polyline has zero length");
  }
  const double half = 0.5 * element.width;
  const int h = grid.height();
  const int w = grid.width();
  std::vector<bool> mask(static_cast<std::size_t>(h * w), false);
  bool any = false;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (point_polyline_distance(grid.cell_center(r, c), element.polyline) <= half) {
        mask[static_cast<std::size_t>(grid.index(r, c))] = true;
        any = true;
      }
    }
  }
  if (!any) {
    throw EmptyRegionError("lane element covers no cell center of the grid");
  }
  return mask;
}

Scene generate_scene(std::uint64_t seed, const WorldConfig & config)
{
  config.validate();
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL);
  const GridSpec & grid = config.grid;

  Scene scene;
  scene.seed = seed;
  scene.world_tag = config.name;
  scene.grid = grid;

  // Ego state and path.
  const auto command = static_cast<Command>(categorical(rng, config.command_mix));
  EgoPath path;
  if (command == Command::GoStraight) {
    path.kappa = uniform(rng, -config.straight_curvature_max, config.straight_curvature_max);
    path.s0 = 0.0;
  } else {
    const double k = uniform(rng, config.turn_curvature);
    path.kappa = command == Command::TurnLeft ? k : -k;
    path.s0 = uniform(rng, 0.0, 4.0);
  }
  double v0 = uniform(rng, config.ego_speed);
  if (command != Command::GoStraight) {
    v0 = std::min(v0, std::sqrt(3.0 / std::abs(path.kappa)));
  }
  scene.ego.command = command;
  scene.ego.footprint = BevBox{0.0, 0.0, uniform(rng, 4.4, 4.9), uniform(rng, 1.8, 2.0), 0.0};
  for (int k = 1; k <= kPastSteps; ++k) {
    scene.ego.past.push_back({-v0 * k * kStepSeconds, 0.0});
  }

  // Lanes.
  LaneLayout layout;
  layout.count = std::uniform_int_distribution<int>(config.lanes_min, config.lanes_max)(rng);
  layout.ego_index = std::uniform_int_distribution<int>(0, layout.count - 1)(rng);
  // Width, lateral position and sampling phase vary per scene so that lane
  // geometry (and its prompt) is not repeated verbatim across scenes.
  layout.width = config.lane_width * (1.0 + uniform(rng, -config.lane_width_jitter, config.lane_width_jitter));
  layout.shift = uniform(rng, -config.lane_offset_max, config.lane_offset_max);
  const double phase = uniform(rng, 0.0, 1.0);
  auto offset_curve = [&](double d) {
    std::vector<Point> pts;
    for (double s = -40.0 - phase; s <= 60.0; s += 1.0) {
      pts.push_back(path.offset(s, d));
    }
    return pts;
  };
  const double divider_w = std::max(0.3, grid.resolution);
  const double boundary_w = std::max(0.5, grid.resolution);
  std::vector<std::pair<LaneKind, std::vector<Point>>> raw;
  raw.emplace_back(LaneKind::Boundary, offset_curve(layout.right_edge()));
  for (int i = 0; i + 1 < layout.count; ++i) {
    raw.emplace_back(LaneKind::Divider, offset_curve(layout.center(i) + 0.5 * layout.width));
  }
  raw.emplace_back(LaneKind::Boundary, offset_curve(layout.left_edge()));
  for (auto & [kind, pts] : raw) {
    const double width = kind == LaneKind::Boundary ? boundary_w : divider_w;
    if (auto e = make_polyline_element(grid, kind, width, pts)) {
      scene.lanes.push_back(std::move(*e));
    }
  }
  if (uniform(rng, 0.0, 1.0) < config.crossing_prob) {
    const double sc = uniform(rng, 8.0, 22.0);
    std::vector<Point> pts;
    for (double d = layout.right_edge() - 1.0; d <= layout.left_edge() + 1.0 + 1e-9; d += 1.0) {
      pts.push_back(path.offset(sc, d));
    }
    if (auto e = make_polyline_element(grid, LaneKind::Crossing, 3.0, pts)) {
      scene.lanes.push_back(std::move(*e));
    }
  }

  // Agents. Classes are drawn first; an agent that cannot be placed, or that
  // would collide with the reference plan, is re-placed with the same class
  // so that empirical class frequencies follow the config.
  const int count = std::uniform_int_distribution<int>(config.agents_min, config.agents_max)(rng);
  BevBox ego_keepout = scene.ego.footprint;
  ego_keepout.length += 2.0;
  ego_keepout.width += 1.0;
  std::vector<AgentClass> classes;
  for (int n = 0; n < count; ++n) {
    classes.push_back(static_cast<AgentClass>(categorical(rng, config.class_freq)));
  }
  std::vector<Placed> placed;
  auto sample_candidate = [&](AgentClass cls) -> std::optional<Placed> {
    const auto & traits = kTraits[static_cast<std::size_t>(cls)];
    Placed p;
    p.record.label = cls;
    const double length = uniform(rng, traits.length);
    const double width = uniform(rng, traits.width);
    const double speed = uniform(rng, traits.speed) * config.agent_speed_scale;
    const double s = uniform(rng, -20.0, 40.0);
    double heading = path.heading(s);
    double yaw_rate = 0.0;
    Point center;
    if (traits.placement == Placement::Lane) {
      const int lane = std::uniform_int_distribution<int>(0, layout.count - 1)(rng);
      const double d = layout.center(lane);
      center = path.offset(s, d);
      const double k_off = path.curvature(s) / (1.0 - path.curvature(s) * d);
      p.lane = lane;
      p.oncoming = lane > layout.ego_index && uniform(rng, 0.0, 1.0) < 0.5;
      heading += uniform(rng, -0.05, 0.05);
      if (p.oncoming) {
        heading += std::numbers::pi;
        yaw_rate = -k_off * speed;
      } else {
        yaw_rate = k_off * speed;
      }
    } else {
      const bool left = uniform(rng, 0.0, 1.0) < 0.5;
      const double d = left ? layout.left_edge() + uniform(rng, 1.0, 3.5)
                            : layout.right_edge() - uniform(rng, 1.0, 3.5);
      center = path.offset(s, d);
      if (cls == AgentClass::Pedestrian) {
        heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
      }
    }
    p.s = s;
    p.speed = speed;
    const double yaw = wrap_angle(heading);
    p.record.bev_box = BevBox{center.x, center.y, length, width, yaw};
    if (!box_inside(grid, p.record.bev_box) || boxes_intersect(p.record.bev_box, ego_keepout)) {
      return std::nullopt;
    }
    for (const auto & other : placed) {
      if (boxes_intersect(p.record.bev_box, other.record.bev_box)) {
        return std::nullopt;
      }
    }
    p.record.velocity = {speed * std::cos(yaw), speed * std::sin(yaw)};
    p.record.future_traj = constant_turn_future(center, yaw, speed, yaw_rate);
    return p;
  };
  std::vector<AgentClass> pending;
  for (const AgentClass cls : classes) {
    std::optional<Placed> p;
    for (int attempt = 0; attempt < 40 && !p; ++attempt) {
      p = sample_candidate(cls);
    }
    if (p) {
      placed.push_back(std::move(*p));
    } else {
      pending.push_back(cls);
    }
  }

  std::vector<double> arcs;
  auto hits_plan = [&](const Placed & p) {
    for (int t = 0; t < kPlanSteps; ++t) {
      const Point e = scene.ego.gt_plan[static_cast<std::size_t>(t)];
      const BevBox ego_t{
        e.x, e.y, scene.ego.footprint.length, scene.ego.footprint.width,
        path.heading(arcs[static_cast<std::size_t>(t)])};
      BevBox agent_t = p.record.bev_box;
      agent_t.cx = p.record.future_traj[static_cast<std::size_t>(t)].x;
      agent_t.cy = p.record.future_traj[static_cast<std::size_t>(t)].y;
      if (boxes_intersect(ego_t, agent_t)) {
        return true;
      }
    }
    return false;
  };
  // The reference plan must itself be collision-free against GT futures.
  // Terminates: every repeat removes at least one agent.
  while (true) {
    arcs.clear();
    scene.ego.gt_plan = plan_ego(path, v0, scene.ego.footprint, placed, layout.ego_index, &arcs);
    std::vector<Placed> kept;
    for (auto & p : placed) {
      if (hits_plan(p)) {
        pending.push_back(p.record.label);
      } else {
        kept.push_back(std::move(p));
      }
    }
    const bool removed = kept.size() != placed.size();
    placed = std::move(kept);
    if (!removed) {
      break;
    }
  }
  // Re-placed agents must neither collide with nor change the plan.
  for (const AgentClass cls : pending) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      auto p = sample_candidate(cls);
      if (!p || hits_plan(*p)) {
        continue;
      }
      placed.push_back(std::move(*p));
      if (plan_ego(path, v0, scene.ego.footprint, placed, layout.ego_index, nullptr) == scene.ego.gt_plan) {
        break;
      }
      placed.pop_back();
    }
  }

  int next_id = 0;
  for (auto & p : placed) {
    p.record.id = next_id++;
    scene.agents.push_back(std::move(p.record));
  }
  return scene;
}

std::vector<Scene> make_dataset(const WorldConfig & config, int n, std::uint64_t seed0)
{
  if (n <= 0) {
    throw ArgumentError("dataset size must be positive");
  }
  std::vector<Scene> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(generate_scene(seed0 + static_cast<std::uint64_t>(i), config));
  }
  return out;
}

}  // namespace vlp
