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

// Open-loop planning metrics (per-horizon L2, footprint collision) and
// forecasting metrics (minADE, minFDE, miss rate).

#pragma once

#include "vlp/geometry.hpp"
#include "vlp/scene.hpp"

#include <array>
#include <span>
#include <vector>

namespace vlp
{

inline constexpr int kHorizons = 3;  // 1 s, 2 s, 3 s

enum class L2Convention {
  AtHorizon,  // displacement of the waypoint at the horizon
  Averaged,   // mean displacement over waypoints up to the horizon
};

/// L2 error at horizon_seconds (1, 2 or 3); waypoint 2k (1-based) is the
/// k-second waypoint. Throws ArgumentError on shape mismatch or a bad horizon.
double l2_error(
  std::span<const Point> pred, std::span<const Point> gt, int horizon_seconds,
  L2Convention convention = L2Convention::AtHorizon);

struct CollisionFlags
{
  std::array<bool, kPlanSteps> step{};
  std::array<bool, kHorizons> horizon{};  // any step up to the horizon
};

/// Ego footprint placed at plan[t] with heading along plan[t] -> plan[t+1]
/// (the last step reuses the previous heading; a zero-length chord keeps the
/// previous heading, starting from the footprint yaw) against every agent box
/// translated to its ground-truth position at t. Throws DegenerateError for
/// a degenerate footprint and ArgumentError when an agent future is shorter
/// than the plan.
CollisionFlags collision_flags(
  std::span<const Point> plan, const BevBox & ego_footprint, std::span<const AgentRecord> agents);

/// Headings used for the ego footprint at each plan step.
std::array<double, kPlanSteps> plan_headings(std::span<const Point> plan, double initial_yaw);

struct PlanEval
{
  std::array<double, kHorizons> l2{};   // meters
  double l2_avg = 0.0;
  std::array<double, kHorizons> col{};  // percent of samples
  double col_avg = 0.0;
  int samples = 0;
};

/// Running averages over samples.
class PlanEvalAccumulator
{
public:
  explicit PlanEvalAccumulator(L2Convention convention = L2Convention::AtHorizon) : convention_(convention) {}
  void add(std::span<const Point> plan, const Scene & scene);
  PlanEval result() const;

private:
  L2Convention convention_;
  std::array<double, kHorizons> l2_sum_{};
  std::array<int, kHorizons> col_count_{};
  int samples_ = 0;
};

struct ForecastEval
{
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  int agents = 0;
  bool vacuous = false;  // no agent evaluated
};

/// One mode set per agent: modes[i] holds K >= 1 trajectories of the same
/// length as gts[i]. Empty input yields zeros with vacuous = true.
ForecastEval forecast_metrics(
  const std::vector<std::vector<std::vector<Point>>> & modes, const std::vector<std::vector<Point>> & gts,
  double miss_threshold = 2.0);

}  // namespace vlp
