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

#include "vlp/metrics.hpp"

#include "vlp/errors.hpp"

#include <cmath>
#include <limits>

namespace vlp
{

namespace
{

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

double l2_error(std::span<const Point> pred, std::span<const Point> gt, int horizon_seconds, L2Convention convention)
{
  if (pred.size() != gt.size() || pred.size() != static_cast<std::size_t>(kPlanSteps)) {
    throw ArgumentError("l2_error needs two trajectories of six waypoints");
  }
  if (horizon_seconds < 1 || horizon_seconds > kHorizons) {
    throw ArgumentError("horizon must be 1, 2 or 3 seconds");
  }
  const auto last = static_cast<std::size_t>(2 * horizon_seconds - 1);
  if (convention == L2Convention::AtHorizon) {
    return dist(pred[last], gt[last]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i <= last; ++i) {
    sum += dist(pred[i], gt[i]);
  }
  return sum / static_cast<double>(last + 1);
}

std::array<double, kPlanSteps> plan_headings(std::span<const Point> plan, double initial_yaw)
{
  if (plan.size() != static_cast<std::size_t>(kPlanSteps)) {
    throw ArgumentError("plan must have six waypoints");
  }
  std::array<double, kPlanSteps> out{};
  double previous = initial_yaw;
  for (std::size_t t = 0; t < plan.size(); ++t) {
    if (t + 1 < plan.size()) {
      const double dx = plan[t + 1].x - plan[t].x;
      const double dy = plan[t + 1].y - plan[t].y;
      if (std::hypot(dx, dy) > 1e-9) {
        previous = std::atan2(dy, dx);
      }
    }
    out[t] = previous;
  }
  return out;
}

CollisionFlags collision_flags(
  std::span<const Point> plan, const BevBox & ego_footprint, std::span<const AgentRecord> agents)
{
  require_valid_box(ego_footprint, "ego footprint");
  const auto headings = plan_headings(plan, ego_footprint.yaw);
  CollisionFlags flags;
  for (const auto & a : agents) {
    if (a.future_traj.size() < plan.size()) {
      throw ArgumentError("agent future is shorter than the plan");
    }
  }
  for (std::size_t t = 0; t < plan.size(); ++t) {
    const BevBox ego{plan[t].x, plan[t].y, ego_footprint.length, ego_footprint.width, headings[t]};
    for (const auto & a : agents) {
      BevBox box = a.bev_box;
      box.cx = a.future_traj[t].x;
      box.cy = a.future_traj[t].y;
      if (boxes_intersect(ego, box)) {
        flags.step[t] = true;
        break;
      }
    }
  }
  for (int k = 0; k < kHorizons; ++k) {
    for (int t = 0; t < 2 * (k + 1); ++t) {
      flags.horizon[static_cast<std::size_t>(k)] =
        flags.horizon[static_cast<std::size_t>(k)] || flags.step[static_cast<std::size_t>(t)];
    }
  }
  return flags;
}

void PlanEvalAccumulator::add(std::span<const Point> plan, const Scene & scene)
{
  const auto flags = collision_flags(plan, scene.ego.footprint, scene.agents);
  for (int k = 0; k < kHorizons; ++k) {
    l2_sum_[static_cast<std::size_t>(k)] += l2_error(plan, scene.ego.gt_plan, k + 1, convention_);
    col_count_[static_cast<std::size_t>(k)] += flags.horizon[static_cast<std::size_t>(k)] ? 1 : 0;
  }
  ++samples_;
}

PlanEval PlanEvalAccumulator::result() const
{
  PlanEval e;
  e.samples = samples_;
  if (samples_ == 0) {
    return e;
  }
  for (std::size_t k = 0; k < kHorizons; ++k) {
    e.l2[k] = l2_sum_[k] / samples_;
    e.col[k] = 100.0 * col_count_[k] / samples_;
  }
  e.l2_avg = (e.l2[0] + e.l2[1] + e.l2[2]) / 3.0;
  e.col_avg = (e.col[0] + e.col[1] + e.col[2]) / 3.0;
  return e;
}

ForecastEval forecast_metrics(
  const std::vector<std::vector<std::vector<Point>>> & modes, const std::vector<std::vector<Point>> & gts,
  double miss_threshold)
{
  if (modes.size() != gts.size()) {
    throw ArgumentError("one mode set per ground-truth trajectory required");
  }
  ForecastEval e;
  if (gts.empty()) {
    e.vacuous = true;
    return e;
  }
  int misses = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (modes[i].empty() || gts[i].empty()) {
      throw ArgumentError("forecast needs at least one mode and one waypoint");
    }
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (const auto & m : modes[i]) {
      if (m.size() != gts[i].size()) {
        throw ArgumentError("forecast mode length differs from ground truth");
      }
      double sum = 0.0;
      for (std::size_t t = 0; t < m.size(); ++t) {
        sum += dist(m[t], gts[i][t]);
      }
      best_ade = std::min(best_ade, sum / static_cast<double>(m.size()));
      best_fde = std::min(best_fde, dist(m.back(), gts[i].back()));
    }
    e.min_ade += best_ade;
    e.min_fde += best_fde;
    misses += best_fde > miss_threshold ? 1 : 0;
  }
  const auto n = static_cast<double>(gts.size());
  e.min_ade /= n;
  e.min_fde /= n;
  e.miss_rate = misses / n;
  e.agents = static_cast<int>(gts.size());
  return e;
}

}  // namespace vlp
