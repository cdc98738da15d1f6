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

#include "vlp/geometry.hpp"

#include "vlp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace vlp
{

double wrap_angle(double a)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) {
    r += two_pi;
  }
  r -= std::numbers::pi;
  // fmod rounding can land exactly on +pi
  if (r >= std::numbers::pi) {
    r -= two_pi;
  }
  return r;
}

std::array<Point, 4> box_corners(const BevBox & box)
{
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  auto at = [&](double u, double v) {
    return Point{box.cx + u * c - v * s, box.cy + u * s + v * c};
  };
  return {at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)};
}

bool point_in_box(const BevBox & box, Point p)
{
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = p.x - box.cx;
  const double dy = p.y - box.cy;
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  return std::abs(u) <= 0.5 * box.length && std::abs(v) <= 0.5 * box.width;
}

namespace
{

// Projects the corners of a box onto an axis; returns [min, max].
std::pair<double, double> project(const std::array<Point, 4> & corners, double ax, double ay)
{
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto & p : corners) {
    const double d = p.x * ax + p.y * ay;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

}  // namespace

bool boxes_intersect(const BevBox & a, const BevBox & b)
{
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  const double axes[4][2] = {
    {std::cos(a.yaw), std::sin(a.yaw)},
    {-std::sin(a.yaw), std::cos(a.yaw)},
    {std::cos(b.yaw), std::sin(b.yaw)},
    {-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const auto & axis : axes) {
    const auto [a_lo, a_hi] = project(ca, axis[0], axis[1]);
    const auto [b_lo, b_hi] = project(cb, axis[0], axis[1]);
    if (a_hi < b_lo || b_hi < a_lo) {
      return false;
    }
  }
  return true;
}

double point_segment_distance(Point p, Point a, Point b)
{
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  }
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double point_polyline_distance(Point p, std::span<const Point> polyline)
{
  if (polyline.empty()) {
    throw ArgumentError("point_polyline_distance: empty polyline");
  }
  if (polyline.size() == 1) {
    return std::hypot(p.x - polyline[0].x, p.y - polyline[0].y);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    best = std::min(best, point_segment_distance(p, polyline[i], polyline[i + 1]));
  }
  return best;
}

void require_valid_box(const BevBox & box, const char * what)
{
  if (!(box.length > 0.0) || !(box.width > 0.0) || !std::isfinite(box.length) ||
    !std::isfinite(box.width) || !std::isfinite(box.cx) || !std::isfinite(box.cy) ||
    !std::isfinite(box.yaw))
  {
    throw DegenerateError(std::string(what) + ": box needs positive finite length and width");
  }
}

}  // namespace vlp
