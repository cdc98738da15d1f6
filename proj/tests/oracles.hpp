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

// Brute-force geometry oracles shared by the unit and acceptance tests.

#pragma once

#include "vlp/geometry.hpp"
#include "vlp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace vlp::testing
{

/// Cells whose center lies inside the box, by scanning the whole grid.
inline std::vector<int> brute_force_cells(const GridSpec & g, const BevBox & b)
{
  std::vector<int> out;
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      if (point_in_box(b, g.cell_center(r, c))) {
        out.push_back(g.index(r, c));
      }
    }
  }
  return out;
}

/// Samples a lattice of spacing step over a (boundary included) and reports
/// whether any sample falls inside b; symmetric in a and b.
inline bool sampled_overlap(const BevBox & a, const BevBox & b, double step = 0.1)
{
  const auto one_way = [step](const BevBox & from, const BevBox & to) {
    const int nl = std::max(1, static_cast<int>(std::ceil(from.length / step)));
    const int nw = std::max(1, static_cast<int>(std::ceil(from.width / step)));
    const double c = std::cos(from.yaw), s = std::sin(from.yaw);
    for (int i = 0; i <= nl; ++i) {
      const double u = -0.5 * from.length + from.length * i / nl;
      for (int j = 0; j <= nw; ++j) {
        const double v = -0.5 * from.width + from.width * j / nw;
        if (point_in_box(to, {from.cx + c * u - s * v, from.cy + s * u + c * v})) {
          return true;
        }
      }
    }
    return false;
  };
  return one_way(a, b) || one_way(b, a);
}

/// Distance between two separated rectangles, or minus the smallest
/// separating-axis penetration when they overlap.
inline double boundary_gap(const BevBox & a, const BevBox & b)
{
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  if (!boxes_intersect(a, b)) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        d = std::min(d, point_segment_distance(ca[static_cast<std::size_t>(i)], cb[static_cast<std::size_t>(j)], cb[static_cast<std::size_t>((j + 1) % 4)]));
        d = std::min(d, point_segment_distance(cb[static_cast<std::size_t>(i)], ca[static_cast<std::size_t>(j)], ca[static_cast<std::size_t>((j + 1) % 4)]));
      }
    }
    return d;
  }
  double depth = std::numeric_limits<double>::infinity();
  for (double yaw : {a.yaw, a.yaw + M_PI / 2, b.yaw, b.yaw + M_PI / 2}) {
    const double ax = std::cos(yaw), ay = std::sin(yaw);
    double lo_a = 1e300, hi_a = -1e300, lo_b = 1e300, hi_b = -1e300;
    for (int i = 0; i < 4; ++i) {
      const double pa = ca[static_cast<std::size_t>(i)].x * ax + ca[static_cast<std::size_t>(i)].y * ay;
      const double pb = cb[static_cast<std::size_t>(i)].x * ax + cb[static_cast<std::size_t>(i)].y * ay;
      lo_a = std::min(lo_a, pa);
      hi_a = std::max(hi_a, pa);
      lo_b = std::min(lo_b, pb);
      hi_b = std::max(hi_b, pb);
    }
    depth = std::min(depth, std::min(hi_a, hi_b) - std::max(lo_a, lo_b));
  }
  return -depth;
}

}  // namespace vlp::testing
