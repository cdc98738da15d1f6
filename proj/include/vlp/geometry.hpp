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

#pragma once

#include <array>
#include <span>

namespace vlp
{

struct Point
{
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point &, const Point &) = default;
};

/// Planar footprint of a 3D box: center, extent along heading (length),
/// extent across heading (width) and heading in radians.
struct BevBox
{
  double cx = 0.0;
  double cy = 0.0;
  double length = 0.0;
  double width = 0.0;
  double yaw = 0.0;

  friend bool operator==(const BevBox &, const BevBox &) = default;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

/// Counter-clockwise corners starting at front-left.
std::array<Point, 4> box_corners(const BevBox & box);

/// True if p lies inside or on the boundary of the rotated rectangle.
bool point_in_box(const BevBox & box, Point p);

/// Separating-axis overlap test between two oriented rectangles. Touching
/// boundaries count as intersecting.
bool boxes_intersect(const BevBox & a, const BevBox & b);

/// Euclidean distance from p to the segment [a, b].
double point_segment_distance(Point p, Point a, Point b);

/// Minimum distance from p to a polyline (>= 1 point).
double point_polyline_distance(Point p, std::span<const Point> polyline);

/// Throws DegenerateError unless length and width are positive and finite.
void require_valid_box(const BevBox & box, const char * what);

}  // namespace vlp
