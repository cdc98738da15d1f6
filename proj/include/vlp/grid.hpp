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

#include "vlp/geometry.hpp"

namespace vlp
{

/// Metric extent of a BEV grid in the ego frame (x forward, y left).
/// Row index grows with y, column index grows with x.
struct GridSpec
{
  double x_min = -25.6;
  double x_max = 25.6;
  double y_min = -25.6;
  double y_max = 25.6;
  double resolution = 0.8;

  /// Throws ConfigError unless the extent is non-empty and an exact multiple
  /// of the resolution along both axes.
  void validate() const;
  int height() const;
  int width() const;
  int cell_count() const { return height() * width(); }
  int index(int row, int col) const { return row * width() + col; }
  Point cell_center(int row, int col) const;
  bool contains(Point p) const;
  /// Cell whose center is closest to p; p is clamped into the extent first.
  int nearest_cell(Point p) const;

  friend bool operator==(const GridSpec &, const GridSpec &) = default;
};

}  // namespace vlp
