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

#include "vlp/grid.hpp"

#include "vlp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace vlp
{

namespace
{

int exact_count(double span, double resolution, const char * axis)
{
  const double n = span / resolution;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-6) {
    throw ConfigError(std::string("grid ") + axis + " extent is not a multiple of the resolution");
  }
  return static_cast<int>(rounded);
}

}  // namespace

void GridSpec::validate() const
{
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ConfigError("grid extent must be non-empty");
  }
  if (!(resolution > 0.0)) {
    throw ConfigError("grid resolution must be positive");
  }
  exact_count(x_max - x_min, resolution, "x");
  exact_count(y_max - y_min, resolution, "y");
}

int GridSpec::height() const { return exact_count(y_max - y_min, resolution, "y"); }
int GridSpec::width() const { return exact_count(x_max - x_min, resolution, "x"); }

Point GridSpec::cell_center(int row, int col) const
{
  return {x_min + (col + 0.5) * resolution, y_min + (row + 0.5) * resolution};
}

bool GridSpec::contains(Point p) const
{
  return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
}

int GridSpec::nearest_cell(Point p) const
{
  const int col = std::clamp(static_cast<int>(std::floor((p.x - x_min) / resolution)), 0, width() - 1);
  const int row =
    std::clamp(static_cast<int>(std::floor((p.y - y_min) / resolution)), 0, height() - 1);
  return index(row, col);
}

}  // namespace vlp
