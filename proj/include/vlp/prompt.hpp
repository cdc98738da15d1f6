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

// Ground-truth driving prompts. Each role has one canonical template; the
// field mask removes whole clauses so that ablated prompts stay otherwise
// identical to the full prompt.
//
//   alp-fg   "A {label} at {bbox}, moving to {traj}."
//   alp-ego  "The ego vehicle at {bbox}, will drive to {traj}."
//   alp-lane "A lane {label} along {bbox}."
//   slp-ego  "The ego car should {command}, driving to {traj}."
//
// {bbox} expands to "(x, y), size L by W meters, heading Y rad" for objects,
// "(x, y), size L by W meters" for the ego and "(x, y), (x, y), (x, y) width
// W meters" (first three polyline points) for lanes. {traj} is the list of
// future waypoints. All numbers use two decimals.

#pragma once

#include "vlp/scene.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlp
{

enum class PromptRole : int { AlpEgo = 0, AlpFg, AlpLane, SlpEgo };

std::string_view to_string(PromptRole role);

struct FieldMask
{
  bool label = true;
  bool bbox = true;
  bool traj = true;
  bool command = true;

  static FieldMask all() { return {}; }
  /// Comma separated subset of {label, bbox, traj, command}; "" is the empty
  /// mask.
  static FieldMask parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const FieldMask &, const FieldMask &) = default;
};

/// Ground truth available to a prompt. Which members are needed depends on
/// the role and mask.
struct PromptRecord
{
  std::optional<std::string> label;
  std::optional<BevBox> bbox;
  std::optional<std::vector<Point>> polyline;
  std::optional<double> lane_width;
  std::optional<std::vector<Point>> traj;
  std::optional<Command> command;
};

PromptRecord prompt_record(const AgentRecord & agent);
PromptRecord prompt_record(const LaneElement & lane);
/// Ego record for ALP (footprint + planned trajectory).
PromptRecord alp_ego_record(const EgoRecord & ego);
/// Ego record for SLP (command + planned trajectory).
PromptRecord slp_ego_record(const EgoRecord & ego);

struct PromptTemplate
{
  PromptRole role = PromptRole::AlpFg;
  std::string template_text;
  FieldMask field_mask;

  /// Canonical template for a role with the masked clauses removed.
  static PromptTemplate make(PromptRole role, const FieldMask & mask);
};

/// Renders a prompt. Throws RenderError when the record lacks a field the
/// role and mask require.
std::string render_prompt(PromptRole role, const PromptRecord & record, const FieldMask & mask);

/// Fixed two-decimal formatting with negative zero folded to "0.00".
std::string format_number(double v);

}  // namespace vlp
