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

#include "vlp/prompt.hpp"

#include "vlp/errors.hpp"
#include "vlp/hash.hpp"

#include <array>
#include <cstdio>
#include <sstream>

namespace vlp
{

namespace
{

std::string point_text(Point p) { return "(" + format_number(p.x) + ", " + format_number(p.y) + ")"; }

std::string points_text(const std::vector<Point> & pts)
{
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += point_text(pts[i]);
  }
  return out;
}

std::string label_text(std::string_view label)
{
  // Class names read better with their noun in prose.
  if (label == "construction") {
    return "construction vehicle";
  }
  return std::string(label);
}

template <typename T>
const T & require(const std::optional<T> & v, PromptRole role, const char * field)
{
  if (!v) {
    throw RenderError(
      std::string("prompt ") + std::string(to_string(role)) + " needs field '" + field + "'");
  }
  return *v;
}

void replace_all(std::string & s, std::string_view key, const std::string & value)
{
  std::size_t pos = 0;
  while ((pos = s.find(key, pos)) != std::string::npos) {
    s.replace(pos, key.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string to_hex(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string_view to_string(PromptRole role)
{
  constexpr std::array<std::string_view, 4> names = {"alp-ego", "alp-fg", "alp-lane", "slp-ego"};
  return names.at(static_cast<std::size_t>(role));
}

FieldMask FieldMask::parse(std::string_view text)
{
  FieldMask m{false, false, false, false};
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) {
      continue;
    }
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    if (item == "label") {
      m.label = true;
    } else if (item == "bbox") {
      m.bbox = true;
    } else if (item == "traj") {
      m.traj = true;
    } else if (item == "command") {
      m.command = true;
    } else {
      throw ConfigError("unknown prompt field: " + item);
    }
  }
  return m;
}

std::string FieldMask::to_string() const
{
  std::string out;
  auto add = [&](bool on, const char * name) {
    if (on) {
      out += out.empty() ? "" : ",";
      out += name;
    }
  };
  add(label, "label");
  add(bbox, "bbox");
  add(traj, "traj");
  add(command, "command");
  return out;
}

std::string format_number(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") {
    s = "0.00";
  }
  return s;
}

PromptRecord prompt_record(const AgentRecord & agent)
{
  PromptRecord r;
  r.label = std::string(to_string(agent.label));
  r.bbox = agent.bev_box;
  r.traj = agent.future_traj;
  return r;
}

PromptRecord prompt_record(const LaneElement & lane)
{
  PromptRecord r;
  r.label = std::string(to_string(lane.kind));
  r.polyline = lane.polyline;
  r.lane_width = lane.width;
  return r;
}

PromptRecord alp_ego_record(const EgoRecord & ego)
{
  PromptRecord r;
  r.bbox = ego.footprint;
  r.traj = ego.gt_plan;
  return r;
}

PromptRecord slp_ego_record(const EgoRecord & ego)
{
  PromptRecord r;
  r.command = ego.command;
  r.traj = ego.gt_plan;
  return r;
}

PromptTemplate PromptTemplate::make(PromptRole role, const FieldMask & mask)
{
  std::string t;
  FieldMask used{false, false, false, false};
  switch (role) {
    case PromptRole::AlpFg:
      t = mask.label ? "A {label}" : "An agent";
      if (mask.bbox) {
        t += " at {bbox}";
      }
      if (mask.traj) {
        t += mask.bbox ? ", moving to {traj}" : " moving to {traj}";
      }
      used = {mask.label, mask.bbox, mask.traj, false};
      break;
    case PromptRole::AlpEgo:
      t = "The ego vehicle";
      if (mask.bbox) {
        t += " at {bbox}";
      }
      if (mask.traj) {
        t += mask.bbox ? ", will drive to {traj}" : " will drive to {traj}";
      }
      used = {false, mask.bbox, mask.traj, false};
      break;
    case PromptRole::AlpLane:
      t = mask.label ? "A lane {label}" : "A lane";
      if (mask.bbox) {
        t += " along {bbox}";
      }
      used = {mask.label, mask.bbox, false, false};
      break;
    case PromptRole::SlpEgo:
      t = "The ego car";
      if (mask.command) {
        t += " should {command}";
      }
      if (mask.traj) {
        t += mask.command ? ", driving to {traj}" : " driving to {traj}";
      }
      used = {false, false, mask.traj, mask.command};
      break;
  }
  t += ".";
  return PromptTemplate{role, std::move(t), used};
}

std::string render_prompt(PromptRole role, const PromptRecord & record, const FieldMask & mask)
{
  const PromptTemplate tmpl = PromptTemplate::make(role, mask);
  std::string out = tmpl.template_text;
  const FieldMask & used = tmpl.field_mask;
  if (used.label) {
    replace_all(out, "{label}", label_text(require(record.label, role, "label")));
  }
  if (used.bbox) {
    std::string bbox;
    if (role == PromptRole::AlpLane) {
      const auto & poly = require(record.polyline, role, "bbox");
      const double width = require(record.lane_width, role, "bbox");
      const std::vector<Point> head(poly.begin(), poly.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, poly.size())));
      bbox = points_text(head) + " width " + format_number(width) + " meters";
    } else {
      const auto & b = require(record.bbox, role, "bbox");
      bbox = point_text({b.cx, b.cy}) + ", size " + format_number(b.length) + " by " +
             format_number(b.width) + " meters";
      if (role == PromptRole::AlpFg) {
        bbox += ", heading " + format_number(b.yaw) + " rad";
      }
    }
    replace_all(out, "{bbox}", bbox);
  }
  if (used.traj) {
    replace_all(out, "{traj}", points_text(require(record.traj, role, "traj")));
  }
  if (used.command) {
    replace_all(out, "{command}", std::string(to_string(require(record.command, role, "command"))));
  }
  return out;
}

}  // namespace vlp
