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

#include "vlp/errors.hpp"
#include "vlp/scene.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace vlp
{

using nlohmann::json;

namespace
{

json points_to_json(const std::vector<Point> & pts)
{
  json arr = json::array();
  for (const auto & p : pts) {
    arr.push_back({p.x, p.y});
  }
  return arr;
}

std::vector<Point> points_from_json(const json & j)
{
  std::vector<Point> pts;
  for (const auto & p : j) {
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return pts;
}

json box_to_json(const BevBox & b)
{
  return {{"cx", b.cx}, {"cy", b.cy}, {"length", b.length}, {"width", b.width}, {"yaw", b.yaw}};
}

BevBox box_from_json(const json & j)
{
  return BevBox{
    j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("length").get<double>(),
    j.at("width").get<double>(), j.at("yaw").get<double>()};
}

json grid_to_json(const GridSpec & g)
{
  return {
    {"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max},
    {"resolution", g.resolution}};
}

GridSpec grid_from_json(const json & j)
{
  GridSpec g;
  g.x_min = j.at("x_min").get<double>();
  g.x_max = j.at("x_max").get<double>();
  g.y_min = j.at("y_min").get<double>();
  g.y_max = j.at("y_max").get<double>();
  g.resolution = j.at("resolution").get<double>();
  return g;
}

}  // namespace

void to_json(json & j, const Scene & scene)
{
  json agents = json::array();
  for (const auto & a : scene.agents) {
    agents.push_back({
      {"id", a.id},
      {"label", std::string(to_string(a.label))},
      {"bev_box", box_to_json(a.bev_box)},
      {"velocity", {a.velocity.x, a.velocity.y}},
      {"future_traj", points_to_json(a.future_traj)},
    });
  }
  json lanes = json::array();
  for (const auto & l : scene.lanes) {
    lanes.push_back({
      {"kind", std::string(to_string(l.kind))},
      {"polyline", points_to_json(l.polyline)},
      {"width", l.width},
    });
  }
  j = json{
    {"schema_version", kSceneSchemaVersion},
    {"seed", scene.seed},
    {"world_tag", scene.world_tag},
    {"grid", grid_to_json(scene.grid)},
    {"ego",
     {
       {"footprint", box_to_json(scene.ego.footprint)},
       {"command", std::string(to_string(scene.ego.command))},
       {"gt_plan", points_to_json(scene.ego.gt_plan)},
       {"past", points_to_json(scene.ego.past)},
     }},
    {"agents", agents},
    {"lanes", lanes},
  };
}

void from_json(const json & j, Scene & scene)
{
  if (!j.contains("schema_version")) {
    throw SchemaError("scene document has no schema_version");
  }
  if (j.at("schema_version").get<int>() != kSceneSchemaVersion) {
    throw SchemaError("unsupported scene schema version");
  }
  scene = Scene{};
  scene.seed = j.at("seed").get<std::uint64_t>();
  scene.world_tag = j.at("world_tag").get<std::string>();
  scene.grid = grid_from_json(j.at("grid"));
  const auto & ego = j.at("ego");
  scene.ego.footprint = box_from_json(ego.at("footprint"));
  scene.ego.command = command_from_string(ego.at("command").get<std::string>());
  scene.ego.gt_plan = points_from_json(ego.at("gt_plan"));
  scene.ego.past = points_from_json(ego.at("past"));
  for (const auto & a : j.at("agents")) {
    AgentRecord r;
    r.id = a.at("id").get<int>();
    r.label = agent_class_from_string(a.at("label").get<std::string>());
    r.bev_box = box_from_json(a.at("bev_box"));
    r.velocity = {a.at("velocity").at(0).get<double>(), a.at("velocity").at(1).get<double>()};
    r.future_traj = points_from_json(a.at("future_traj"));
    scene.agents.push_back(std::move(r));
  }
  for (const auto & l : j.at("lanes")) {
    LaneElement e;
    e.kind = lane_kind_from_string(l.at("kind").get<std::string>());
    e.polyline = points_from_json(l.at("polyline"));
    e.width = l.at("width").get<double>();
    scene.lanes.push_back(std::move(e));
  }
}

void to_json(json & j, const WorldConfig & c)
{
  j = json{
    {"name", c.name},
    {"agents_min", c.agents_min},
    {"agents_max", c.agents_max},
    {"class_freq", c.class_freq},
    {"straight_curvature_max", c.straight_curvature_max},
    {"turn_curvature", {c.turn_curvature.lo, c.turn_curvature.hi}},
    {"lanes_min", c.lanes_min},
    {"lanes_max", c.lanes_max},
    {"lane_width", c.lane_width},
    {"lane_width_jitter", c.lane_width_jitter},
    {"lane_offset_max", c.lane_offset_max},
    {"ego_speed", {c.ego_speed.lo, c.ego_speed.hi}},
    {"agent_speed_scale", c.agent_speed_scale},
    {"command_mix", c.command_mix},
    {"crossing_prob", c.crossing_prob},
    {"grid", grid_to_json(c.grid)},
  };
}

void write_jsonl(const std::string & path, const std::vector<Scene> & scenes)
{
  std::ofstream out(path);
  if (!out) {
    throw ArgumentError("cannot open " + path + " for writing");
  }
  for (const auto & s : scenes) {
    out << json(s).dump() << '\n';
  }
}

std::vector<Scene> read_jsonl(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ArgumentError("cannot open " + path);
  }
  std::vector<Scene> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    scenes.push_back(json::parse(line).get<Scene>());
  }
  return scenes;
}

}  // namespace vlp
