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

// vlp._core: Python bindings for scene generation, prompts, text encoders,
// metrics, the contrastive loss and the experiment harness. JSON documents
// cross the boundary as Python dicts.

#include "vlp/contrastive.hpp"
#include "vlp/errors.hpp"
#include "vlp/harness.hpp"
#include "vlp/metrics.hpp"
#include "vlp/model.hpp"
#include "vlp/prompt.hpp"
#include "vlp/scene.hpp"
#include "vlp/text_encoder.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace
{

/// Round-trips through the json module so dicts keep Python-native types.
py::object to_py(const nlohmann::json & j)
{
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle & obj)
{
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::vector<vlp::Point> points(const Eigen::MatrixX2d & m)
{
  std::vector<vlp::Point> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back({m(i, 0), m(i, 1)});
  }
  return out;
}

vlp::L2Convention convention(const std::string & name)
{
  if (name == "at-horizon") {
    return vlp::L2Convention::AtHorizon;
  }
  if (name == "averaged") {
    return vlp::L2Convention::Averaged;
  }
  throw vlp::ArgumentError("unknown L2 convention '" + name + "' (at-horizon|averaged)");
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Toy language-supervised planner";
  m.attr("RESULT_SCHEMA_VERSION") = vlp::kResultSchemaVersion;
  m.attr("SCENE_SCHEMA_VERSION") = vlp::kSceneSchemaVersion;

  auto base = py::register_exception<vlp::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<vlp::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<vlp::ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<vlp::DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<vlp::PairingError>(m, "PairingError", base.ptr());
  py::register_exception<vlp::ProtocolError>(m, "ProtocolError", base.ptr());
  py::register_exception<vlp::SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<vlp::BackendError>(m, "BackendError", base.ptr());

  py::class_<vlp::ExperimentConfig>(m, "ExperimentConfig")
    .def(py::init<>())
    .def_static("from_ini", &vlp::ExperimentConfig::from_ini, py::arg("text"))
    .def_static("load", &vlp::ExperimentConfig::load, py::arg("path"))
    .def("to_ini", &vlp::ExperimentConfig::to_ini)
    .def("validate", &vlp::ExperimentConfig::validate)
    .def("hash_hex", &vlp::ExperimentConfig::hash_hex)
    .def_readwrite("name", &vlp::ExperimentConfig::name)
    .def_property(
      "slp", [](const vlp::ExperimentConfig & c) { return c.vlp.slp; },
      [](vlp::ExperimentConfig & c, bool v) { c.vlp.slp = v; })
    .def_property(
      "alp", [](const vlp::ExperimentConfig & c) { return c.vlp.alp; },
      [](vlp::ExperimentConfig & c, bool v) { c.vlp.alp = v; })
    .def_property(
      "steps", [](const vlp::ExperimentConfig & c) { return c.optim.steps; },
      [](vlp::ExperimentConfig & c, int v) { c.optim.steps = v; })
    .def_property(
      "train_size", [](const vlp::ExperimentConfig & c) { return c.data.train_size; },
      [](vlp::ExperimentConfig & c, int v) { c.data.train_size = v; })
    .def_property(
      "test_size", [](const vlp::ExperimentConfig & c) { return c.data.test_size; },
      [](vlp::ExperimentConfig & c, int v) { c.data.test_size = v; })
    .def_property(
      "train_world", [](const vlp::ExperimentConfig & c) { return c.data.train_world; },
      [](vlp::ExperimentConfig & c, const std::string & v) { c.data.train_world = v; })
    .def_property(
      "test_world", [](const vlp::ExperimentConfig & c) { return c.data.test_world; },
      [](vlp::ExperimentConfig & c, const std::string & v) { c.data.test_world = v; });

  m.def(
    "make_scenes",
    [](const std::string & world, int n, std::uint64_t seed0) {
      py::list out;
      for (const auto & s : vlp::make_dataset(vlp::WorldConfig::preset(world), n, seed0)) {
        out.append(to_py(nlohmann::json(s)));
      }
      return out;
    },
    py::arg("world"), py::arg("n"), py::arg("seed0") = 0, "Synthetic scenes of a world preset, as scene dicts.");

  m.def(
    "world_config", [](const std::string & world) { return to_py(nlohmann::json(vlp::WorldConfig::preset(world))); },
    py::arg("world"));

  m.def(
    "scene_prompts",
    [](const py::dict & scene, const std::string & fields) {
      const vlp::Scene s = from_py(scene).get<vlp::Scene>();
      vlp::VlpConfig cfg;
      cfg.slp = true;
      cfg.alp = true;
      cfg.fields = vlp::FieldMask::parse(fields);
      vlp::EmbeddingCache cache(vlp::make_text_encoder("hash-word", 8));
      const vlp::PreparedScene p = vlp::prepare_scene(s, cfg, &cache);
      py::dict out;
      out["alp"] = p.alp_prompts;
      out["slp"] = p.slp_prompt;
      return out;
    },
    py::arg("scene"), py::arg("fields") = "label,bbox,traj,command",
    "ALP prompts (ego, agents by id, lanes) and the SLP prompt of a scene dict.");

  m.def(
    "encode",
    [](const std::string & encoder, int dim, const std::vector<std::string> & texts) {
      vlp::EmbeddingCache cache(vlp::make_text_encoder(encoder, dim));
      return Eigen::MatrixXd(cache.encode_batch(texts));
    },
    py::arg("encoder"), py::arg("dim"), py::arg("texts"), "Rows are the encodings of texts.");

  m.def(
    "write_embedding_store",
    [](const std::string & path, const std::string & backend, const std::vector<std::string> & texts,
       const Eigen::MatrixXd & embeddings) {
      if (static_cast<std::size_t>(embeddings.rows()) != texts.size()) {
        throw vlp::ArgumentError("one embedding row per text is required");
      }
      std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
      for (std::size_t i = 0; i < texts.size(); ++i) {
        entries.emplace_back(texts[i], embeddings.row(static_cast<Eigen::Index>(i)).transpose());
      }
      vlp::write_embedding_store(path, backend, static_cast<int>(embeddings.cols()), entries);
    },
    py::arg("path"), py::arg("backend"), py::arg("texts"), py::arg("embeddings"),
    "Exports embeddings for the precomputed:<path> encoder.");

  m.def(
    "symmetric_ce_loss", [](const Eigen::MatrixXd & s) { return vlp::symmetric_ce_loss(vlp::ag::Var(s)).item(); },
    py::arg("similarity"));

  m.def(
    "l2_error",
    [](const Eigen::MatrixX2d & pred, const Eigen::MatrixX2d & gt, int horizon, const std::string & conv) {
      return vlp::l2_error(points(pred), points(gt), horizon, convention(conv));
    },
    py::arg("pred"), py::arg("gt"), py::arg("horizon_seconds"), py::arg("convention") = "at-horizon");

  m.def(
    "run_one",
    [](const vlp::ExperimentConfig & config, std::uint64_t seed, const std::string & runs_dir, bool reuse,
       const std::vector<std::string> & extra_worlds) {
      vlp::RunOutcome o;
      {
        py::gil_scoped_release release;
        o = vlp::run_one(config, seed, {runs_dir, reuse, false}, extra_worlds);
      }
      py::list cross;
      for (const auto & c : o.cross) {
        cross.append(to_py(c));
      }
      py::dict out;
      out["result"] = to_py(o.result);
      out["cross"] = cross;
      out["diverged"] = o.diverged;
      out["reused"] = o.reused;
      return out;
    },
    py::arg("config"), py::arg("seed") = 0, py::arg("runs_dir") = "runs", py::arg("reuse") = true,
    py::arg("extra_worlds") = std::vector<std::string>{}, "Trains or reuses one run and returns its results.");

  m.def(
    "validate_result", [](const py::dict & result) { vlp::validate_result(from_py(result)); }, py::arg("result"));

  m.def(
    "report",
    [](const std::string & runs_dir, const std::string & out_dir) {
      py::gil_scoped_release release;
      return vlp::report(runs_dir, out_dir);
    },
    py::arg("runs_dir"), py::arg("out_dir"));
}
