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
#include "vlp/model.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace vlp
{

namespace
{

constexpr char kMagic[8] = {'V', 'L', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

void write_store(std::ofstream & out, const nn::ParamStore & store)
{
  for (const auto & [name, v] : store.entries()) {
    out.write(reinterpret_cast<const char *>(v.value().data()),
              static_cast<std::streamsize>(v.value().size() * sizeof(double)));
  }
}

void describe(nlohmann::json & tensors, const nn::ParamStore & store, const char * group)
{
  for (const auto & [name, v] : store.entries()) {
    tensors.push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}, {"group", group}});
  }
}

}  // namespace

void save_checkpoint(const PlannerModel & model, const std::string & path)
{
  nlohmann::json tensors = nlohmann::json::array();
  describe(tensors, model.base_params(), "base");
  if (model.vlp_params() != nullptr) {
    describe(tensors, *model.vlp_params(), "vlp");
  }
  const nlohmann::json header = {
    {"format_version", kFormatVersion},
    {"model", model.config()},
    {"vlp", model.vlp_config()},
    {"seed", model.seed()},
    {"has_vlp", model.has_vlp()},
    {"tensors", tensors},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ArgumentError("cannot write checkpoint " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char *>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_store(out, model.base_params());
  if (model.vlp_params() != nullptr) {
    write_store(out, *model.vlp_params());
  }
  if (!out) {
    throw ArgumentError("failed writing checkpoint " + path);
  }
}

PlannerModel load_checkpoint(const std::string & path, Mode mode)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ArgumentError("cannot open checkpoint " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError(path + " is not a planner checkpoint");
  }
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char *>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), len);
  const auto header = nlohmann::json::parse(text);
  if (header.at("format_version").get<int>() != kFormatVersion) {
    throw SchemaError("unsupported checkpoint format version");
  }
  const auto config = header.at("model").get<ModelConfig>();
  auto vlp = header.at("vlp").get<VlpConfig>();
  if (mode == Mode::Infer) {
    vlp.slp = false;
    vlp.alp = false;
  }
  PlannerModel model(config, vlp, header.at("seed").get<std::uint64_t>());
  for (const auto & t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    ag::Mat values(rows, cols);
    in.read(reinterpret_cast<char *>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) {
      throw SchemaError("checkpoint " + path + " is truncated");
    }
    const bool is_vlp = t.at("group").get<std::string>() == "vlp";
    const nn::ParamStore * store = is_vlp ? model.vlp_params() : &model.base_params();
    if (store == nullptr) {
      continue;  // attachment dropped for inference
    }
    const ag::Var * p = store->find(name);
    if (p == nullptr || p->rows() != rows || p->cols() != cols) {
      throw SchemaError("checkpoint tensor " + name + " does not fit the model");
    }
    ag::Var target = *p;
    target.mutable_value() = std::move(values);
  }
  return model;
}

}  // namespace vlp
