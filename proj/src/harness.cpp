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

#include "vlp/harness.hpp"

#include "vlp/errors.hpp"
#include "vlp/hash.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#ifndef VLP_SOURCE_DIR
#define VLP_SOURCE_DIR "."
#endif

namespace vlp
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

// ---------------------------------------------------------------------------
// INI

std::string fmt_double(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parse_double(const std::string & key, const std::string & v)
{
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (trim(v.substr(pos)).empty()) {
      return d;
    }
  } catch (const std::exception &) {
  }
  throw ConfigError("config key " + key + ": not a number: '" + v + "'");
}

long long parse_int(const std::string & key, const std::string & v)
{
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (trim(v.substr(pos)).empty()) {
      return d;
    }
  } catch (const std::exception &) {
  }
  throw ConfigError("config key " + key + ": not an integer: '" + v + "'");
}

bool parse_bool(const std::string & key, const std::string & v)
{
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    return false;
  }
  throw ConfigError("config key " + key + ": not a boolean: '" + v + "'");
}

std::string convention_name(L2Convention c) { return c == L2Convention::AtHorizon ? "at-horizon" : "averaged"; }

L2Convention parse_convention(const std::string & v)
{
  if (v == "at-horizon") {
    return L2Convention::AtHorizon;
  }
  if (v == "averaged") {
    return L2Convention::Averaged;
  }
  throw ConfigError("eval.l2_convention must be at-horizon or averaged, got '" + v + "'");
}

// One setter per accepted key; unknown keys are errors so typos never pass
// silently.
using Setter = std::function<void(ExperimentConfig &, const std::string &, const std::string &)>;

const std::map<std::string, Setter> & setters()
{
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [&](const std::string & k, auto field) {
      t[k] = [field](ExperimentConfig & c, const std::string & key, const std::string & v) {
        field(c) = parse_double(key, v);
      };
    };
    auto integer = [&](const std::string & k, auto field) {
      t[k] = [field](ExperimentConfig & c, const std::string & key, const std::string & v) {
        field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(parse_int(key, v));
      };
    };
    auto boolean = [&](const std::string & k, auto field) {
      t[k] = [field](ExperimentConfig & c, const std::string & key, const std::string & v) {
        field(c) = parse_bool(key, v);
      };
    };
    auto str = [&](const std::string & k, auto field) {
      t[k] = [field](ExperimentConfig & c, const std::string &, const std::string & v) { field(c) = v; };
    };
    str("experiment.name", [](ExperimentConfig & c) -> std::string & { return c.name; });
    integer("model.channels", [](ExperimentConfig & c) -> int & { return c.model.channels; });
    integer("model.agent_queries", [](ExperimentConfig & c) -> int & { return c.model.agent_queries; });
    integer("model.lane_queries", [](ExperimentConfig & c) -> int & { return c.model.lane_queries; });
    integer("model.decoder_layers", [](ExperimentConfig & c) -> int & { return c.model.decoder_layers; });
    dbl("model.x_min", [](ExperimentConfig & c) -> double & { return c.model.grid.x_min; });
    dbl("model.x_max", [](ExperimentConfig & c) -> double & { return c.model.grid.x_max; });
    dbl("model.y_min", [](ExperimentConfig & c) -> double & { return c.model.grid.y_min; });
    dbl("model.y_max", [](ExperimentConfig & c) -> double & { return c.model.grid.y_max; });
    dbl("model.resolution", [](ExperimentConfig & c) -> double & { return c.model.grid.resolution; });
    str("data.train_world", [](ExperimentConfig & c) -> std::string & { return c.data.train_world; });
    str("data.test_world", [](ExperimentConfig & c) -> std::string & { return c.data.test_world; });
    integer("data.train_size", [](ExperimentConfig & c) -> int & { return c.data.train_size; });
    integer("data.test_size", [](ExperimentConfig & c) -> int & { return c.data.test_size; });
    integer("data.train_seed0", [](ExperimentConfig & c) -> std::uint64_t & { return c.data.train_seed0; });
    integer("data.test_seed0", [](ExperimentConfig & c) -> std::uint64_t & { return c.data.test_seed0; });
    boolean("vlp.slp", [](ExperimentConfig & c) -> bool & { return c.vlp.slp; });
    boolean("vlp.alp", [](ExperimentConfig & c) -> bool & { return c.vlp.alp; });
    str("vlp.encoder", [](ExperimentConfig & c) -> std::string & { return c.vlp.encoder; });
    integer("vlp.text_dim", [](ExperimentConfig & c) -> int & { return c.vlp.text_dim; });
    t["vlp.fields"] = [](ExperimentConfig & c, const std::string &, const std::string & v) {
      c.vlp.fields = FieldMask::parse(v);
    };
    dbl("vlp.w_enc", [](ExperimentConfig & c) -> double & { return c.vlp.w_enc; });
    dbl("vlp.w_dec", [](ExperimentConfig & c) -> double & { return c.vlp.w_dec; });
    boolean("vlp.detach_alp", [](ExperimentConfig & c) -> bool & { return c.vlp.detach_alp; });
    integer("optim.steps", [](ExperimentConfig & c) -> int & { return c.optim.steps; });
    integer("optim.batch_size", [](ExperimentConfig & c) -> int & { return c.optim.batch_size; });
    dbl("optim.lr", [](ExperimentConfig & c) -> double & { return c.optim.adamw.lr; });
    dbl("optim.beta1", [](ExperimentConfig & c) -> double & { return c.optim.adamw.beta1; });
    dbl("optim.beta2", [](ExperimentConfig & c) -> double & { return c.optim.adamw.beta2; });
    dbl("optim.eps", [](ExperimentConfig & c) -> double & { return c.optim.adamw.eps; });
    dbl("optim.weight_decay", [](ExperimentConfig & c) -> double & { return c.optim.adamw.weight_decay; });
    dbl("optim.clip_norm", [](ExperimentConfig & c) -> double & { return c.optim.adamw.clip_norm; });
    t["eval.l2_convention"] = [](ExperimentConfig & c, const std::string &, const std::string & v) {
      c.eval.l2 = parse_convention(v);
    };
    dbl("eval.miss_threshold", [](ExperimentConfig & c) -> double & { return c.eval.miss_threshold; });
    dbl("eval.match_radius", [](ExperimentConfig & c) -> double & { return c.eval.match_radius; });
    dbl("eval.rare_mass", [](ExperimentConfig & c) -> double & { return c.eval.rare_mass; });
    integer("eval.batch_size", [](ExperimentConfig & c) -> int & { return c.eval.batch_size; });
    return t;
  }();
  return table;
}

// Fields that shape the trained weights. Worlds are hashed by their full
// parameter set, so editing a preset invalidates cached runs.
json hashed_view(const ExperimentConfig & c)
{
  json j;
  j["model"] = c.model;
  j["vlp"] = c.vlp;
  j["train_world"] = c.world(c.data.train_world);
  j["train_size"] = c.data.train_size;
  j["train_seed0"] = c.data.train_seed0;
  j["steps"] = c.optim.steps;
  j["batch_size"] = c.optim.batch_size;
  const auto & a = c.optim.adamw;
  j["adamw"] = {a.lr, a.beta1, a.beta2, a.eps, a.weight_decay, a.clip_norm};
  return j;
}

// ---------------------------------------------------------------------------
// Result helpers

json horizons_json(const std::array<double, kHorizons> & v, double avg)
{
  return json{{"1s", v[0]}, {"2s", v[1]}, {"3s", v[2]}, {"avg", avg}};
}

json forecast_json(const ForecastEval & f)
{
  return json{
    {"min_ade", f.min_ade}, {"min_fde", f.min_fde}, {"miss_rate", f.miss_rate}, {"agents", f.agents},
    {"vacuous", f.vacuous}};
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string git_revision()
{
  if (const char * env = std::getenv("VLP_GIT_REVISION")) {
    return env;
  }
  const std::string cmd = std::string("git -C \"") + VLP_SOURCE_DIR + "\" rev-parse --short HEAD 2>/dev/null";
  std::string out;
  if (FILE * p = popen(cmd.c_str(), "r")) {
    char buf[128];
    while (std::fgets(buf, sizeof(buf), p) != nullptr) {
      out += buf;
    }
    pclose(p);
  }
  out = trim(out);
  return out.empty() ? "unknown" : out;
}

void write_text(const std::string & path, const std::string & text)
{
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) {
      throw ArgumentError("cannot write " + path);
    }
    f << text;
  }
  fs::rename(tmp, path);
}

std::string read_text(const std::string & path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw ArgumentError("cannot read " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string losses_csv(const std::vector<LossRecord> & history)
{
  std::ostringstream os;
  os << "step,total,l_perc,l_pred,l_plan,l_slp,l_alp,grad_norm\n";
  os << std::setprecision(17);
  for (const auto & r : history) {
    os << r.step << ',' << r.total << ',' << r.l_perc << ',' << r.l_pred << ',' << r.l_plan << ',' << r.l_slp
       << ',' << r.l_alp << ',' << r.grad_norm << '\n';
  }
  return os.str();
}

std::vector<LossRecord> read_losses_csv(const std::string & path)
{
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      continue;
    }
    LossRecord r;
    char c = 0;
    std::istringstream ls(line);
    ls >> r.step >> c >> r.total >> c >> r.l_perc >> c >> r.l_pred >> c >> r.l_plan >> c >> r.l_slp >> c >>
      r.l_alp >> c >> r.grad_norm;
    if (!ls) {
      throw SchemaError("malformed losses row in " + path + ": " + line);
    }
    out.push_back(r);
  }
  return out;
}

std::string world_suffix(const std::string & world) { return "result_" + world + ".json"; }

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_ini(const std::string & text)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error & e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  const auto & table = setters();
  for (const auto & [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("config key outside a section: " + section);
    }
    for (const auto & [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) {
        throw ConfigError("unknown config key: " + full);
      }
      it->second(c, full, trim(value.data()));
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string & path)
{
  std::ifstream f(path);
  if (!f) {
    throw ConfigError("cannot open config " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_ini(ss.str());
}

std::string ExperimentConfig::to_ini() const
{
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[experiment]\nname = " << name << "\n\n";
  os << "[model]\nchannels = " << model.channels << "\nagent_queries = " << model.agent_queries
     << "\nlane_queries = " << model.lane_queries << "\ndecoder_layers = " << model.decoder_layers
     << "\nx_min = " << fmt_double(model.grid.x_min) << "\nx_max = " << fmt_double(model.grid.x_max)
     << "\ny_min = " << fmt_double(model.grid.y_min) << "\ny_max = " << fmt_double(model.grid.y_max)
     << "\nresolution = " << fmt_double(model.grid.resolution) << "\n\n";
  os << "[data]\ntrain_world = " << data.train_world << "\ntest_world = " << data.test_world
     << "\ntrain_size = " << data.train_size << "\ntest_size = " << data.test_size
     << "\ntrain_seed0 = " << data.train_seed0 << "\ntest_seed0 = " << data.test_seed0 << "\n\n";
  os << "[vlp]\nslp = " << b(vlp.slp) << "\nalp = " << b(vlp.alp) << "\nencoder = " << vlp.encoder
     << "\ntext_dim = " << vlp.text_dim << "\nfields = " << vlp.fields.to_string()
     << "\nw_enc = " << fmt_double(vlp.w_enc) << "\nw_dec = " << fmt_double(vlp.w_dec)
     << "\ndetach_alp = " << b(vlp.detach_alp) << "\n\n";
  const auto & a = optim.adamw;
  os << "[optim]\nsteps = " << optim.steps << "\nbatch_size = " << optim.batch_size << "\nlr = " << fmt_double(a.lr)
     << "\nbeta1 = " << fmt_double(a.beta1) << "\nbeta2 = " << fmt_double(a.beta2) << "\neps = " << fmt_double(a.eps)
     << "\nweight_decay = " << fmt_double(a.weight_decay) << "\nclip_norm = " << fmt_double(a.clip_norm) << "\n\n";
  os << "[eval]\nl2_convention = " << convention_name(eval.l2) << "\nmiss_threshold = " << fmt_double(eval.miss_threshold)
     << "\nmatch_radius = " << fmt_double(eval.match_radius) << "\nrare_mass = " << fmt_double(eval.rare_mass)
     << "\nbatch_size = " << eval.batch_size << "\n";
  return os.str();
}

void ExperimentConfig::validate() const
{
  model.validate();
  vlp.validate();
  // Presets throw ConfigError for unknown names.
  world(data.train_world).validate();
  world(data.test_world).validate();
  if (data.train_size <= 0 || data.test_size <= 0) {
    throw ConfigError("dataset sizes must be positive");
  }
  const auto stride = static_cast<std::int64_t>(kSeedStride);
  if (data.train_size > stride / 4 || data.test_size > stride / 4) {
    throw ConfigError("dataset sizes must stay below a quarter of the seed stride");
  }
  // Test sets may be enlarged up to 4x (long-tail resampling); keep that range
  // disjoint from the training seeds too.
  const std::uint64_t tr0 = data.train_seed0, tr1 = tr0 + static_cast<std::uint64_t>(data.train_size);
  const std::uint64_t te0 = data.test_seed0, te1 = te0 + 4 * static_cast<std::uint64_t>(data.test_size);
  if (tr0 < te1 && te0 < tr1) {
    throw ConfigError("train and test scene seed ranges overlap");
  }
  if (std::max(tr1, te1) > kSeedStride) {
    throw ConfigError("scene seed ranges must stay below the seed stride");
  }
  if (optim.steps < 0 || optim.batch_size <= 0) {
    throw ConfigError("optim.steps must be >= 0 and optim.batch_size > 0");
  }
  if (!(optim.adamw.lr > 0.0)) {
    throw ConfigError("optim.lr must be positive");
  }
  if (!(eval.miss_threshold > 0.0) || !(eval.match_radius > 0.0) || eval.batch_size <= 0) {
    throw ConfigError("eval thresholds and batch size must be positive");
  }
  if (!(eval.rare_mass > 0.0 && eval.rare_mass < 1.0)) {
    throw ConfigError("eval.rare_mass must lie in (0, 1)");
  }
}

std::uint64_t ExperimentConfig::content_hash() const { return fnv1a64(hashed_view(*this).dump()); }

WorldConfig ExperimentConfig::world(const std::string & world_name) const
{
  WorldConfig w = WorldConfig::preset(world_name);
  w.grid = model.grid;
  return w;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate_model(const PlannerModel & model, const std::vector<PreparedScene> & data, const EvalConfig & eval)
{
  ag::NoGradGuard no_grad;
  EvalReport report;
  PlanEvalAccumulator plan_acc(eval.l2);
  for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(eval.batch_size)) {
    std::vector<const PreparedScene *> batch;
    for (std::size_t j = i; j < std::min(data.size(), i + static_cast<std::size_t>(eval.batch_size)); ++j) {
      batch.push_back(&data[j]);
    }
    const ForwardOutput out = model.forward(batch, Mode::Infer);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Scene & scene = batch[b]->scene;
      plan_acc.add(out.plan_points(static_cast<int>(b)), scene);

      const AgentPredictions & p = out.agents[b];
      const ag::Mat & logits = p.class_logits.value();
      const ag::Mat & box = p.box.value();
      const ag::Mat & traj = p.traj.value();
      std::vector<Point> centers;
      std::vector<int> rows;
      for (Eigen::Index q = 0; q < logits.rows(); ++q) {
        Eigen::Index cls = 0;
        logits.row(q).maxCoeff(&cls);
        if (cls == kNoObjectClass) {
          continue;
        }
        const Point ref = p.reference_points[static_cast<std::size_t>(q)];
        centers.push_back({ref.x + box(q, 0), ref.y + box(q, 1)});
        rows.push_back(static_cast<int>(q));
      }
      std::vector<Point> gt_centers;
      for (const auto & a : scene.agents) {
        gt_centers.push_back({a.bev_box.cx, a.bev_box.cy});
      }
      report.gt_agents += static_cast<int>(scene.agents.size());
      const std::vector<int> match = greedy_match(centers, gt_centers);
      for (std::size_t g = 0; g < scene.agents.size(); ++g) {
        const int d = match[g];
        if (d < 0) {
          continue;
        }
        const Point c = centers[static_cast<std::size_t>(d)];
        if (std::hypot(c.x - gt_centers[g].x, c.y - gt_centers[g].y) > eval.match_radius) {
          continue;
        }
        MatchedForecast m;
        m.label = scene.agents[g].label;
        m.gt = scene.agents[g].future_traj;
        const int q = rows[static_cast<std::size_t>(d)];
        for (int k = 0; k < kTrajSteps; ++k) {
          m.pred.push_back({c.x + traj(q, 2 * k), c.y + traj(q, 2 * k + 1)});
        }
        report.matched.push_back(std::move(m));
      }
    }
  }
  report.plan = plan_acc.result();
  report.forecast = forecast_subset(report.matched, [](AgentClass) { return true; }, eval.miss_threshold);
  return report;
}

ForecastEval forecast_subset(
  const std::vector<MatchedForecast> & matched, const std::function<bool(AgentClass)> & keep, double miss_threshold)
{
  std::vector<std::vector<std::vector<Point>>> modes;
  std::vector<std::vector<Point>> gts;
  for (const auto & m : matched) {
    if (keep(m.label)) {
      modes.push_back({m.pred});
      gts.push_back(m.gt);
    }
  }
  return forecast_metrics(modes, gts, miss_threshold);
}

std::vector<AgentClass> rare_classes(const WorldConfig & world, double mass)
{
  std::vector<int> order;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double f = world.class_freq[static_cast<std::size_t>(c)];
    if (f > 0.0) {
      order.push_back(c);
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
  }
  if (order.empty() || hi < 10.0 * lo) {
    throw ProtocolError("world " + world.name + ": class frequencies span less than 10x; no rare/common split");
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return world.class_freq[static_cast<std::size_t>(a)] < world.class_freq[static_cast<std::size_t>(b)];
  });
  std::vector<AgentClass> rare;
  double acc = 0.0;
  for (int c : order) {
    acc += world.class_freq[static_cast<std::size_t>(c)];
    if (acc > mass + 1e-9) {
      break;
    }
    rare.push_back(static_cast<AgentClass>(c));
  }
  if (rare.empty()) {
    throw ProtocolError("world " + world.name + ": rarest class alone exceeds the rare mass");
  }
  return rare;
}

// ---------------------------------------------------------------------------
// Runs

RunPaths run_paths(const std::string & runs_dir, const ExperimentConfig & config, std::uint64_t seed)
{
  RunPaths p;
  p.dir = (fs::path(runs_dir) / config.hash_hex() / std::to_string(seed)).string();
  p.checkpoint = (fs::path(p.dir) / "checkpoint.bin").string();
  p.result = (fs::path(p.dir) / "result.json").string();
  p.losses = (fs::path(p.dir) / "losses.csv").string();
  p.config = (fs::path(p.dir) / "config.ini").string();
  return p;
}

std::vector<Scene> train_scenes(const ExperimentConfig & config, std::uint64_t seed)
{
  return make_dataset(
    config.world(config.data.train_world), config.data.train_size, config.data.train_seed0 + seed * kSeedStride);
}

std::vector<Scene> test_scenes(const ExperimentConfig & config, const std::string & world, std::uint64_t seed, int n)
{
  return make_dataset(
    config.world(world), n < 0 ? config.data.test_size : n, config.data.test_seed0 + seed * kSeedStride);
}

json make_result(
  const ExperimentConfig & config, std::uint64_t seed, const std::string & test_world, const EvalReport & eval,
  const std::vector<LossRecord> & history, bool diverged, double train_seconds, const std::string & checkpoint,
  const AlignmentAccuracy & alignment, const PlannerModel & model)
{
  json r;
  r["schema_version"] = kResultSchemaVersion;
  r["config_hash"] = config.hash_hex();
  r["seed"] = seed;
  r["name"] = config.name;
  r["variant"] = {
    {"slp", config.vlp.slp}, {"alp", config.vlp.alp}, {"fields", config.vlp.fields.to_string()},
    {"encoder", config.vlp.encoder}};
  r["train_world"] = config.data.train_world;
  r["test_world"] = test_world;
  r["plan"] = {
    {"l2_convention", convention_name(config.eval.l2)},
    {"l2", horizons_json(eval.plan.l2, eval.plan.l2_avg)},
    {"col", horizons_json(eval.plan.col, eval.plan.col_avg)},
    {"samples", eval.plan.samples}};
  json fc = forecast_json(eval.forecast);
  fc["miss_threshold"] = config.eval.miss_threshold;
  fc["match_radius"] = config.eval.match_radius;
  fc["gt_agents"] = eval.gt_agents;
  r["forecast"] = fc;
  json by_class = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<AgentClass>(c);
    by_class[std::string(to_string(cls))] =
      forecast_json(forecast_subset(eval.matched, [cls](AgentClass a) { return a == cls; }, config.eval.miss_threshold));
  }
  r["forecast_by_class"] = by_class;
  try {
    const auto rare = rare_classes(config.world(test_world), config.eval.rare_mass);
    const auto is_rare = [rare](AgentClass a) { return std::find(rare.begin(), rare.end(), a) != rare.end(); };
    json names = json::array();
    for (auto c : rare) {
      names.push_back(std::string(to_string(c)));
    }
    r["longtail"] = {
      {"rare_classes", names},
      {"rare", forecast_json(forecast_subset(eval.matched, is_rare, config.eval.miss_threshold))},
      {"common", forecast_json(
                   forecast_subset(eval.matched, [&](AgentClass a) { return !is_rare(a); }, config.eval.miss_threshold))}};
  } catch (const ProtocolError &) {
    r["longtail"] = nullptr;
  }
  json loss = {{"steps", static_cast<int>(history.size())}, {"diverged", diverged}};
  if (!history.empty()) {
    double best = history.front().total;
    for (const auto & h : history) {
      best = std::min(best, h.total);
    }
    const auto & last = history.back();
    loss["initial_total"] = history.front().total;
    loss["final_total"] = last.total;
    loss["min_total"] = best;
    loss["final"] = {
      {"l_perc", last.l_perc}, {"l_pred", last.l_pred}, {"l_plan", last.l_plan}, {"l_slp", last.l_slp},
      {"l_alp", last.l_alp}};
  } else {
    loss["initial_total"] = nullptr;
    loss["final_total"] = nullptr;
    loss["min_total"] = nullptr;
    loss["final"] = nullptr;
  }
  r["loss"] = loss;
  r["alignment"] = {{"alp", nullable(alignment.alp)}, {"slp", nullable(alignment.slp)}};
  r["params"] = {
    {"total", model.parameter_count()}, {"vlp", model.vlp_parameter_count()},
    {"inference", model.parameter_count() - model.vlp_parameter_count()}};
  r["wall_clock_s"] = train_seconds;
  const std::uint64_t tr0 = config.data.train_seed0 + seed * kSeedStride;
  const std::uint64_t te0 = config.data.test_seed0 + seed * kSeedStride;
  r["provenance"] = {
    {"git", git_revision()},
    {"checkpoint", checkpoint},
    {"train_scene_seeds", {tr0, tr0 + static_cast<std::uint64_t>(config.data.train_size)}},
    {"test_scene_seeds", {te0, te0 + static_cast<std::uint64_t>(eval.plan.samples)}}};
  r["config"] = config.to_ini();
  return r;
}

void validate_result(const json & r)
{
  const auto need = [&](const json & obj, const char * key, json::value_t type, const std::string & where) {
    if (!obj.is_object() || !obj.contains(key)) {
      throw SchemaError("result missing " + where + key);
    }
    const json & v = obj.at(key);
    const bool numeric = type == json::value_t::number_float;
    if (numeric ? !v.is_number() : v.type() != type &&
                                     !(type == json::value_t::number_unsigned && v.is_number_integer())) {
      throw SchemaError("result field " + where + key + " has the wrong type");
    }
  };
  using T = json::value_t;
  need(r, "schema_version", T::number_unsigned, "");
  if (r.at("schema_version").get<int>() != kResultSchemaVersion) {
    throw SchemaError("unsupported result schema version " + r.at("schema_version").dump());
  }
  need(r, "config_hash", T::string, "");
  need(r, "seed", T::number_unsigned, "");
  need(r, "variant", T::object, "");
  need(r.at("variant"), "slp", T::boolean, "variant.");
  need(r.at("variant"), "alp", T::boolean, "variant.");
  need(r, "train_world", T::string, "");
  need(r, "test_world", T::string, "");
  need(r, "plan", T::object, "");
  for (const char * group : {"l2", "col"}) {
    need(r.at("plan"), group, T::object, "plan.");
    for (const char * h : {"1s", "2s", "3s", "avg"}) {
      need(r.at("plan").at(group), h, T::number_float, std::string("plan.") + group + ".");
    }
  }
  need(r, "forecast", T::object, "");
  for (const char * k : {"min_ade", "min_fde", "miss_rate"}) {
    need(r.at("forecast"), k, T::number_float, "forecast.");
  }
  need(r, "loss", T::object, "");
  need(r.at("loss"), "diverged", T::boolean, "loss.");
  need(r, "wall_clock_s", T::number_float, "");
  need(r, "provenance", T::object, "");
}

RunOutcome run_one(
  const ExperimentConfig & config, std::uint64_t seed, const RunOptions & options,
  const std::vector<std::string> & extra_worlds)
{
  config.validate();
  const RunPaths paths = run_paths(options.runs_dir, config, seed);
  fs::create_directories(paths.dir);
  const fs::path meta_path = fs::path(paths.dir) / "run.json";

  std::shared_ptr<EmbeddingCache> cache;
  if (config.vlp.any()) {
    cache = std::make_shared<EmbeddingCache>(make_text_encoder(config.vlp.encoder, config.vlp.text_dim));
  }
  const std::vector<PreparedScene> train_data = prepare_scenes(train_scenes(config, seed), config.vlp, cache.get());

  RunOutcome outcome;
  std::vector<LossRecord> history;
  double train_seconds = 0.0;
  std::optional<PlannerModel> model;
  // run.json is written last, so its presence marks a complete run.
  if (options.reuse && fs::exists(meta_path) && fs::exists(paths.checkpoint) && fs::exists(paths.losses)) {
    const json meta = json::parse(read_text(meta_path.string()));
    model.emplace(load_checkpoint(paths.checkpoint, Mode::Train));
    history = read_losses_csv(paths.losses);
    outcome.diverged = meta.at("diverged").get<bool>();
    train_seconds = meta.at("train_seconds").get<double>();
    outcome.reused = true;
  } else {
    model.emplace(config.model, config.vlp, seed);
    TrainConfig tc = config.optim;
    tc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult tr = train(*model, train_data, tc);
    train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history = tr.history;
    outcome.diverged = tr.diverged;
    save_checkpoint(*model, paths.checkpoint);
    write_text(paths.losses, losses_csv(history));
    write_text(paths.config, config.to_ini());
    write_text(
      meta_path.string(),
      json{{"diverged", tr.diverged}, {"train_seconds", train_seconds}, {"duplicate_prompts", tr.duplicate_prompts}}
        .dump(2) + "\n");
  }
  if (options.verbose) {
    std::cerr << (outcome.reused ? "reused " : "trained ") << paths.dir << " (" << std::fixed << std::setprecision(1)
              << train_seconds << " s" << (outcome.diverged ? ", diverged" : "") << ")\n";
  }

  AlignmentAccuracy alignment{std::nan(""), std::nan("")};
  if (model->has_vlp()) {
    std::vector<const PreparedScene *> batch;
    for (std::size_t i = 0; i < std::min<std::size_t>(32, train_data.size()); ++i) {
      batch.push_back(&train_data[i]);
    }
    alignment = alignment_accuracy(*model, batch);
  }

  const VlpConfig no_vlp{};
  auto evaluate_on = [&](const std::string & world) {
    const auto data = prepare_scenes(test_scenes(config, world, seed), no_vlp, nullptr);
    const EvalReport rep = evaluate_model(*model, data, config.eval);
    json r = make_result(
      config, seed, world, rep, history, outcome.diverged, train_seconds, paths.checkpoint, alignment, *model);
    validate_result(r);
    return r;
  };
  // result.json is always the in-distribution evaluation, so a run
  // directory never holds two meanings for one file name.
  const json in_dist = evaluate_on(config.data.train_world);
  write_text(paths.result, in_dist.dump(2) + "\n");
  std::map<std::string, json> other;
  auto world_result = [&](const std::string & w) -> const json & {
    if (w == config.data.train_world) {
      return in_dist;
    }
    auto it = other.find(w);
    if (it == other.end()) {
      it = other.emplace(w, evaluate_on(w)).first;
      write_text((fs::path(paths.dir) / world_suffix(w)).string(), it->second.dump(2) + "\n");
    }
    return it->second;
  };
  outcome.result = world_result(config.data.test_world);
  for (const auto & w : extra_worlds) {
    outcome.cross.push_back(world_result(w));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Variants and studies

ExperimentConfig Variant::apply(const ExperimentConfig & base) const
{
  ExperimentConfig c = base;
  c.vlp.slp = slp;
  c.vlp.alp = alp;
  if (fields) {
    c.vlp.fields = *fields;
  }
  if (encoder) {
    c.vlp.encoder = *encoder;
  }
  return c;
}

std::vector<Variant> standard_ladder()
{
  return {{"baseline", false, false, {}, {}}, {"+SLP", true, false, {}, {}}, {"+SLP+ALP", true, true, {}, {}}};
}

std::vector<Variant> encoder_ablation(const std::vector<std::string> & encoders)
{
  if (encoders.empty()) {
    throw ArgumentError("encoder ablation needs at least one encoder");
  }
  std::vector<Variant> v;
  for (const auto & e : encoders) {
    make_text_encoder(e, 8);  // rejects unknown specs before any training
    v.push_back({"+SLP+ALP " + e, true, true, {}, e});
  }
  return v;
}

std::vector<Variant> field_ablation()
{
  std::vector<Variant> v{{"all-fields", true, true, FieldMask{}, {}}};
  for (const char * field : {"label", "bbox", "traj", "command"}) {
    FieldMask m;
    if (std::string(field) == "label") {
      m.label = false;
    } else if (std::string(field) == "bbox") {
      m.bbox = false;
    } else if (std::string(field) == "traj") {
      m.traj = false;
    } else {
      m.command = false;
    }
    v.push_back({std::string("no-") + field, true, true, m, {}});
  }
  return v;
}

std::vector<Variant> parse_variants(const std::string & list)
{
  std::vector<Variant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "baseline") {
      out.push_back({"baseline", false, false, {}, {}});
    } else if (item == "slp" || item == "+slp") {
      out.push_back({"+SLP", true, false, {}, {}});
    } else if (item == "alp" || item == "+alp") {
      out.push_back({"+ALP", false, true, {}, {}});
    } else if (item == "slp+alp" || item == "+slp+alp") {
      out.push_back({"+SLP+ALP", true, true, {}, {}});
    } else if (!item.empty()) {
      throw ConfigError("unknown variant '" + item + "' (baseline, slp, alp, slp+alp)");
    }
  }
  if (out.empty()) {
    throw ConfigError("empty variant list");
  }
  return out;
}

double median(std::vector<double> values)
{
  values.erase(
    std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }), values.end());
  if (values.empty()) {
    return std::nan("");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace
{

SeedResult seed_result(const json & r, bool diverged)
{
  SeedResult s;
  s.seed = r.at("seed").get<std::uint64_t>();
  s.l2_avg = r.at("plan").at("l2").at("avg").get<double>();
  s.col_avg = r.at("plan").at("col").at("avg").get<double>();
  s.min_ade = r.at("forecast").at("vacuous").get<bool>() ? std::nan("") : r.at("forecast").at("min_ade").get<double>();
  s.diverged = diverged;
  s.hash = r.at("config_hash").get<std::string>();
  return s;
}

void finish_row(TableRow & row)
{
  std::vector<double> l2, col, ade;
  row.diverged = 0;
  for (const auto & s : row.seeds) {
    if (s.diverged) {
      ++row.diverged;
      continue;
    }
    l2.push_back(s.l2_avg);
    col.push_back(s.col_avg);
    ade.push_back(s.min_ade);
  }
  row.median_l2 = median(l2);
  row.median_col = median(col);
  row.median_min_ade = median(ade);
}

std::string num(double v, int precision = 4)
{
  if (!std::isfinite(v)) {
    return "nan";
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

const TableRow & StudyTable::row(
  const std::string & variant, const std::string & train_world, const std::string & test_world) const
{
  for (const auto & r : rows) {
    if (
      r.variant == variant && (train_world.empty() || r.train_world == train_world) &&
      (test_world.empty() || r.test_world == test_world)) {
      return r;
    }
  }
  throw ArgumentError("no row for variant " + variant + " " + train_world + "->" + test_world);
}

std::string StudyTable::to_markdown() const
{
  std::ostringstream os;
  const bool longtail = study == "longtail";
  os << "| variant | train | test | seeds | diverged | median avg L2 (m) | median Col (%) | median minADE (m)";
  os << (longtail ? " | median rare minADE (m) | median common minADE (m) |\n" : " |\n");
  os << "|---|---|---|---|---|---|---|---" << (longtail ? "|---|---|\n" : "|\n");
  for (const auto & r : rows) {
    os << "| " << r.variant << " | " << r.train_world << " | " << r.test_world << " | " << r.seeds.size() << " | "
       << r.diverged << " | " << num(r.median_l2) << " | " << num(r.median_col) << " | " << num(r.median_min_ade);
    if (longtail) {
      os << " | " << num(r.median_rare_min_ade) << " | " << num(r.median_common_min_ade);
    }
    os << " |\n";
  }
  return os.str();
}

std::string StudyTable::to_csv() const
{
  std::ostringstream os;
  os << "study,variant,train_world,test_world,seed,config_hash,diverged,l2_avg,col_avg,min_ade\n";
  for (const auto & r : rows) {
    for (const auto & s : r.seeds) {
      os << study << ',' << r.variant << ',' << r.train_world << ',' << r.test_world << ',' << s.seed << ',' << s.hash
         << ',' << (s.diverged ? 1 : 0) << ',' << num(s.l2_avg, 6) << ',' << num(s.col_avg, 6) << ','
         << num(s.min_ade, 6) << '\n';
    }
  }
  return os.str();
}

StudyTable run_ablation(
  const ExperimentConfig & base, const std::vector<Variant> & variants, const std::vector<std::uint64_t> & seeds,
  const RunOptions & options)
{
  if (variants.empty() || seeds.empty()) {
    throw ArgumentError("ablation needs at least one variant and one seed");
  }
  StudyTable table{"ablation", {}};
  for (const auto & v : variants) {
    const ExperimentConfig cfg = v.apply(base);
    TableRow row{v.name, cfg.data.train_world, cfg.data.test_world, {}, 0, 0, 0, 0, 0, 0};
    for (auto seed : seeds) {
      const RunOutcome o = run_one(cfg, seed, options);
      row.seeds.push_back(seed_result(o.result, o.diverged));
    }
    finish_row(row);
    table.rows.push_back(std::move(row));
  }
  return table;
}

StudyTable run_generalization(
  const ExperimentConfig & base, const std::string & train_world, const std::string & test_world,
  const std::vector<Variant> & variants, const std::vector<std::uint64_t> & seeds, const RunOptions & options)
{
  if (train_world == test_world) {
    throw ProtocolError("generalization needs distinct worlds, got " + train_world + " twice");
  }
  if (variants.empty() || seeds.empty()) {
    throw ArgumentError("generalization needs at least one variant and one seed");
  }
  StudyTable table{"generalization", {}};
  for (const auto & [from, to] : {std::pair{train_world, test_world}, std::pair{test_world, train_world}}) {
    for (const auto & v : variants) {
      ExperimentConfig cfg = v.apply(base);
      cfg.data.train_world = from;
      cfg.data.test_world = from;
      TableRow in{v.name, from, from, {}, 0, 0, 0, 0, 0, 0};
      TableRow cross{v.name, from, to, {}, 0, 0, 0, 0, 0, 0};
      for (auto seed : seeds) {
        const RunOutcome o = run_one(cfg, seed, options, {to});
        in.seeds.push_back(seed_result(o.result, o.diverged));
        cross.seeds.push_back(seed_result(o.cross.at(0), o.diverged));
      }
      finish_row(in);
      finish_row(cross);
      table.rows.push_back(std::move(in));
      table.rows.push_back(std::move(cross));
    }
  }
  return table;
}

StudyTable run_longtail(
  const ExperimentConfig & base, const std::string & longtail_world, const std::vector<Variant> & variants,
  const std::vector<std::uint64_t> & seeds, const RunOptions & options)
{
  // Rejects worlds without a 10x frequency span before any training.
  rare_classes(base.world(longtail_world), base.eval.rare_mass);
  if (variants.empty() || seeds.empty()) {
    throw ArgumentError("long-tail study needs at least one variant and one seed");
  }
  StudyTable table{"longtail", {}};
  for (const auto & v : variants) {
    ExperimentConfig cfg = v.apply(base);
    cfg.data.train_world = longtail_world;
    cfg.data.test_world = longtail_world;
    TableRow row{v.name, longtail_world, longtail_world, {}, 0, 0, 0, 0, 0, 0};
    std::vector<double> rare, common;
    for (auto seed : seeds) {
      RunOutcome o = run_one(cfg, seed, options);
      // Too few rare agents matched: enlarge the test set (the checkpoint is
      // reused since test size is outside the content hash).
      ExperimentConfig grown = cfg;
      for (int attempt = 0; attempt < 2 && o.result.at("longtail").at("rare").at("vacuous").get<bool>(); ++attempt) {
        grown.data.test_size *= 2;
        RunOptions reuse = options;
        reuse.reuse = true;
        o = run_one(grown, seed, reuse);
      }
      const json & lt = o.result.at("longtail");
      if (lt.at("rare").at("vacuous").get<bool>()) {
        throw ProtocolError("no rare-class agent matched for seed " + std::to_string(seed) + " after resampling");
      }
      row.seeds.push_back(seed_result(o.result, o.diverged));
      if (!o.diverged) {
        rare.push_back(lt.at("rare").at("min_ade").get<double>());
        common.push_back(lt.at("common").at("vacuous").get<bool>() ? std::nan("") : lt.at("common").at("min_ade").get<double>());
      }
    }
    finish_row(row);
    row.median_rare_min_ade = median(rare);
    row.median_common_min_ade = median(common);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Report

namespace
{

struct ReportEntry
{
  std::string path;
  json result;
};

std::string variant_label(const json & r)
{
  const bool slp = r.at("variant").at("slp").get<bool>();
  const bool alp = r.at("variant").at("alp").get<bool>();
  std::string s = slp || alp ? "" : "baseline";
  if (slp) {
    s += "+SLP";
  }
  if (alp) {
    s += "+ALP";
  }
  const json & v = r.at("variant");
  if ((slp || alp) && v.contains("fields") && v.at("fields").get<std::string>() != FieldMask{}.to_string()) {
    s += " [" + v.at("fields").get<std::string>() + "]";
  }
  return s;
}

std::string model_label(const json & r)
{
  return r.value("name", std::string("run")) + " " + variant_label(r) + " " + r.at("train_world").get<std::string>() +
         "->" + r.at("test_world").get<std::string>() + " s" + std::to_string(r.at("seed").get<std::uint64_t>());
}

std::string svg_escape(const std::string & s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

const std::array<const char *, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string loss_svg(const std::vector<std::pair<std::string, std::vector<LossRecord>>> & curves)
{
  const double w = 720, h = 420, left = 60, right = 200, top = 30, bottom = 40;
  double max_step = 1, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto & [name, hist] : curves) {
    for (const auto & r : hist) {
      if (std::isfinite(r.total) && r.total > 0) {
        max_step = std::max(max_step, static_cast<double>(r.step));
        lo = std::min(lo, std::log10(r.total));
        hi = std::max(hi, std::log10(r.total));
      }
    }
  }
  if (!(hi > lo)) {
    lo = 0;
    hi = 1;
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">total training loss (log10)</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + 5 << "\" font-size=\"10\" text-anchor=\"end\">" << hi
     << "</text>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << h - bottom << "\" font-size=\"10\" text-anchor=\"end\">" << lo
     << "</text>\n";
  os << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 15 << "\" font-size=\"10\" text-anchor=\"end\">step "
     << static_cast<int>(max_step) << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto & [name, hist] = curves[i];
    const char * color = kPalette[i % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
    for (const auto & r : hist) {
      if (!(std::isfinite(r.total) && r.total > 0)) {
        continue;
      }
      const double x = left + (w - left - right) * r.step / max_step;
      const double y = h - bottom - (h - top - bottom) * (std::log10(r.total) - lo) / (hi - lo);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
    if (i < 24) {
      os << "<text x=\"" << w - right + 8 << "\" y=\"" << top + 12 + 14 * i << "\" font-size=\"10\" fill=\"" << color
         << "\">" << svg_escape(name) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string l2_svg(const std::vector<std::pair<std::string, std::array<double, kHorizons>>> & groups)
{
  const double bar = 14, gap = 24, left = 60, top = 30, bottom = 60, h = 360;
  const double w = left + 20 + groups.size() * (kHorizons * bar + gap) + 20;
  double hi = 0;
  for (const auto & [name, v] : groups) {
    for (double x : v) {
      if (std::isfinite(x)) {
        hi = std::max(hi, x);
      }
    }
  }
  hi = hi > 0 ? hi : 1;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << std::max(w, 320.0) << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">median L2 (m) at 1 s / 2 s / 3 s</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - 20 << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + 5 << "\" font-size=\"10\" text-anchor=\"end\">" << hi
     << "</text>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double x0 = left + 20 + g * (kHorizons * bar + gap);
    for (int k = 0; k < kHorizons; ++k) {
      const double v = std::isfinite(groups[g].second[k]) ? groups[g].second[k] : 0.0;
      const double bh = (h - top - bottom) * v / hi;
      os << "<rect x=\"" << x0 + k * bar << "\" y=\"" << h - bottom - bh << "\" width=\"" << bar - 2
         << "\" height=\"" << bh << "\" fill=\"" << kPalette[static_cast<std::size_t>(k)] << "\"/>\n";
    }
    os << "<text transform=\"translate(" << x0 << ',' << h - bottom + 12 << ") rotate(20)\" font-size=\"9\">"
       << svg_escape(groups[g].first) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int report(const std::string & runs_dir, const std::string & out_dir)
{
  if (!fs::is_directory(runs_dir)) {
    throw ArgumentError("results directory not found: " + runs_dir);
  }
  std::vector<ReportEntry> entries;
  for (const auto & e : fs::recursive_directory_iterator(runs_dir)) {
    const std::string fname = e.path().filename().string();
    if (e.is_regular_file() && fname.rfind("result", 0) == 0 && e.path().extension() == ".json") {
      entries.push_back({e.path().string(), json::parse(read_text(e.path().string()))});
    }
  }
  if (entries.empty()) {
    throw ArgumentError("no result files under " + runs_dir);
  }
  std::sort(entries.begin(), entries.end(), [](const auto & a, const auto & b) { return a.path < b.path; });
  std::set<std::string> versions;
  for (const auto & e : entries) {
    versions.insert(e.result.contains("schema_version") ? e.result.at("schema_version").dump() : "missing");
  }
  if (versions.size() > 1) {
    std::string list;
    for (const auto & v : versions) {
      list += (list.empty() ? "" : ", ") + v;
    }
    throw SchemaError("mixed result schema versions: " + list);
  }
  for (const auto & e : entries) {
    try {
      validate_result(e.result);
    } catch (const SchemaError & err) {
      throw SchemaError(e.path + ": " + err.what());
    }
  }
  fs::create_directories(out_dir);

  std::ostringstream csv, md;
  csv << "model,slp,alp,train_world,test_world,seed,config_hash,l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg,"
         "min_ade,min_fde,miss_rate\n";
  md << "| model | SLP | ALP | L2@1s | L2@2s | L2@3s | L2@avg | Col@1s | Col@2s | Col@3s | Col@avg |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  std::map<std::string, std::vector<std::array<double, kHorizons>>> groups;
  for (const auto & e : entries) {
    const json & r = e.result;
    const json & l2 = r.at("plan").at("l2");
    const json & col = r.at("plan").at("col");
    const bool slp = r.at("variant").at("slp").get<bool>();
    const bool alp = r.at("variant").at("alp").get<bool>();
    const auto v = [](const json & j, const char * k) { return num(j.at(k).get<double>()); };
    csv << '"' << model_label(r) << "\"," << slp << ',' << alp << ',' << r.at("train_world").get<std::string>() << ','
        << r.at("test_world").get<std::string>() << ',' << r.at("seed").get<std::uint64_t>() << ','
        << r.at("config_hash").get<std::string>();
    for (const char * k : {"1s", "2s", "3s", "avg"}) {
      csv << ',' << v(l2, k);
    }
    for (const char * k : {"1s", "2s", "3s", "avg"}) {
      csv << ',' << v(col, k);
    }
    const json & f = r.at("forecast");
    csv << ',' << v(f, "min_ade") << ',' << v(f, "min_fde") << ',' << v(f, "miss_rate") << '\n';
    md << "| " << model_label(r) << " | " << (slp ? "✓" : "") << " | " << (alp ? "✓" : "") << " | " << num(l2.at("1s").get<double>(), 2)
       << " | " << num(l2.at("2s").get<double>(), 2) << " | " << num(l2.at("3s").get<double>(), 2) << " | "
       << num(l2.at("avg").get<double>(), 2) << " | " << num(col.at("1s").get<double>(), 2) << " | "
       << num(col.at("2s").get<double>(), 2) << " | " << num(col.at("3s").get<double>(), 2) << " | "
       << num(col.at("avg").get<double>(), 2) << " |\n";
    const std::string group = variant_label(r) + " " + r.at("train_world").get<std::string>() + "->" +
                              r.at("test_world").get<std::string>();
    groups[group].push_back({l2.at("1s").get<double>(), l2.at("2s").get<double>(), l2.at("3s").get<double>()});
  }
  write_text((fs::path(out_dir) / "table.csv").string(), csv.str());
  write_text((fs::path(out_dir) / "table.md").string(), md.str());

  std::vector<std::pair<std::string, std::array<double, kHorizons>>> bars;
  for (const auto & [name, list] : groups) {
    std::array<double, kHorizons> m{};
    for (int k = 0; k < kHorizons; ++k) {
      std::vector<double> xs;
      for (const auto & a : list) {
        xs.push_back(a[static_cast<std::size_t>(k)]);
      }
      m[static_cast<std::size_t>(k)] = median(xs);
    }
    bars.emplace_back(name, m);
  }
  write_text((fs::path(out_dir) / "l2_horizon.svg").string(), l2_svg(bars));

  std::vector<std::pair<std::string, std::vector<LossRecord>>> curves;
  std::set<std::string> seen;
  for (const auto & e : entries) {
    const fs::path dir = fs::path(e.path).parent_path();
    const fs::path losses = dir / "losses.csv";
    if (seen.insert(dir.string()).second && fs::exists(losses)) {
      const json & r = e.result;
      curves.emplace_back(
        variant_label(r) + " " + r.at("train_world").get<std::string>() + " s" +
          std::to_string(r.at("seed").get<std::uint64_t>()),
        read_losses_csv(losses.string()));
    }
  }
  write_text((fs::path(out_dir) / "loss_curves.svg").string(), loss_svg(curves));
  return static_cast<int>(entries.size());
}

}  // namespace vlp
