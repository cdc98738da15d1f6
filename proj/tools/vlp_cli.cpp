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

// vlp: command-line front end of the experiment harness.

#include "vlp/errors.hpp"
#include "vlp/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace
{

namespace fs = std::filesystem;

struct Common
{
  std::string config;
  std::uint64_t seed = 0;
  std::string runs = "runs";
  bool verbose = false;
};

void add_common(CLI::App * cmd, Common & c, bool config_required = true)
{
  auto * opt = cmd->add_option("--config", c.config, "experiment config (INI)");
  if (config_required) {
    opt->required()->check(CLI::ExistingFile);
  }
  cmd->add_option("--seed", c.seed, "run seed (first seed for multi-seed studies)");
  cmd->add_option("--runs", c.runs, "results directory")->capture_default_str();
  cmd->add_flag("-v,--verbose", c.verbose, "log each run");
}

vlp::ExperimentConfig load_config(const Common & c)
{
  return c.config.empty() ? vlp::ExperimentConfig{} : vlp::ExperimentConfig::load(c.config);
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, int n)
{
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n; ++i) {
    seeds.push_back(first + static_cast<std::uint64_t>(i));
  }
  return seeds;
}

void write_study(const vlp::StudyTable & table, const std::string & out_dir)
{
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / (table.study + ".md")) << table.to_markdown();
  std::ofstream(fs::path(out_dir) / (table.study + ".csv")) << table.to_csv();
  std::cout << table.to_markdown();
  for (const auto & r : table.rows) {
    if (r.diverged > 0) {
      std::cerr << "warning: " << r.diverged << " diverged run(s) excluded from medians of " << r.variant << " "
                << r.train_world << "->" << r.test_world << "\n";
    }
  }
}

void print_summary(const nlohmann::json & r)
{
  nlohmann::json s = {
    {"config_hash", r.at("config_hash")}, {"seed", r.at("seed")}, {"train_world", r.at("train_world")},
    {"test_world", r.at("test_world")}, {"plan", r.at("plan")}, {"forecast", r.at("forecast")},
    {"alignment", r.at("alignment")}};
  std::cout << s.dump(2) << "\n";
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Toy language-supervised planner: data generation, training, evaluation and studies"};
  app.require_subcommand(1);

  // gen-data
  Common gen;
  std::string gen_split = "train", gen_world, gen_out;
  int gen_count = -1;
  auto * gen_cmd = app.add_subcommand("gen-data", "write a synthetic split as JSON lines");
  add_common(gen_cmd, gen);
  gen_cmd->add_option("--split", gen_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  gen_cmd->add_option("--world", gen_world, "world preset (defaults to the split's world)");
  gen_cmd->add_option("--count", gen_count, "number of scenes (defaults to the split size)");
  gen_cmd->add_option("--out", gen_out, "output .jsonl")->required();

  // train
  Common tr;
  bool tr_force = false;
  auto * train_cmd = app.add_subcommand("train", "train one run (reused when already complete) and evaluate it");
  add_common(train_cmd, tr);
  train_cmd->add_flag("--force", tr_force, "retrain even if the run directory is complete");

  // eval
  Common ev;
  std::string ev_checkpoint, ev_world, ev_dump;
  auto * eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test split");
  add_common(eval_cmd, ev);
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint file (defaults to the run directory)");
  eval_cmd->add_option("--world", ev_world, "test world (defaults to data.test_world)");
  eval_cmd->add_option("--dump-grid", ev_dump, "write the BEV grid of the first test scene to <prefix>.{bin,json}");

  // ablate
  Common ab;
  int ab_seeds = 5;
  std::string ab_variants = "baseline,slp,slp+alp", ab_out;
  bool ab_fields = false;
  auto * ablate_cmd = app.add_subcommand("ablate", "variant ladder over several seeds");
  add_common(ablate_cmd, ab);
  ablate_cmd->add_option("--num-seeds", ab_seeds, "seeds seed..seed+n-1")->capture_default_str();
  ablate_cmd->add_option("--variants", ab_variants, "comma list of baseline, slp, alp, slp+alp")->capture_default_str();
  ablate_cmd->add_flag("--fields", ab_fields, "prompt-field ablation (all fields, then each one removed)");
  std::vector<std::string> ab_encoders;
  ablate_cmd
    ->add_option("--encoders", ab_encoders, "text-encoder ablation: SLP+ALP once per encoder spec")
    ->delimiter(',')
    ->excludes("--fields");
  ablate_cmd->add_option("--out", ab_out, "study output directory (default <runs>/studies)");

  // generalize
  Common ge;
  int ge_seeds = 5;
  std::string ge_variants = "baseline,slp+alp", ge_train = "cityA", ge_test = "cityB", ge_out;
  auto * gen_world_cmd = app.add_subcommand("generalize", "cross-world protocol, both directions");
  add_common(gen_world_cmd, ge);
  gen_world_cmd->add_option("--num-seeds", ge_seeds)->capture_default_str();
  gen_world_cmd->add_option("--variants", ge_variants)->capture_default_str();
  gen_world_cmd->add_option("--train-world", ge_train)->capture_default_str();
  gen_world_cmd->add_option("--test-world", ge_test)->capture_default_str();
  gen_world_cmd->add_option("--out", ge_out, "study output directory (default <runs>/studies)");

  // longtail
  Common lt;
  int lt_seeds = 5;
  std::string lt_variants = "baseline,slp+alp", lt_world = "longtail", lt_out;
  auto * longtail_cmd = app.add_subcommand("longtail", "rare versus common class forecasting");
  add_common(longtail_cmd, lt);
  longtail_cmd->add_option("--num-seeds", lt_seeds)->capture_default_str();
  longtail_cmd->add_option("--variants", lt_variants)->capture_default_str();
  longtail_cmd->add_option("--world", lt_world)->capture_default_str();
  longtail_cmd->add_option("--out", lt_out, "study output directory (default <runs>/studies)");

  // report
  Common rp;
  std::string rp_out = "report";
  auto * report_cmd = app.add_subcommand("report", "tables and plots from persisted results");
  add_common(report_cmd, rp, false);
  report_cmd->add_option("--out", rp_out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto study_dir = [](const Common & c, const std::string & out) {
      return out.empty() ? (fs::path(c.runs) / "studies").string() : out;
    };
    if (*gen_cmd) {
      const auto cfg = load_config(gen);
      std::vector<vlp::Scene> scenes;
      if (gen_split == "train") {
        vlp::ExperimentConfig c = cfg;
        if (!gen_world.empty()) {
          c.data.train_world = gen_world;
        }
        if (gen_count > 0) {
          c.data.train_size = gen_count;
        }
        scenes = vlp::train_scenes(c, gen.seed);
      } else {
        scenes = vlp::test_scenes(cfg, gen_world.empty() ? cfg.data.test_world : gen_world, gen.seed, gen_count);
      }
      vlp::write_jsonl(gen_out, scenes);
      std::cerr << "wrote " << scenes.size() << " scenes to " << gen_out << "\n";
    } else if (*train_cmd) {
      const auto cfg = load_config(tr);
      vlp::RunOptions opt{tr.runs, !tr_force, true};
      const auto o = vlp::run_one(cfg, tr.seed, opt);
      print_summary(o.result);
      return o.diverged ? 2 : 0;
    } else if (*eval_cmd) {
      vlp::ExperimentConfig cfg = load_config(ev);
      const std::string world = ev_world.empty() ? cfg.data.test_world : ev_world;
      const std::string ckpt =
        ev_checkpoint.empty() ? vlp::run_paths(ev.runs, cfg, ev.seed).checkpoint : ev_checkpoint;
      if (!fs::exists(ckpt)) {
        throw vlp::ArgumentError("checkpoint not found: " + ckpt + " (run `train` first)");
      }
      const vlp::PlannerModel model = vlp::load_checkpoint(ckpt, vlp::Mode::Infer);
      if (!(model.config() == cfg.model)) {
        throw vlp::ConfigError("checkpoint model config differs from " + ev.config);
      }
      const auto data = vlp::prepare_scenes(vlp::test_scenes(cfg, world, ev.seed), vlp::VlpConfig{}, nullptr);
      const auto rep = vlp::evaluate_model(model, data, cfg.eval);
      const auto r = vlp::make_result(
        cfg, ev.seed, world, rep, {}, false, 0.0, ckpt, {std::nan(""), std::nan("")}, model);
      print_summary(r);
      if (!ev_dump.empty()) {
        vlp::ag::NoGradGuard no_grad;
        const auto out = model.forward({&data.front()}, vlp::Mode::Infer);
        vlp::dump_grid({cfg.model.grid, out.bev}, ev_dump);
        std::cerr << "wrote " << ev_dump << ".bin and " << ev_dump << ".json\n";
      }
    } else if (*ablate_cmd) {
      const auto cfg = load_config(ab);
      const auto variants = ab_fields             ? vlp::field_ablation()
                            : !ab_encoders.empty() ? vlp::encoder_ablation(ab_encoders)
                                                   : vlp::parse_variants(ab_variants);
      vlp::StudyTable t = vlp::run_ablation(cfg, variants, seed_list(ab.seed, ab_seeds), {ab.runs, true, ab.verbose});
      if (ab_fields) {
        t.study = "field_ablation";
      } else if (!ab_encoders.empty()) {
        t.study = "encoder_ablation";
      }
      write_study(t, study_dir(ab, ab_out));
    } else if (*gen_world_cmd) {
      const auto cfg = load_config(ge);
      write_study(
        vlp::run_generalization(
          cfg, ge_train, ge_test, vlp::parse_variants(ge_variants), seed_list(ge.seed, ge_seeds),
          {ge.runs, true, ge.verbose}),
        study_dir(ge, ge_out));
    } else if (*longtail_cmd) {
      const auto cfg = load_config(lt);
      write_study(
        vlp::run_longtail(
          cfg, lt_world, vlp::parse_variants(lt_variants), seed_list(lt.seed, lt_seeds), {lt.runs, true, lt.verbose}),
        study_dir(lt, lt_out));
    } else if (*report_cmd) {
      const int n = vlp::report(rp.runs, rp_out);
      std::cerr << "rendered " << n << " result(s) into " << rp_out << "\n";
    }
  } catch (const vlp::Error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
