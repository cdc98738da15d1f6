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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// FAIL. Study runs are cached under --runs, so a rerun only re-evaluates;
// runtime budgets are checked against the recorded training time of every
// run a criterion uses plus its own elapsed time.

#include "fd_check.hpp"
#include "oracles.hpp"
#include "vlp/bev.hpp"
#include "vlp/contrastive.hpp"
#include "vlp/errors.hpp"
#include "vlp/harness.hpp"
#include "vlp/metrics.hpp"
#include "vlp/text_encoder.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace vlp;

namespace
{

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kClosedFormTol = 1e-9;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdInstances = 20;
constexpr double kImprovementRatio = 0.97;  // A3: L2 ratio to baseline
constexpr double kFieldBand = 0.02;         // A6: meters
constexpr int kOracleCases = 200;
constexpr double kOracleSample = 0.1;       // meters
constexpr double kAlignmentTarget = 0.95;
constexpr double kHistoryTol = 1e-6;
constexpr int kAlignmentScenes = 64;
constexpr int kAlignmentSteps = 1500;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2, 3, 4};

// Budgets in seconds; 0 means none.
constexpr double kBudgetA1 = 10, kBudgetA2 = 60, kBudgetA3 = 30 * 60, kBudgetA4 = 45 * 60, kBudgetA5 = 30 * 60,
                 kBudgetA7 = 60;

struct Verdict
{
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Context
{
  std::string runs_dir;
  ExperimentConfig base;
  RunOptions options() const { return {runs_dir, true, true}; }
};

/// Training seconds recorded for every run behind the table rows.
double recorded_train_seconds(const std::string & runs_dir, const StudyTable & table)
{
  std::set<std::string> seen;
  double total = 0.0;
  for (const auto & row : table.rows) {
    for (const auto & s : row.seeds) {
      const fs::path meta = fs::path(runs_dir) / s.hash / std::to_string(s.seed) / "run.json";
      if (!seen.insert(meta.string()).second) {
        continue;
      }
      std::ifstream in(meta);
      if (!in) {
        throw SchemaError("missing run marker " + meta.string());
      }
      total += nlohmann::json::parse(in).at("train_seconds").get<double>();
    }
  }
  return total;
}

std::string row_line(const TableRow & r)
{
  std::ostringstream s;
  s << r.variant << " " << r.train_world << "->" << r.test_world << " L2 " << fmt(r.median_l2) << " col "
    << fmt(r.median_col) << " minADE " << fmt(r.median_min_ade);
  if (r.diverged > 0) {
    s << " (" << r.diverged << " diverged)";
  }
  return s.str();
}

Verdict a1()
{
  std::vector<std::string> fails;
  const double n1 = symmetric_ce_loss(ag::Var(ag::Mat::Constant(1, 1, 2.5))).item();
  const double id = symmetric_ce_loss(ag::Var(ag::Mat::Identity(2, 2))).item();
  const double cst = symmetric_ce_loss(ag::Var(ag::Mat::Constant(2, 2, -1.3))).item();
  if (n1 != 0.0) {
    fails.push_back("N=1 gives " + fmt(n1, 17));
  }
  if (std::abs(id - std::log1p(std::exp(-1.0))) > kClosedFormTol) {
    fails.push_back("identity gives " + fmt(id, 17));
  }
  if (std::abs(cst - std::log(2.0)) > kClosedFormTol) {
    fails.push_back("constant gives " + fmt(cst, 17));
  }

  std::mt19937_64 rng(20260);
  std::uniform_real_distribution<double> log_alpha(0.0, std::log(kMaxLogitScale) - 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < kFdInstances; ++trial) {
    ag::Var a(testing::random_mat(rng, 4, 8), true);
    ag::Var b(testing::random_mat(rng, 4, 8), true);
    LogitScale scale(std::exp(log_alpha(rng)));
    worst = std::max(worst, testing::fd_check([&] { return slp_loss(a, b, scale); }, {a, b, scale.raw()}).max_rel_error);

    AgentFeatureBatch produced{a, {}};
    for (int i = 0; i < 4; ++i) {
      produced.meta.push_back({0, i == 0 ? AgentKind::Ego : (i < 3 ? AgentKind::FG : AgentKind::Lane), i});
    }
    const ExpectationBatch expected{b, produced.meta};
    worst = std::max(
      worst, testing::fd_check([&] { return alp_loss(produced, expected, scale); }, {a, b, scale.raw()}).max_rel_error);
  }
  if (worst >= kFdRelTol) {
    fails.push_back("finite-difference relative error " + fmt(worst));
  }
  std::string detail = "closed forms N=1 " + fmt(n1) + ", identity " + fmt(id, 12) + ", constant " + fmt(cst, 12) +
                       "; worst FD relative error " + fmt(worst, 3) + " over " + std::to_string(kFdInstances) +
                       " instances x 2 losses";
  for (const auto & f : fails) {
    detail += "; " + f;
  }
  return {fails.empty(), detail};
}

std::size_t adapter_size(std::size_t d, std::size_t c)
{
  const std::size_t h = std::max(d, c);
  return d * h + h + h * c + c;
}

double max_abs_diff(const ag::Mat & a, const ag::Mat & b)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

double output_diff(const ForwardOutput & a, const ForwardOutput & b)
{
  double d = std::max(
    {max_abs_diff(a.plan.value(), b.plan.value()), max_abs_diff(a.bev.value(), b.bev.value()),
     max_abs_diff(a.objectness.value(), b.objectness.value())});
  if (a.agents.size() != b.agents.size()) {
    return std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    d = std::max(
      {d, max_abs_diff(a.agents[i].class_logits.value(), b.agents[i].class_logits.value()),
       max_abs_diff(a.agents[i].box.value(), b.agents[i].box.value()),
       max_abs_diff(a.agents[i].traj.value(), b.agents[i].traj.value())});
  }
  return d;
}

Verdict a2(const Context & ctx)
{
  ExperimentConfig cfg = ctx.base;
  cfg.name = "acceptance-invariance";
  cfg.vlp.slp = true;
  cfg.vlp.alp = true;
  cfg.optim.steps = 100;
  const RunOutcome o = run_one(cfg, 0, ctx.options());
  const std::string ckpt = run_paths(ctx.runs_dir, cfg, 0).checkpoint;
  const PlannerModel full = load_checkpoint(ckpt, Mode::Train);
  const PlannerModel stripped = full.strip_vlp();
  const PlannerModel lean = load_checkpoint(ckpt, Mode::Infer);

  const auto data = prepare_scenes(test_scenes(cfg, cfg.data.test_world, 0, 32), VlpConfig{}, nullptr);
  double diff = 0.0;
  for (std::size_t i = 0; i < data.size(); i += 8) {
    std::vector<const PreparedScene *> batch;
    for (std::size_t j = i; j < std::min(data.size(), i + 8); ++j) {
      batch.push_back(&data[j]);
    }
    ag::NoGradGuard no_grad;
    const ForwardOutput a = full.forward(batch, Mode::Infer);
    diff = std::max({diff, output_diff(a, stripped.forward(batch, Mode::Infer)),
                     output_diff(a, lean.forward(batch, Mode::Infer))});
  }
  const auto d = static_cast<std::size_t>(cfg.vlp.text_dim);
  const auto c = static_cast<std::size_t>(cfg.model.channels);
  const std::size_t expected = 2 * adapter_size(d, c) + 2;
  const std::size_t removed = full.parameter_count() - stripped.parameter_count();
  const bool counts = removed == expected && lean.parameter_count() == stripped.parameter_count() &&
                      full.vlp_parameter_count() == expected;
  const bool pass = full.has_vlp() && !o.diverged && diff == 0.0 && counts;
  return {pass, "max abs diff " + fmt(diff) + " over 32 scenes; removed " + std::to_string(removed) +
                  " parameters, expected 2 adapters + 2 scales = " + std::to_string(expected)};
}

/// Shared by A3 and A6 so the all-fields runs are the +SLP+ALP runs.
StudyTable ladder_table(const Context & ctx)
{
  return run_ablation(ctx.base, standard_ladder(), kSeeds, ctx.options());
}

std::string budget_note(double seconds, double budget, bool & ok)
{
  ok = budget <= 0 || seconds < budget;
  std::string s = "runtime " + fmt(seconds / 60.0, 3) + " min";
  if (budget > 0) {
    s += " (budget " + fmt(budget / 60.0, 3) + " min)";
  }
  return s;
}

Verdict a3(const Context & ctx)
{
  const auto t0 = Clock::now();
  const StudyTable t = ladder_table(ctx);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const TableRow & base = t.row("baseline");
  const TableRow & slp = t.row("+SLP");
  const TableRow & both = t.row("+SLP+ALP");
  const bool l2_slp = slp.median_l2 <= kImprovementRatio * base.median_l2;
  const bool l2_both = both.median_l2 <= kImprovementRatio * base.median_l2;
  const bool col = both.median_col <= base.median_col;
  bool in_budget = false;
  const std::string rt = budget_note(recorded_train_seconds(ctx.runs_dir, t) + secs, kBudgetA3, in_budget);
  return {l2_slp && l2_both && col && in_budget,
          row_line(base) + " | " + row_line(slp) + " | " + row_line(both) + " | ratios +SLP " +
            fmt(slp.median_l2 / base.median_l2) + ", +SLP+ALP " + fmt(both.median_l2 / base.median_l2) + " | " + rt};
}

Verdict a4(const Context & ctx)
{
  const auto t0 = Clock::now();
  const StudyTable t =
    run_generalization(ctx.base, "cityA", "cityB", parse_variants("baseline,slp+alp"), kSeeds, ctx.options());
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  bool pass = true;
  std::string detail;
  for (const auto & [from, to] : {std::pair{"cityA", "cityB"}, std::pair{"cityB", "cityA"}}) {
    const TableRow & b = t.row("baseline", from, to);
    const TableRow & v = t.row("+SLP+ALP", from, to);
    pass = pass && v.median_l2 <= b.median_l2;
    detail += row_line(b) + " | " + row_line(v) + " | ";
  }
  bool in_budget = false;
  detail += budget_note(recorded_train_seconds(ctx.runs_dir, t) + secs, kBudgetA4, in_budget);
  return {pass && in_budget, detail};
}

Verdict a5(const Context & ctx)
{
  const auto t0 = Clock::now();
  const StudyTable t = run_longtail(ctx.base, "longtail", parse_variants("baseline,slp+alp"), kSeeds, ctx.options());
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const TableRow & b = t.row("baseline");
  const TableRow & v = t.row("+SLP+ALP");
  const double ratio = v.median_rare_min_ade / b.median_rare_min_ade;
  bool in_budget = false;
  const std::string rt = budget_note(recorded_train_seconds(ctx.runs_dir, t) + secs, kBudgetA5, in_budget);
  return {std::isfinite(ratio) && ratio <= 1.0 && in_budget,
          "rare minADE baseline " + fmt(b.median_rare_min_ade) + ", +SLP+ALP " + fmt(v.median_rare_min_ade) +
            " (ratio " + fmt(ratio) + "); common " + fmt(b.median_common_min_ade) + " / " +
            fmt(v.median_common_min_ade) + " | " + rt};
}

Verdict a6(const Context & ctx)
{
  const StudyTable t = run_ablation(ctx.base, field_ablation(), kSeeds, ctx.options());
  const TableRow & all = t.row("all-fields");
  bool pass = true;
  std::vector<std::string> within_band;
  std::string detail = "all-fields L2 " + fmt(all.median_l2);
  for (const auto & r : t.rows) {
    if (r.variant == "all-fields") {
      continue;
    }
    detail += ", " + r.variant + " " + fmt(r.median_l2);
    if (all.median_l2 > r.median_l2 + kFieldBand) {
      pass = false;
    } else if (all.median_l2 > r.median_l2) {
      within_band.push_back(r.variant);
    }
  }
  if (!within_band.empty()) {
    detail += " | note: all-fields is worse than";
    for (const auto & v : within_band) {
      detail += " " + v;
    }
    detail += " but within the " + fmt(kFieldBand) + " m band";
  }
  return {pass, detail};
}

Verdict a7()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7001);
  const GridSpec grid{-12.8, 12.8, -12.8, 12.8, 0.8};
  std::uniform_real_distribution<double> pos(-14, 14), size(0.3, 8.0), yaw(-M_PI, M_PI);
  int cell_mismatch = 0, nonempty = 0;
  for (int i = 0; i < kOracleCases; ++i) {
    const BevBox box{pos(rng), pos(rng), size(rng), size(rng), yaw(rng)};
    const auto got = cells_in_box(grid, box);
    nonempty += got.empty() ? 0 : 1;
    cell_mismatch += got == testing::brute_force_cells(grid, box) ? 0 : 1;
  }

  std::uniform_real_distribution<double> ppos(-6, 6), psize(0.5, 5.0);
  int disagreements = 0, boundary = 0, positives = 0, steps = 0;
  for (int i = 0; i < kOracleCases; ++i) {
    const BevBox ego{0, 0, psize(rng), psize(rng), yaw(rng)};
    std::vector<Point> plan;
    for (int t = 0; t < kPlanSteps; ++t) {
      plan.push_back({ppos(rng), ppos(rng)});
    }
    AgentRecord agent;
    agent.bev_box = {ppos(rng), ppos(rng), psize(rng), psize(rng), yaw(rng)};
    for (int t = 0; t < kTrajSteps; ++t) {
      agent.future_traj.push_back({agent.bev_box.cx + 0.3 * t, agent.bev_box.cy - 0.2 * t});
    }
    const auto flags = collision_flags(plan, ego, std::vector<AgentRecord>{agent});
    const auto heading = plan_headings(plan, ego.yaw);
    for (int t = 0; t < kPlanSteps; ++t) {
      const auto k = static_cast<std::size_t>(t);
      const BevBox placed{plan[k].x, plan[k].y, ego.length, ego.width, heading[k]};
      BevBox other = agent.bev_box;
      other.cx = agent.future_traj[k].x;
      other.cy = agent.future_traj[k].y;
      const bool oracle = testing::sampled_overlap(placed, other, kOracleSample);
      positives += oracle ? 1 : 0;
      ++steps;
      if (oracle != flags.step[k]) {
        if (std::abs(testing::boundary_gap(placed, other)) <= kOracleSample) {
          ++boundary;
        } else {
          ++disagreements;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  bool in_budget = false;
  const std::string rt = budget_note(secs, kBudgetA7, in_budget);
  return {cell_mismatch == 0 && disagreements == 0 && in_budget,
          "cells_in_box mismatches " + std::to_string(cell_mismatch) + "/" + std::to_string(kOracleCases) + " (" +
            std::to_string(nonempty) + " non-empty); collision disagreements " + std::to_string(disagreements) +
            " over " + std::to_string(steps) + " steps (" + std::to_string(positives) + " overlapping, " +
            std::to_string(boundary) + " in the boundary band) | " + rt};
}

struct AlignmentRun
{
  std::vector<LossRecord> history;
  AlignmentAccuracy accuracy;
  bool diverged = false;
};

AlignmentRun alignment_run(const ExperimentConfig & cfg, const std::vector<PreparedScene> & data)
{
  PlannerModel model(cfg.model, cfg.vlp, 0);
  TrainConfig tc = cfg.optim;
  tc.seed = 0;
  const TrainResult tr = train(model, data, tc);
  AlignmentRun out{tr.history, {0.0, 0.0}, tr.diverged};
  const int batches = static_cast<int>(data.size()) / cfg.optim.batch_size;
  for (int b = 0; b < batches; ++b) {
    std::vector<const PreparedScene *> batch;
    for (int j = 0; j < cfg.optim.batch_size; ++j) {
      batch.push_back(&data[static_cast<std::size_t>(b * cfg.optim.batch_size + j)]);
    }
    const AlignmentAccuracy a = alignment_accuracy(model, batch);
    out.accuracy.alp += a.alp / batches;
    out.accuracy.slp += a.slp / batches;
  }
  return out;
}

Verdict a8(const Context & ctx)
{
  ExperimentConfig cfg = ctx.base;
  cfg.vlp.slp = true;
  cfg.vlp.alp = true;
  cfg.data.train_size = kAlignmentScenes;
  cfg.optim.steps = kAlignmentSteps;
  EmbeddingCache cache(make_text_encoder(cfg.vlp.encoder, cfg.vlp.text_dim));
  const auto data = prepare_scenes(train_scenes(cfg, 0), cfg.vlp, &cache);
  const AlignmentRun first = alignment_run(cfg, data);
  const AlignmentRun second = alignment_run(cfg, data);

  double drift = first.history.size() == second.history.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(first.history.size(), second.history.size()); ++i) {
    const LossRecord & a = first.history[i];
    const LossRecord & b = second.history[i];
    drift = std::max(
      {drift, std::abs(a.total - b.total), std::abs(a.l_perc - b.l_perc), std::abs(a.l_pred - b.l_pred),
       std::abs(a.l_plan - b.l_plan), std::abs(a.l_slp - b.l_slp), std::abs(a.l_alp - b.l_alp)});
  }
  const bool pass = !first.diverged && first.accuracy.alp >= kAlignmentTarget &&
                    first.accuracy.slp >= kAlignmentTarget && drift <= kHistoryTol;
  return {pass, "ALP accuracy " + fmt(first.accuracy.alp) + ", SLP accuracy " + fmt(first.accuracy.slp) +
                  " (mean over " + std::to_string(kAlignmentScenes / cfg.optim.batch_size) + " training batches of " +
                  std::to_string(cfg.optim.batch_size) + " after " + std::to_string(kAlignmentSteps) +
                  " steps); max loss-history difference between two runs " + fmt(drift, 3)};
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Acceptance suite"};
  std::string runs_dir = "acceptance_runs";
  std::string config = VLP_ACCEPTANCE_CONFIG;
  std::string only;
  bool fresh = false;
  app.add_option("--runs", runs_dir, "cache directory for study runs")->capture_default_str();
  app.add_option("--config", config, "base experiment config")->capture_default_str();
  app.add_option("--only", only, "comma list of criteria, e.g. A1,A7");
  app.add_flag("--fresh", fresh, "delete the run cache first");
  CLI11_PARSE(app, argc, argv);

  std::set<std::string> selected;
  std::stringstream list(only);
  for (std::string item; std::getline(list, item, ',');) {
    if (!item.empty()) {
      selected.insert(item);
    }
  }
  if (fresh) {
    fs::remove_all(runs_dir);
  }

  Context ctx{runs_dir, ExperimentConfig::load(config)};
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
    {"A1", [] { return a1(); }},
    {"A2", [&] { return a2(ctx); }},
    {"A7", [] { return a7(); }},
    {"A8", [&] { return a8(ctx); }},
    {"A3", [&] { return a3(ctx); }},
    {"A4", [&] { return a4(ctx); }},
    {"A5", [&] { return a5(ctx); }},
    {"A6", [&] { return a6(ctx); }},
  };
  const std::map<std::string, double> wall_budgets = {{"A1", kBudgetA1}, {"A2", kBudgetA2}};

  int failures = 0;
  for (const auto & [id, run] : criteria) {
    if (!selected.empty() && !selected.contains(id)) {
      continue;
    }
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception & e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (auto it = wall_budgets.find(id); it != wall_budgets.end() && secs >= it->second) {
      v.pass = false;
      v.detail += " | over budget";
    }
    failures += v.pass ? 0 : 1;
    std::cout << id << " " << (v.pass ? "PASS" : "FAIL") << " " << v.detail << " [" << fmt(secs, 3) << " s]"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
