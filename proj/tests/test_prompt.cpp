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

#include "fd_check.hpp"
#include "vlp/errors.hpp"
#include "vlp/prompt.hpp"
#include "vlp/text_encoder.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace vlp;

namespace
{

AgentRecord example_car()
{
  AgentRecord a;
  a.label = AgentClass::Car;
  a.bev_box = {1.0, 2.0, 4.5, 1.8, 0.0};
  a.future_traj = {{1.0, 2.5}, {1.0, 3.0}};
  return a;
}

std::string temp_path(const char * name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("foreground prompt renders the canonical sentence")
{
  CHECK(
    render_prompt(PromptRole::AlpFg, prompt_record(example_car()), FieldMask::all()) ==
    "A car at (1.00, 2.00), size 4.50 by 1.80 meters, heading 0.00 rad, moving to (1.00, 2.50), (1.00, 3.00).");
  CHECK(
    render_prompt(PromptRole::AlpFg, prompt_record(example_car()), FieldMask::parse("label,bbox")) ==
    "A car at (1.00, 2.00), size 4.50 by 1.80 meters, heading 0.00 rad.");
  CHECK(
    render_prompt(PromptRole::AlpFg, prompt_record(example_car()), FieldMask::parse("bbox,traj")) ==
    "An agent at (1.00, 2.00), size 4.50 by 1.80 meters, heading 0.00 rad, moving to (1.00, 2.50), (1.00, 3.00).");
}

TEST_CASE("ego and lane prompts")
{
  EgoRecord ego;
  ego.footprint = {0.0, 0.0, 4.6, 1.9, 0.0};
  ego.command = Command::GoStraight;
  for (int i = 1; i <= 6; ++i) {
    ego.gt_plan.push_back({2.0 * i, 0.0});
  }
  const std::string slp = render_prompt(PromptRole::SlpEgo, slp_ego_record(ego), FieldMask::all());
  CHECK(slp ==
        "The ego car should go-straight, driving to (2.00, 0.00), (4.00, 0.00), (6.00, 0.00), (8.00, 0.00), "
        "(10.00, 0.00), (12.00, 0.00).");
  CHECK(render_prompt(PromptRole::SlpEgo, slp_ego_record(ego), FieldMask::parse("command")) ==
        "The ego car should go-straight.");
  CHECK(render_prompt(PromptRole::AlpEgo, alp_ego_record(ego), FieldMask::parse("bbox")) ==
        "The ego vehicle at (0.00, 0.00), size 4.60 by 1.90 meters.");
  const LaneElement lane{LaneKind::Crossing, {{1, -0.004}, {2, 0}, {3, 0}, {4, 0}}, 3.0};
  CHECK(render_prompt(PromptRole::AlpLane, prompt_record(lane), FieldMask::all()) ==
        "A lane crossing along (1.00, 0.00), (2.00, 0.00), (3.00, 0.00) width 3.00 meters.");
}

TEST_CASE("rendering errors and mask parsing")
{
  PromptRecord empty;
  CHECK_THROWS_AS(render_prompt(PromptRole::AlpFg, empty, FieldMask::all()), RenderError);
  CHECK_NOTHROW(render_prompt(PromptRole::AlpFg, empty, FieldMask::parse("")));
  CHECK_THROWS_AS(FieldMask::parse("label,colour"), ConfigError);
  CHECK(FieldMask::parse(" traj , label ").to_string() == "label,traj");
  CHECK(format_number(-0.001) == "0.00");
  AgentRecord c = example_car();
  c.label = AgentClass::Construction;
  CHECK(render_prompt(PromptRole::AlpFg, prompt_record(c), FieldMask::parse("label")) == "A construction vehicle.");
}

TEST_CASE("templates list only rendered placeholders")
{
  for (auto role : {PromptRole::AlpEgo, PromptRole::AlpFg, PromptRole::AlpLane, PromptRole::SlpEgo}) {
    for (int bits = 0; bits < 16; ++bits) {
      const FieldMask m{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0};
      const auto t = PromptTemplate::make(role, m);
      for (auto [key, on] : {std::pair{"{label}", t.field_mask.label}, {"{bbox}", t.field_mask.bbox},
                             {"{traj}", t.field_mask.traj}, {"{command}", t.field_mask.command}}) {
        CHECK((t.template_text.find(key) != std::string::npos) == on);
      }
    }
  }
}

TEST_CASE("prompts are injective over distinct agents")
{
  const auto scenes = make_dataset(WorldConfig::city_a(), 20, 0);
  for (const auto & s : scenes) {
    std::set<std::string> seen;
    for (const auto & a : s.agents) {
      CHECK(seen.insert(render_prompt(PromptRole::AlpFg, prompt_record(a), FieldMask::all())).second);
    }
  }
}

TEST_CASE("hash encoders are deterministic, unit norm and distinguish strings")
{
  for (const char * spec : {"hash-ngram", "hash-word"}) {
    const auto enc = make_text_encoder(spec, 64);
    const auto a = enc->encode("a");
    CHECK(a.size() == 64);
    CHECK(a.norm() == doctest::Approx(1.0));
    CHECK((a - enc->encode("a")).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - enc->encode("b")).norm() > 1e-3);
    CHECK_THROWS_AS(enc->encode(""), ArgumentError);
  }
  CHECK_THROWS_AS(make_text_encoder("clip-vit", 64), BackendError);
  // Nearby numbers share character n-grams.
  const HashNgramEncoder ng;
  const double near = ng.encode("moving to (1.00, 2.50)").dot(ng.encode("moving to (1.00, 2.60)"));
  const double far = ng.encode("moving to (1.00, 2.50)").dot(ng.encode("moving to (-9.70, 14.20)"));
  CHECK(near > far);
}

TEST_CASE("embedding cache")
{
  EmbeddingCache cache(make_text_encoder("hash-ngram", 64));
  const auto fresh = cache.encoder().encode("A car.");
  const auto first = cache.encode("A car.");
  const auto hit = cache.encode("A car.");
  CHECK(cache.misses() == 1);
  CHECK(cache.hits() == 1);
  CHECK((fresh - hit).cwiseAbs().maxCoeff() == 0.0);
  CHECK((first - hit).cwiseAbs().maxCoeff() == 0.0);

  const auto path = temp_path("vlp_cache_test.bin");
  cache.save(path);
  EmbeddingCache restored(make_text_encoder("hash-ngram", 64));
  restored.load(path);
  CHECK((restored.encode("A car.") - fresh).cwiseAbs().maxCoeff() == 0.0);
  CHECK(restored.misses() == 0);

  EmbeddingCache other(make_text_encoder("hash-word", 64));
  CHECK_THROWS_AS(other.load(path), BackendError);
  std::filesystem::remove(path);
}

TEST_CASE("precomputed backend serves stored vectors")
{
  const auto path = temp_path("vlp_store_test.bin");
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(8, 0.0, 1.0);
  write_embedding_store(path, "test-lm", 8, {{"hello", v}});
  const auto enc = make_text_encoder("precomputed:" + path, 8);
  CHECK(enc->dim() == 8);
  CHECK(enc->backend_id() == "test-lm");
  CHECK((enc->encode("hello") - v).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(enc->encode("unknown"), BackendError);
  std::filesystem::remove(path);
}

TEST_CASE("expectation features")
{
  std::mt19937_64 rng(1);
  nn::ParamStore store;
  const auto adapter = make_adapter(store, "adapter", 64, 16, rng);
  CHECK(adapter.hidden_dim() == 64);
  CHECK(adapter.parameter_count() == 64 * 64 + 64 + 64 * 16 + 16);
  CHECK(store.scalar_count() == adapter.parameter_count());
  EmbeddingCache cache(make_text_encoder("hash-ngram", 64));
  const std::vector<std::string> one = {"A car."};
  const auto single = expectation_features(one, cache, adapter);
  CHECK(single.rows() == 1);
  CHECK(single.cols() == 16);
  const ag::Mat direct = adapter(ag::Var(ag::Mat(cache.encode("A car.").transpose()))).value();
  CHECK((single.value() - direct).cwiseAbs().maxCoeff() == 0.0);

  const std::vector<std::string> dup = {"A bus.", "A bus."};
  const auto rows = expectation_features(dup, cache, adapter).value();
  CHECK((rows.row(0) - rows.row(1)).cwiseAbs().maxCoeff() == 0.0);

  EmbeddingCache wide(make_text_encoder("hash-ngram", 32));
  CHECK_THROWS_AS(expectation_features(one, wide, adapter), ConfigError);

  const std::vector<std::string> prompts = {"A car.", "A bus at (1.00, 2.00).", "A lane divider."};
  std::vector<ag::Var> params;
  for (const auto & [n, p] : store.entries()) {
    params.push_back(p);
  }
  const ag::Mat w = vlp::testing::random_mat(rng, 3, 16);
  auto loss = [&] { return ag::sum(ag::mul(expectation_features(prompts, cache, adapter), ag::Var(w))); };
  CHECK(vlp::testing::fd_check(loss, params).max_rel_error < 1e-4);
}
