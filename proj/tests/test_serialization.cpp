#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "formnav/serialization.hpp"
#include "json.hpp"

using namespace formnav;
using json = nlohmann::json;

namespace {

Scenario sample_scenario() {
  CorridorParams p;
  p.n_robots = 4;
  p.kind = FormationKind::kCircle;
  p.scale = 0.8;
  p.wide = 6.0;
  p.narrow = 2.2;
  p.length = 18.0;
  p.taper = 3.0;
  p.max_steps = 250;
  return build_corridor(p);
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("scenario json round-trips byte-identically") {
  const Scenario sc = sample_scenario();
  const std::string j1 = scenario_to_json(sc);
  const Scenario back = scenario_from_json(j1);
  const std::string j2 = scenario_to_json(back);
  CHECK(j1 == j2);

  CHECK(back.n_robots == sc.n_robots);
  CHECK(back.formation == sc.formation);
  CHECK(back.walls.size() == sc.walls.size());
  for (size_t k = 0; k < sc.walls.size(); ++k) {
    CHECK(back.walls[k].a.x == sc.walls[k].a.x);
    CHECK(back.walls[k].b.y == sc.walls[k].b.y);
  }
  CHECK(back.narrow_span[0] == sc.narrow_span[0]);
  CHECK(back.narrow_span[1] == sc.narrow_span[1]);
  CHECK(back.max_steps == sc.max_steps);
  for (size_t i = 0; i < sc.starts.size(); ++i) {
    CHECK(back.starts[i].x == sc.starts[i].x);
    CHECK(back.goals[i].y == sc.goals[i].y);
  }
}

TEST_CASE("scenario file save/load") {
  const Scenario sc = sample_scenario();
  const TempFile f{"test_scenario_tmp.json"};
  save_scenario(f.path, sc);
  const Scenario back = load_scenario(f.path);
  CHECK(scenario_to_json(back) == scenario_to_json(sc));

  CHECK_THROWS_AS(load_scenario("missing_dir/nothing.json"), IoError);
}

TEST_CASE("scenario validation") {
  const std::string good = scenario_to_json(sample_scenario());

  SUBCASE("unparseable text is an io error") {
    CHECK_THROWS_AS(scenario_from_json("{not json"), IoError);
  }
  SUBCASE("missing field") {
    json j = json::parse(good);
    j.erase("axis");
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("non-unit axis") {
    json j = json::parse(good);
    j["axis"] = {2.0, 0.0};
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("fewer than two robots") {
    json j = json::parse(good);
    j["starts"] = json::array({{0.0, 0.0}});
    j["goals"] = json::array({{5.0, 0.0}});
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("narrow wider than wide") {
    json j = json::parse(good);
    j["widths"]["narrow"] = 7.0;
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("unordered narrow span") {
    json j = json::parse(good);
    j["narrow_span"] = {9.0, 4.0};
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("degenerate wall segment") {
    json j = json::parse(good);
    j["walls"].push_back({1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(scenario_from_json(j.dump()), std::invalid_argument);
  }
}

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
  Policy policy(PolicyConfig{}, 42);
  RunConfig rc;
  rc.method = "afor";
  rc.corridor.n_robots = 5;
  rc.seeds = {1, 2, 3};
  rc.out_dir = "/tmp/run";

  const std::string j1 = checkpoint_to_json(policy, rc, 4096);
  LoadedCheckpoint lc = checkpoint_from_json(j1);
  const std::string j2 = checkpoint_to_json(lc.policy, lc.config, lc.step_count);
  CHECK(j1 == j2);

  CHECK(lc.step_count == 4096);
  CHECK(lc.config.method == "afor");
  CHECK(lc.config.corridor.n_robots == 5);
  CHECK(lc.config.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(lc.config.out_dir == "/tmp/run");
  CHECK(checkpoint_param_hash(lc.policy) == checkpoint_param_hash(policy));

  // weights actually survive
  const auto& pa = policy.params().all();
  const auto& pb = lc.policy.params().all();
  REQUIRE(pa.size() == pb.size());
  for (size_t k = 0; k < pa.size(); ++k)
    for (size_t j = 0; j < pa[k].value.data.size(); ++j)
      CHECK(pa[k].value.data[j] == pb[k].value.data[j]);

  const TempFile f{"test_ckpt_tmp.json"};
  save_checkpoint(f.path, policy, rc, 4096);
  const LoadedCheckpoint fromfile = load_checkpoint(f.path);
  CHECK(checkpoint_to_json(fromfile.policy, fromfile.config, fromfile.step_count) == j1);
}

TEST_CASE("param hash distinguishes different weights") {
  Policy a(PolicyConfig{}, 42);
  Policy b(PolicyConfig{}, 43);
  const std::string ha = checkpoint_param_hash(a);
  CHECK(ha.size() == 16);
  CHECK(ha != checkpoint_param_hash(b));

  Policy c(PolicyConfig{}, 42);
  CHECK(checkpoint_param_hash(c) == ha);
  c.params().all()[0].value.data[0] += 1e-9;
  CHECK(checkpoint_param_hash(c) != ha);
}

TEST_CASE("malformed checkpoints raise CheckpointError") {
  Policy policy(PolicyConfig{}, 42);
  const std::string good = checkpoint_to_json(policy, RunConfig{}, 10);

  SUBCASE("unparseable") {
    CHECK_THROWS_AS(checkpoint_from_json("garbage"), CheckpointError);
  }
  SUBCASE("missing params") {
    json j = json::parse(good);
    j.erase("params");
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), CheckpointError);
  }
  SUBCASE("dropped tensor") {
    json j = json::parse(good);
    j["params"].erase(0);
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), CheckpointError);
  }
  SUBCASE("renamed tensor") {
    json j = json::parse(good);
    j["params"][0]["name"] = "imposter";
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), CheckpointError);
  }
  SUBCASE("wrong shape") {
    json j = json::parse(good);
    j["params"][0]["shape"] = {3, 3};
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), CheckpointError);
  }
  SUBCASE("value count does not match shape") {
    json j = json::parse(good);
    j["params"][0]["values"].push_back(0.5);
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("missing_dir/none.json"), CheckpointError);
  }
}

TEST_CASE("metrics report schema") {
  MetricsReport rep;
  rep.scenario = "corridor-wedge-n5";
  rep.method = "afor";
  rep.seeds = {0, 1, 2};
  rep.sr_mean = 80.0;
  rep.sr_per_seed = {100.0, 100.0, 40.0};
  rep.cfi = {{"0.5", 0.81}, {"0.3", 0.75}, {"0.1", 0.60}, {"0.03", 0.55}};
  rep.oscillation_mean = 0.12;

  const std::string text = metrics_to_json(rep);
  const json j = json::parse(text);

  CHECK(j["scenario"] == "corridor-wedge-n5");
  CHECK(j["method"] == "afor");
  CHECK(j["seeds"].size() == 3);
  CHECK(j["sr_mean"] == 80.0);
  CHECK(j["sr_per_seed"][2] == 40.0);
  CHECK(j["cfi"]["0.5"] == 0.81);
  CHECK(j["cfi"]["0.03"] == 0.55);
  CHECK(j["oscillation_mean"] == 0.12);

  // the delta sweep keys appear widest-first, matching the published table
  const size_t k05 = text.find("\"0.5\"");
  const size_t k03 = text.find("\"0.3\"");
  const size_t k01 = text.find("\"0.1\"");
  const size_t k003 = text.find("\"0.03\"");
  REQUIRE(k05 != std::string::npos);
  CHECK(k05 < k03);
  CHECK(k03 < k01);
  CHECK(k01 < k003);

  // emitted report satisfies the shipped schema's required fields and types
  const std::string schema_text =
      read_text_file(std::string(FORMNAV_DOCS_DIR) + "/metrics.schema.json");
  const json schema = json::parse(schema_text);
  REQUIRE(schema.contains("required"));
  for (const auto& field : schema["required"]) {
    const std::string name = field.get<std::string>();
    CHECK_MESSAGE(j.contains(name), "missing required field ", name);
    const json& spec = schema["properties"][name];
    const std::string type = spec["type"].get<std::string>();
    if (type == "string") CHECK(j[name].is_string());
    if (type == "number") CHECK(j[name].is_number());
    if (type == "array") CHECK(j[name].is_array());
    if (type == "object") CHECK(j[name].is_object());
  }
}

TEST_CASE("train log lines are compact json records") {
  TrainLogRecord rec;
  rec.iter = 3;
  rec.env_steps = 3072;
  rec.mean_return = -12.5;
  rec.sr_eval = 60.0;
  rec.cfi_eval = 0.44;
  rec.loss = 1.75;
  rec.clip_frac = 0.125;
  rec.kl = 0.004;
  rec.entropy = 1.4;

  const std::string line = train_log_line(rec);
  CHECK(line.find('\n') == std::string::npos);
  const json j = json::parse(line);
  CHECK(j["iter"] == 3);
  CHECK(j["env_steps"] == 3072);
  CHECK(j["mean_return"] == -12.5);
  CHECK(j["sr_eval"] == 60.0);
  CHECK(j["cfi_eval"] == 0.44);
  CHECK(j["loss"] == 1.75);
  CHECK(j["clip_frac"] == 0.125);
  CHECK(j["kl"] == 0.004);
  CHECK(j["entropy"] == 1.4);

  CHECK(train_log_line(rec) == line);  // stable bytes

  const TempFile f{"test_log_tmp.jsonl"};
  const std::vector<TrainLogRecord> log{rec, rec};
  save_train_log(f.path, log);
  const std::string body = read_text_file(f.path);
  CHECK(body == line + "\n" + line + "\n");
}

TEST_CASE("text file helpers") {
  const TempFile f{"test_text_tmp.txt"};
  write_text_file(f.path, "hello\nworld\n");
  CHECK(read_text_file(f.path) == "hello\nworld\n");
  CHECK_THROWS_AS(read_text_file("missing_dir/none.txt"), IoError);
}
