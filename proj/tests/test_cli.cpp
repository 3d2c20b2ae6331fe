// Copyright 2026 The LVC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "lvc/cli.hpp"
#include "lvc/errors.hpp"
#include "lvc/json_io.hpp"
#include "test_util.hpp"

namespace lvc {
namespace {

using nlohmann::json;
using testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& x) { return x.string(); }

void write_small_world(const std::filesystem::path& path) {
  json_io::write_file(path, {{"n_images", 60}, {"n_test_images", 30}});
}

TEST(Cli, UsageAndHelp) {
  const CliRun unknown = cli({"frobnicate"});
  EXPECT_EQ(unknown.code, kExitValidation);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({}).code, kExitValidation);
  const CliRun help = cli({"verify", "--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("--train-emb"), std::string::npos);
  EXPECT_EQ(cli({"source", "--split", "x"}).code, kExitValidation);
}

TEST(Cli, ExitCodesForIoAndValidation) {
  TempDir dir("cli");
  EXPECT_EQ(cli({"source", "--detections", p(dir / "none.json"), "--split", p(dir / "s.json"),
                 "--out", p(dir / "o.json")})
                .code,
            kExitIo);
  json_io::write_file(dir / "bad.json", json::object());
  EXPECT_EQ(cli({"source", "--detections", p(dir / "bad.json"), "--split", p(dir / "bad.json"),
                 "--out", p(dir / "o.json")})
                .code,
            kExitValidation);
  // Outputs may never overwrite inputs.
  EXPECT_EQ(cli({"source", "--detections", p(dir / "bad.json"), "--split", p(dir / "s.json"),
                 "--out", p(dir / "bad.json")})
                .code,
            kExitValidation);
  EXPECT_EQ(json_io::read_file(dir / "bad.json"), json::object());
}

TEST(Cli, SeedList) {
  EXPECT_EQ(parse_seed_list("1..5"), (std::vector<unsigned long long>{1, 2, 3, 4, 5}));
  EXPECT_EQ(parse_seed_list("7,3"), (std::vector<unsigned long long>{7, 3}));
  EXPECT_EQ(parse_seed_list("9"), (std::vector<unsigned long long>{9}));
  EXPECT_THROW(parse_seed_list("5..1"), ConfigError);
  EXPECT_THROW(parse_seed_list("a"), ConfigError);
  EXPECT_THROW(parse_seed_list("1,,2"), ConfigError);
}

json artifacts_of(const std::filesystem::path& manifest) {
  return json_io::read_file(manifest)["artifacts"];
}

TEST(Cli, SimulatePipelineEndToEndAndDeterministic) {
  TempDir dir("cli");
  write_small_world(dir / "world.json");
  for (const char* sub : {"a", "b"}) {
    const CliRun sim = cli({"simulate", "--config", p(dir / "world.json"), "--seed", "3",
                         "--out-dir", p(dir / sub)});
    ASSERT_EQ(sim.code, kExitOk) << sim.err;
    const CliRun pipe = cli({"pipeline", "--config", p(dir / sub / "pipeline.json")});
    ASSERT_EQ(pipe.code, kExitOk) << pipe.err;
  }
  const json report = json_io::read_file(dir / "a" / "run" / "report.json");
  for (const char* row : {"baseline", "+sourcing", "+verification", "+correction"}) {
    EXPECT_TRUE(report["ablation"].contains(row)) << row;
    EXPECT_TRUE(report["ablation"][row].contains("nAP"));
  }
  EXPECT_TRUE(report.contains("ablation_without_ignores"));
  EXPECT_TRUE(report.contains("pseudo_labels"));

  const json sim_a = artifacts_of(dir / "a" / "manifest.json");
  const json run_a = artifacts_of(dir / "a" / "run" / "manifest.json");
  EXPECT_EQ(sim_a, artifacts_of(dir / "b" / "manifest.json"));
  EXPECT_EQ(run_a, artifacts_of(dir / "b" / "run" / "manifest.json"));
  EXPECT_EQ(run_a.size(), 8u);
  const json m = json_io::read_file(dir / "a" / "run" / "manifest.json");
  EXPECT_EQ(m["command"], "pipeline");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["config_sha256"].get<std::string>().size(), 64u);
}

TEST(Cli, StagewiseCommandsMatchPipeline) {
  TempDir dir("cli");
  write_small_world(dir / "world.json");
  const auto w = dir / "w";
  ASSERT_EQ(cli({"simulate", "--config", p(dir / "world.json"), "--seed", "4", "--out-dir",
                 p(w)})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"pipeline", "--config", p(w / "pipeline.json"), "--out-dir", p(dir / "run")})
                .code,
            kExitOk);
  auto ok = [](const CliRun& r) {
    EXPECT_EQ(r.code, kExitOk) << r.err;
  };
  ok(cli({"source", "--detections", p(w / "detections.json"), "--split", p(w / "split.json"),
          "--q", "0.8", "--out", p(dir / "c.json")}));
  ok(cli({"verify", "--candidates", p(dir / "c.json"), "--split", p(w / "split.json"),
          "--train-emb", p(w / "train_emb"), "--cand-emb", p(w / "det_emb"), "--k-auto",
          "--out-verified", p(dir / "v.json"), "--out-rejected", p(dir / "r.json")}));
  ok(cli({"train-corrector", "--pairs", p(w / "corrector_pairs.json"), "--seed", "4", "--out",
          p(dir / "m.json")}));
  ok(cli({"correct", "--model", p(dir / "m.json"), "--candidates", p(dir / "v.json"),
          "--oracle", p(w / "world_spec.json"), "--out", p(dir / "corr.json")}));
  ok(cli({"emit", "--detections", p(w / "detections.json"), "--verified", p(dir / "v.json"),
          "--split", p(w / "split.json"), "--out-ignore", p(dir / "ig.json")}));
  ok(cli({"assemble", "--base", p(w / "dataset.json"), "--split", p(w / "split.json"),
          "--pseudo", p(dir / "corr.json"), "--ignore", p(dir / "ig.json"), "--out",
          p(dir / "rs.json")}));
  ok(cli({"eval", "--dataset", p(w / "train_truth.json"), "--detections", p(dir / "corr.json"),
          "--split", p(w / "split.json"), "--report", p(dir / "rep.json"), "--pr-dir",
          p(dir / "pr"), "--proposals", p(w / "detections.json"), "--top-n", "100"}));

  const json run = artifacts_of(dir / "run" / "manifest.json");
  const json c = artifacts_of(dir / "c.json.run.json");
  EXPECT_EQ(c["c.json"], run["candidates.json"]);
  EXPECT_EQ(artifacts_of(dir / "v.json.run.json")["v.json"], run["verified.json"]);
  EXPECT_EQ(artifacts_of(dir / "m.json.run.json")["m.json"], run["corrector_model.json"]);
  EXPECT_EQ(artifacts_of(dir / "corr.json.run.json")["corr.json"], run["corrected.json"]);
  EXPECT_EQ(artifacts_of(dir / "ig.json.run.json")["ig.json"], run["ignores.json"]);
  EXPECT_EQ(artifacts_of(dir / "rs.json.run.json")["rs.json"], run["retrain_set.json"]);
  const json rep = json_io::read_file(dir / "rep.json");
  EXPECT_TRUE(rep.contains("nAP"));
  EXPECT_TRUE(rep.contains("AR50@100"));
  EXPECT_TRUE(std::filesystem::exists(dir / "pr" / "pr_1_iou50.csv"));
}

TEST(Cli, FlagsOverrideConfig) {
  TempDir dir("cli");
  write_small_world(dir / "world.json");
  const auto w = dir / "w";
  ASSERT_EQ(cli({"simulate", "--config", p(dir / "world.json"), "--seed", "5", "--out-dir",
                 p(w)})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"pipeline", "--config", p(w / "pipeline.json"), "--q", "0.95", "--k", "1",
                 "--out-dir", p(dir / "strict")})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"pipeline", "--config", p(w / "pipeline.json"), "--out-dir",
                 p(dir / "default")})
                .code,
            kExitOk);
  const json strict = json_io::read_file(dir / "strict" / "report.json");
  const json loose = json_io::read_file(dir / "default" / "report.json");
  EXPECT_EQ(strict["k"], 1);
  EXPECT_LT(strict["counts"]["candidates"].get<int>(), loose["counts"]["candidates"].get<int>());
  const json m = json_io::read_file(dir / "strict" / "manifest.json");
  EXPECT_EQ(m["config"]["params"]["q"], 0.95);
}

TEST(Cli, AblateWritesTable) {
  TempDir dir("cli");
  json_io::write_file(dir / "exp.json",
                      {{"world", {{"n_images", 60}, {"n_test_images", 30}}},
                       {"noise", json::object()},
                       {"params", json::object()}});
  const CliRun r = cli({"ablate", "--config", p(dir / "exp.json"), "--seeds", "1,2", "--out",
                     p(dir / "t.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json t = json_io::read_file(dir / "t.json");
  EXPECT_EQ(t["seeds"], json::array({1, 2}));
  EXPECT_EQ(t["per_seed"].size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "t.json.run.json"));
  json_io::write_file(dir / "bad.json", {{"world", json::object()}, {"extra", 1}});
  EXPECT_EQ(cli({"ablate", "--config", p(dir / "bad.json"), "--out", p(dir / "u.json")}).code,
            kExitValidation);
}

}  // namespace
}  // namespace lvc
