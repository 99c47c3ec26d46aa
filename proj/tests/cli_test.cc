// Copyright 2026 The soapsim Authors
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

#include "cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "soapsim/cost_model.h"
#include "soapsim/serialization.h"
#include "soapsim/simulator.h"
#include "soapsim/task_graph.h"
#include "test_util.h"

namespace soapsim {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("soapsim_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  // Writes a one-op graph and a two-device topology.
  void write_tiny() {
    OperatorGraph g({testing::matmul("fc", 8, 16, 32, 16 * 32 * 4)}, {});
    write_file(path("g.json"), write_graph(g));
    write_file(path("t.json"), write_topology(testing::mesh(2, 1e9, 1e-6)));
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, MissingTopologyIsInputError) {
  write_tiny();
  const std::string missing = path("nope.json");
  EXPECT_EQ(run({"simulate", "--graph", path("g.json"), "--topology", missing}),
            cli::kExitInputError);
  EXPECT_NE(err_.str().find(missing), std::string::npos) << err_.str();
}

TEST_F(CliTest, BadFlagsAreInputErrors) {
  write_tiny();
  EXPECT_EQ(run({"simulate", "--graph", path("g.json"), "--topology", path("t.json"),
                 "--mode", "sideways"}),
            cli::kExitInputError);
  EXPECT_EQ(run({"frobnicate"}), cli::kExitInputError);
  EXPECT_EQ(run({"generate", "--model", "vgg"}), cli::kExitInputError);
}

TEST_F(CliTest, OptimizeEmitsValidStrategy) {
  write_tiny();
  ASSERT_EQ(run({"optimize", "--graph", path("g.json"), "--topology", path("t.json"),
                 "--budget-seconds", "1", "--seed", "3", "--out", path("s.json")}),
            cli::kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("best_cost_seconds"), std::string::npos);
  EXPECT_NE(out_.str().find("termination"), std::string::npos);
  OperatorGraph g = load_graph(path("g.json"));
  DeviceTopology t = load_topology(path("t.json"));
  EXPECT_TRUE(validate_strategy(g, t, load_strategy(path("s.json"), g, t)).ok());
  EXPECT_EQ(run({"check", "--graph", path("g.json"), "--topology", path("t.json"), "--strategy",
                 path("s.json")}),
            cli::kExitOk);
}

TEST_F(CliTest, OptimizeThenSimulateAgrees) {
  ASSERT_EQ(run({"generate", "--model", "lenet-like", "--batch", "8", "--image", "12",
                 "--channels", "2", "--hidden", "8", "--graph-out", path("g.json"),
                 "--topology", "p100-node", "--topology-out", path("t.json")}),
            cli::kExitOk)
      << err_.str();
  ASSERT_EQ(run({"optimize", "--graph", path("g.json"), "--topology", path("t.json"),
                 "--max-proposals", "300", "--min-proposals", "300", "--seed", "5", "--out",
                 path("s.json"), "--report", path("r.json")}),
            cli::kExitOk)
      << err_.str();
  OperatorGraph g = load_graph(path("g.json"));
  DeviceTopology t = load_topology(path("t.json"));
  SearchReport report = parse_report(read_file(path("r.json")), g, t);
  ASSERT_EQ(run({"simulate", "--graph", path("g.json"), "--topology", path("t.json"),
                 "--strategy", path("s.json")}),
            cli::kExitOk)
      << err_.str();
  std::istringstream lines(out_.str());
  std::string key;
  double makespan = 0.0;
  lines >> key >> makespan;
  EXPECT_EQ(key, "makespan_seconds");
  EXPECT_EQ(makespan, report.best_cost);
  // And in-process, without going through text.
  CostProfile p;
  TaskGraph tg = TaskGraph::build(g, t, load_strategy(path("s.json"), g, t), p);
  EXPECT_EQ(full_simulate(tg).makespan, report.best_cost);
}

TEST_F(CliTest, SameSeedSameReportBytes) {
  ASSERT_EQ(run({"generate", "--model", "rnn3", "--steps", "2", "--batch", "4", "--hidden", "8",
                 "--vocab", "16", "--graph-out", path("g.json"), "--topology", "p100-node",
                 "--topology-out", path("t.json")}),
            cli::kExitOk);
  for (const char* name : {"a.json", "b.json"}) {
    ASSERT_EQ(run({"optimize", "--graph", path("g.json"), "--topology", path("t.json"),
                   "--max-proposals", "400", "--min-proposals", "400", "--seed", "11",
                   "--init", "data", "--init", "random", "--init", "random", "--report",
                   path(name)}),
              cli::kExitOk)
        << err_.str();
  }
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
}

TEST_F(CliTest, CheckDeltaOnNmtLike) {
  ASSERT_EQ(run({"generate", "--model", "nmt-like", "--steps", "3", "--batch", "8", "--hidden",
                 "16", "--vocab", "32", "--graph-out", path("g.json"), "--topology",
                 "p100-node", "--topology-out", path("t.json")}),
            cli::kExitOk);
  ASSERT_EQ(run({"simulate", "--graph", path("g.json"), "--topology", path("t.json"),
                 "--check-delta", "100", "--seed", "2"}),
            cli::kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("check_delta ok 100"), std::string::npos) << out_.str();
}

TEST_F(CliTest, SimulateWritesExports) {
  write_tiny();
  ASSERT_EQ(run({"simulate", "--graph", path("g.json"), "--topology", path("t.json"), "--trace",
                 path("trace.json"), "--csv", path("tl.csv"), "--dot", path("tg.dot"),
                 "--mode", "full-iteration"}),
            cli::kExitOk)
      << err_.str();
  EXPECT_NE(read_file(path("trace.json")).find("traceEvents"), std::string::npos);
  EXPECT_NE(read_file(path("tl.csv")).find("fc:0,d0"), std::string::npos);
  EXPECT_NE(read_file(path("tg.dot")).find("digraph"), std::string::npos);
  EXPECT_NE(out_.str().find("busy_seconds d0"), std::string::npos);
}

TEST_F(CliTest, EnumerateListsConfigs) {
  write_tiny();
  ASSERT_EQ(run({"enumerate", "--graph", path("g.json"), "--topology", path("t.json"), "--op",
                 "fc", "--max-degree", "2"}),
            cli::kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("configs 3"), std::string::npos) << out_.str();
  EXPECT_EQ(run({"enumerate", "--graph", path("g.json"), "--topology", path("t.json"), "--op",
                 "nope"}),
            cli::kExitInputError);
}

TEST_F(CliTest, CheckRejectsInvalidStrategy) {
  write_tiny();
  write_file(path("s.json"),
             R"({"format_version": 1, "configs": [{"op": "fc", "degrees": {"sample": 3},
                 "assignment": ["d0", "d1", "d0"]}]})");
  EXPECT_EQ(run({"check", "--graph", path("g.json"), "--topology", path("t.json"), "--strategy",
                 path("s.json")}),
            cli::kExitInputError);
  EXPECT_EQ(run({"check", "--graph", path("g.json")}), cli::kExitOk);
  EXPECT_NE(out_.str().find("graph: ok (1 ops, 0 tensors)"), std::string::npos) << out_.str();
}

}  // namespace
}  // namespace soapsim
