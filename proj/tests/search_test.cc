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

#include "soapsim/search.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "soapsim/error.h"
#include "soapsim/generators.h"
#include "soapsim/simulator.h"
#include "test_util.h"

namespace soapsim {
namespace {

using testing::degrees;
using testing::matmul;
using testing::mesh;
using testing::on_device;

double simulate(const OperatorGraph& g, const DeviceTopology& t, const CostProfile& p,
                const ParallelizationStrategy& s, BuildOptions b = {}) {
  TaskGraph tg = TaskGraph::build(g, t, s, p, b);
  return full_simulate(tg).makespan;
}

TEST(AcceptTest, ImprovementsAndTiesAlwaysAccepted) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(accept(2.0, 1.0, 1e9, rng));
    EXPECT_TRUE(accept(2.0, 2.0, 1e9, rng));
  }
}

TEST(AcceptTest, FrequencyMatchesClosedForm) {
  Rng rng(2);
  int yes = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) yes += accept(1.0, 1.0 + std::log(2.0), 1.0, rng);
  EXPECT_NEAR(static_cast<double>(yes) / trials, 0.5, 0.02);
}

TEST(AcceptTest, InfiniteBetaIsGreedy) {
  Rng rng(3);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(accept(1.0, 1.0 + 1e-12, inf, rng));
}

TEST(DefaultBetaTest, FivePercentRegressionAcceptedOneInTen) {
  const double cost0 = 0.37;
  const double beta = default_beta(cost0);
  EXPECT_NEAR(std::exp(-beta * 0.05 * cost0), 0.1, 1e-12);
}

TEST(ProposeTest, ChangesAtMostOneOp) {
  std::mt19937_64 gen(4);
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    OperatorGraph g = testing::random_graph(gen);
    DeviceTopology t = mesh(4);
    auto s = random_strategy(g, t, 4, trial);
    auto next = propose(s, g, t, 4, rng);
    int diff = 0;
    for (std::size_t i = 0; i < s.configs.size(); ++i) diff += !(s.configs[i] == next.configs[i]);
    EXPECT_LE(diff, 1);
    EXPECT_TRUE(validate_strategy(g, t, next).ok());
  }
}

TEST(ProposeTest, SingleOpGraph) {
  OperatorGraph g({matmul("m", 4, 4, 4)}, {});
  DeviceTopology t = mesh(2);
  Rng rng(6);
  auto s = data_parallel_strategy(g, t);
  auto next = propose(s, g, t, 2, rng);
  EXPECT_EQ(next.configs.size(), 1u);
  EXPECT_TRUE(validate_strategy(g, t, next).ok());
}

// Monte Carlo on an op with two configs (one device each): q(A->B) and
// q(B->A) agree within three standard deviations.
TEST(ProposeTest, SymmetricOnTwoConfigs) {
  OperatorGraph g({matmul("m", 4, 4, 4)}, {});
  DeviceTopology t = mesh(2);
  ConfigSpace space(g, t, 1);
  ASSERT_EQ(space.num_choices(0), 2.0);
  ParallelizationStrategy a{{on_device(0)}};
  ParallelizationStrategy b{{on_device(1)}};
  Rng rng(7);
  const int trials = 100000;
  int ab = 0;
  int ba = 0;
  for (int i = 0; i < trials; ++i) {
    ab += propose(a, g, t, 1, rng) == b;
    ba += propose(b, g, t, 1, rng) == a;
  }
  const double pab = static_cast<double>(ab) / trials;
  const double pba = static_cast<double>(ba) / trials;
  const double sigma = std::sqrt(2 * 0.25 / trials);
  EXPECT_LT(std::abs(pab - pba), 3 * sigma);
}

// Every (degree map, assignment) pair is drawn with the same frequency, so
// q(A->B) = 1 / (number of pairs) = q(B->A) for every A and B.
TEST(ProposeTest, UniformOverPairs) {
  OperatorGraph g({matmul("m", 4, 4, 4)}, {});
  DeviceTopology t = mesh(2);
  ConfigSpace space(g, t, 2);
  const double pairs = space.num_choices(0);
  ASSERT_EQ(pairs, 10.0);
  std::map<std::vector<std::int64_t>, int> by_config;
  Rng rng(8);
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    Proposal p = propose_change(space, rng);
    std::vector<std::int64_t> key(p.config.degrees.degree.begin(), p.config.degrees.degree.end());
    for (std::size_t d : p.config.assignment) key.push_back(100 + static_cast<std::int64_t>(d));
    ++by_config[key];
  }
  ASSERT_EQ(by_config.size(), 10u);
  const double expected = trials / pairs;
  double chi2 = 0.0;
  for (const auto& [k, n] : by_config) chi2 += (n - expected) * (n - expected) / expected;
  // 9 degrees of freedom; 27.9 is the 0.999 quantile.
  EXPECT_LT(chi2, 27.9);
}

OperatorGraph small_chain() {
  GraphBuilder b;
  b.add(matmul("a", 4, 8, 64, 64 * 8 * 4));
  b.add(matmul("b", 4, 8, 8, 8 * 8 * 4));
  b.connect("a", "b");
  return b.build();
}

SearchParams quick_params(std::uint64_t seed) {
  SearchParams params;
  params.seed = seed;
  params.budget_seconds = 30;
  params.max_degree = 2;
  params.min_proposals = 200;
  params.max_proposals = 2000;
  return params;
}

TEST(McmcSearchTest, SameSeedSameReport) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  SearchParams params = quick_params(9);
  params.min_proposals = 500;
  params.max_proposals = 500;
  SearchReport a = mcmc_search(g, t, p, params);
  SearchReport b = mcmc_search(g, t, p, params);
  EXPECT_EQ(a, b);
  params.seed = 10;
  SearchReport c = mcmc_search(g, t, p, params);
  EXPECT_NE(a.trace, c.trace);
}

TEST(McmcSearchTest, BestCostMatchesSimulationOfBestStrategy) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  SearchReport r = mcmc_search(g, t, p, quick_params(11));
  EXPECT_EQ(r.best_cost, simulate(g, t, p, r.best_strategy));
  EXPECT_TRUE(validate_strategy(g, t, r.best_strategy).ok());
  EXPECT_EQ(r.chains.size(), 2u);
  EXPECT_EQ(r.best_cost, std::min(r.chains[0].best_cost, r.chains[1].best_cost));
}

TEST(McmcSearchTest, NoProposalsReturnsBestInitial) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  SearchParams params = quick_params(12);
  params.budget_seconds = 1e-12;
  auto dp = data_parallel_strategy(g, t);
  auto single = single_device_strategy(g, 1);
  params.initial = {dp, single};
  SearchReport r = mcmc_search(g, t, p, params);
  EXPECT_EQ(r.proposals, 0);
  EXPECT_EQ(r.termination, Termination::kBudget);
  const double cdp = simulate(g, t, p, dp);
  const double cs = simulate(g, t, p, single);
  EXPECT_EQ(r.best_cost, std::min(cdp, cs));
  EXPECT_EQ(r.best_strategy, cs < cdp ? single : dp);
}

TEST(McmcSearchTest, RunningBestIsNonincreasing) {
  OperatorGraph g = generate_model("lenet-like", {.batch = 4, .hidden = 8, .image = 8, .channels = 2});
  DeviceTopology t = cluster_with_devices(4);
  CostProfile p;
  SearchParams params = quick_params(13);
  params.verify_every = 10;
  SearchReport r = mcmc_search(g, t, p, params);
  std::map<std::size_t, double> last;
  std::map<std::size_t, std::int64_t> iteration;
  for (const TraceEntry& e : r.trace) {
    if (last.count(e.chain)) {
      EXPECT_LE(e.best_cost, last[e.chain]);
      EXPECT_GT(e.iteration, iteration[e.chain]);
    }
    EXPECT_LE(e.best_cost, r.chains[e.chain].initial_cost);
    last[e.chain] = e.best_cost;
    iteration[e.chain] = e.iteration;
  }
  for (const auto& [chain, best] : last) EXPECT_EQ(best, r.chains[chain].best_cost);
}

TEST(McmcSearchTest, GreedyNeverAcceptsWorse) {
  OperatorGraph g = generate_model("lenet-like", {.batch = 4, .hidden = 8, .image = 8, .channels = 2});
  DeviceTopology t = cluster_with_devices(4);
  CostProfile p;
  SearchParams params = quick_params(14);
  params.beta = std::numeric_limits<double>::infinity();
  params.trace_limit = 1000000;
  SearchReport r = mcmc_search(g, t, p, params);
  std::map<std::size_t, double> current;
  for (std::size_t c = 0; c < r.chains.size(); ++c) current[c] = r.chains[c].initial_cost;
  for (const TraceEntry& e : r.trace) {
    if (e.accepted) {
      EXPECT_LE(e.proposed_cost, current[e.chain]);
      current[e.chain] = e.proposed_cost;
    }
  }
}

TEST(McmcSearchTest, StagnationStopsChains) {
  OperatorGraph g({matmul("m", 4, 4, 4)}, {});
  DeviceTopology t = mesh(1);
  CostProfile p;
  SearchParams params;
  params.min_proposals = 100;
  params.budget_seconds = 30;
  SearchReport r = mcmc_search(g, t, p, params);
  EXPECT_EQ(r.termination, Termination::kStagnation);
  for (const ChainSummary& c : r.chains) {
    EXPECT_EQ(c.termination, Termination::kStagnation);
    EXPECT_GE(c.proposals, 100);
    EXPECT_LE(c.proposals, 101);
  }
}

TEST(McmcSearchTest, RejectsBadInputs) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2);
  CostProfile p;
  SearchParams params = quick_params(15);
  params.beta = -1.0;
  EXPECT_THROW(mcmc_search(g, t, p, params), InputError);
  params = quick_params(15);
  params.budget_seconds = 0.0;
  EXPECT_THROW(mcmc_search(g, t, p, params), InputError);
  params = quick_params(15);
  params.initial = {ParallelizationStrategy{}};
  EXPECT_THROW(mcmc_search(g, t, p, params), InputError);
}

TEST(McmcSearchTest, SkipsUnroutableProposals) {
  OperatorGraph g = small_chain();
  DeviceTopology t({{"a", "gpu", "n0"}, {"b", "gpu", "n1"}}, {});
  CostProfile p;
  SearchParams params = quick_params(16);
  params.initial = {single_device_strategy(g, 0)};
  SearchReport r = mcmc_search(g, t, p, params);
  EXPECT_TRUE(validate_strategy(g, t, r.best_strategy).ok());
  TaskGraph tg = TaskGraph::build(g, t, r.best_strategy, p);
  EXPECT_EQ(full_simulate(tg).makespan, r.best_cost);
}

// Independent brute force: every degree map of every op times every
// assignment, simulated from scratch.
double brute_force_optimum(const OperatorGraph& g, const DeviceTopology& t, const CostProfile& p,
                           std::int64_t max_degree) {
  std::vector<std::vector<ParallelizationConfig>> choices(g.num_ops());
  const std::size_t d = t.num_devices();
  for (std::size_t i = 0; i < g.num_ops(); ++i) {
    for (auto c : enumerate_configs(g.op(i), t, max_degree)) {
      const std::int64_t n = config_size(c);
      std::vector<std::size_t> a(static_cast<std::size_t>(n), 0);
      while (true) {
        c.assignment = a;
        choices[i].push_back(c);
        std::size_t k = 0;
        while (k < a.size() && ++a[k] == d) a[k++] = 0;
        if (k == a.size()) break;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  ParallelizationStrategy s;
  s.configs.resize(g.num_ops());
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == g.num_ops()) {
      try {
        best = std::min(best, simulate(g, t, p, s));
      } catch (const NoRouteError&) {
      }
      return;
    }
    for (const auto& c : choices[i]) {
      s.configs[i] = c;
      self(self, i + 1);
    }
  };
  rec(rec, 0);
  return best;
}

TEST(ExhaustiveTest, OneOpOneDevice) {
  OperatorGraph g({matmul("m", 4, 4, 4)}, {});
  DeviceTopology t = mesh(1);
  CostProfile p;
  ExhaustiveResult r = exhaustive_optimal(g, t, p);
  EXPECT_EQ(r.leaves, 1);
  const Operation& op = g.op(0);
  EXPECT_EQ(r.cost, task_exe_time(p, op, TensorRegion::full(op.output_shape), t.device(0)));
}

TEST(ExhaustiveTest, PruningAndSymmetryDoNotChangeOptimum) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  ExhaustiveOptions plain{.max_degree = 2, .prune = false, .symmetry_breaking = false};
  ExhaustiveOptions fast{.max_degree = 2};
  ExhaustiveResult a = exhaustive_optimal(g, t, p, plain);
  ExhaustiveResult b = exhaustive_optimal(g, t, p, fast);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.cost, brute_force_optimum(g, t, p, 2));
  EXPECT_EQ(a.cost, simulate(g, t, p, a.strategy));
  EXPECT_EQ(b.cost, simulate(g, t, p, b.strategy));
  EXPECT_LE(b.leaves, a.leaves);
  EXPECT_EQ(a.pruned, 0);
}

TEST(ExhaustiveProperty, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    OperatorGraph g = testing::random_graph(rng, {.min_ops = 2, .max_ops = 3});
    const std::size_t devices = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    DeviceTopology t = testing::random_topology(rng, devices);
    CostProfile p = testing::random_profile(rng);
    ExhaustiveOptions opt{.max_degree = 2, .cap = 2e5};
    if (exhaustive_space_size(g, t, {.max_degree = 2, .symmetry_breaking = false}) > 2e4) continue;
    ExhaustiveResult r = exhaustive_optimal(g, t, p, opt);
    EXPECT_EQ(r.cost, brute_force_optimum(g, t, p, 2)) << "trial " << trial;
  }
}

TEST(ExhaustiveTest, SlowLinksPruneWithoutLosingOptimum) {
  GraphBuilder b;
  b.add(matmul("a", 4, 8, 64));
  b.add(matmul("b", 4, 8, 8));
  b.add(matmul("c", 4, 8, 8));
  b.add(matmul("d", 4, 8, 8));
  b.connect("a", "b");
  b.connect("b", "c");
  b.connect("c", "d");
  OperatorGraph g = b.build();
  DeviceTopology t = mesh(3, 1e3);
  CostProfile p;
  ExhaustiveResult plain = exhaustive_optimal(g, t, p, {.max_degree = 2, .prune = false});
  ExhaustiveResult fast = exhaustive_optimal(g, t, p, {.max_degree = 2});
  EXPECT_EQ(plain.cost, fast.cost);
  EXPECT_GT(fast.pruned, 0);
  EXPECT_LT(fast.leaves, plain.leaves);
}

TEST(ExhaustiveTest, CapRefusesWithEstimate) {
  OperatorGraph g = generate_model("lenet-like");
  DeviceTopology t = cluster_with_devices(4);
  CostProfile p;
  try {
    exhaustive_optimal(g, t, p, {.max_degree = 4, .cap = 1000});
    FAIL();
  } catch (const CapExceededError& e) {
    EXPECT_GT(e.estimated_size(), 1000);
    EXPECT_EQ(e.estimated_size(), exhaustive_space_size(g, t, {.max_degree = 4, .cap = 1000}));
  }
}

TEST(ExhaustiveTest, SymmetryClasses) {
  auto uniform = device_symmetry_classes(mesh(4));
  EXPECT_EQ(uniform, (std::vector<std::size_t>(4, uniform[0])));
  DeviceTopology k80 = generate_topology("k80-cluster", {.nodes = 1, .gpus_per_node = 4});
  auto classes = device_symmetry_classes(k80);
  EXPECT_EQ(classes[0], classes[1]);
  EXPECT_EQ(classes[2], classes[3]);
  EXPECT_NE(classes[0], classes[2]);
  DeviceTopology mixed({{"a", "p100", "n0"}, {"b", "k80", "n0"}}, {{"a", "b", 1e9, 0.0}});
  auto m = device_symmetry_classes(mixed);
  EXPECT_NE(m[0], m[1]);
}

TEST(LocalOptimalityTest, GlobalOptimumIsLocallyOptimal) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  ExhaustiveResult best = exhaustive_optimal(g, t, p);
  LocalOptimalityResult r = local_optimality_check(best.strategy, g, t, p);
  EXPECT_TRUE(r.locally_optimal);
  EXPECT_EQ(r.cost, best.cost);
  EXPECT_EQ(r.neighbors, 2 * (10 - 1));  // the current config is skipped
}

TEST(LocalOptimalityTest, PerturbedOptimumHasImprovingNeighbor) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  ExhaustiveResult best = exhaustive_optimal(g, t, p);
  ConfigSpace space(g, t, 2);
  Rng rng(18);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Proposal prop = propose_change(space, rng);
    ParallelizationStrategy worse = best.strategy;
    worse.configs[prop.op] = prop.config;
    const double cost = simulate(g, t, p, worse);
    if (!(cost > best.cost)) continue;
    LocalOptimalityResult r = local_optimality_check(worse, g, t, p);
    ASSERT_FALSE(r.locally_optimal);
    ASSERT_TRUE(r.improvement.has_value());
    ParallelizationStrategy fixed = worse;
    fixed.configs[r.improvement->op] = r.improvement->config;
    EXPECT_EQ(simulate(g, t, p, fixed), r.improved_cost);
    EXPECT_LT(r.improved_cost, cost);
    return;
  }
  FAIL() << "no worse neighbor found";
}

TEST(LocalOptimalityTest, SplittingTheBottleneckHelps) {
  // One heavy op followed by a light one; splitting the heavy op over two
  // devices roughly halves the makespan.
  GraphBuilder b;
  b.add(matmul("heavy", 64, 256, 4096));
  b.add(matmul("light", 64, 2, 256));
  b.connect("heavy", "light");
  OperatorGraph g = b.build();
  DeviceTopology t = mesh(2, 1e12);
  CostProfile p;
  LocalOptimalityResult r = local_optimality_check(single_device_strategy(g, 0), g, t, p);
  EXPECT_FALSE(r.locally_optimal);
  ASSERT_TRUE(r.improvement.has_value());
  EXPECT_LT(r.improved_cost, r.cost);
}

TEST(LocalOptimalityTest, CapRefuses) {
  OperatorGraph g = generate_model("lenet-like");
  DeviceTopology t = cluster_with_devices(8);
  CostProfile p;
  EXPECT_THROW(local_optimality_check(data_parallel_strategy(g, t), g, t, p,
                                      {.max_degree = 8, .cap = 10}),
               CapExceededError);
}

TEST(McmcSearchTest, FindsTwoOpOptimumInMostSeeds) {
  OperatorGraph g = small_chain();
  DeviceTopology t = mesh(2, 1e6);
  CostProfile p;
  const double optimum = exhaustive_optimal(g, t, p).cost;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    hits += mcmc_search(g, t, p, quick_params(seed)).best_cost == optimum;
  }
  EXPECT_GE(hits, 9);
}

TEST(TerminationTest, Names) {
  EXPECT_EQ(to_string(Termination::kBudget), "budget");
  EXPECT_EQ(parse_termination("stagnation"), Termination::kStagnation);
  EXPECT_FALSE(parse_termination("timeout").has_value());
}

}  // namespace
}  // namespace soapsim
