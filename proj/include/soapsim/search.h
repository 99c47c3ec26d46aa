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

// Strategy search: Metropolis-Hastings over strategies with the simulated
// makespan as cost, an exhaustive branch-and-bound optimum for small
// instances, and a single-op neighborhood check.

#ifndef SOAPSIM_SEARCH_H_
#define SOAPSIM_SEARCH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "soapsim/core_model.h"
#include "soapsim/cost_model.h"
#include "soapsim/soap_space.h"
#include "soapsim/task_graph.h"

namespace soapsim {

struct SearchParams {
  // Unset: ln(10) / (0.05 * initial cost), so a 5% regression from the
  // starting point is accepted with probability 0.1. Infinity gives greedy
  // descent.
  std::optional<double> beta;
  double budget_seconds = 60.0;  // wall clock per chain
  std::int64_t max_degree = 8;
  std::uint64_t seed = 0;
  // Starting points, one chain each. Empty: data parallel plus one random.
  std::vector<ParallelizationStrategy> initial;
  // A chain stops once the proposals since its last improvement exceed half
  // of all its proposals, but not before min_proposals.
  std::int64_t min_proposals = 2000;
  // Hard proposal cap per chain; 0 for none.
  std::int64_t max_proposals = 0;
  // Every k accepted steps, compare the chain's makespan with a from-scratch
  // simulation and fail on mismatch. 0 disables.
  std::int64_t verify_every = 0;
  // Trace entries kept per chain, beyond those that improve the best cost.
  std::size_t trace_limit = 100000;
  // Run chains on separate threads.
  bool parallel = true;
  BuildOptions build;
};

enum class Termination : std::uint8_t { kBudget, kStagnation };

std::string_view to_string(Termination t);
std::optional<Termination> parse_termination(std::string_view text);

struct TraceEntry {
  std::size_t chain = 0;
  std::int64_t iteration = 0;
  double proposed_cost = 0.0;
  bool accepted = false;
  double best_cost = 0.0;  // running best of the chain after this step

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct ChainSummary {
  double initial_cost = 0.0;
  double best_cost = 0.0;
  double beta = 0.0;
  std::int64_t proposals = 0;
  std::int64_t accepted = 0;
  Termination termination = Termination::kBudget;

  friend bool operator==(const ChainSummary&, const ChainSummary&) = default;
};

struct SearchReport {
  ParallelizationStrategy best_strategy;
  double best_cost = 0.0;
  std::size_t best_chain = 0;
  std::int64_t proposals = 0;  // over all chains
  Termination termination = Termination::kBudget;  // of the best chain
  std::vector<ChainSummary> chains;
  std::vector<TraceEntry> trace;

  friend bool operator==(const SearchReport&, const SearchReport&) = default;
};

struct Proposal {
  std::size_t op = 0;
  ParallelizationConfig config;
};

// Uniform op, then a uniform (degree map, assignment) pair for it.
Proposal propose_change(const ConfigSpace& space, Rng& rng);

ParallelizationStrategy propose(const ParallelizationStrategy& s,
                                const OperatorGraph& graph,
                                const DeviceTopology& topology,
                                std::int64_t max_degree, Rng& rng);

// True with probability min(1, exp(beta * (cost_s - cost_s_star))).
bool accept(double cost_s, double cost_s_star, double beta, Rng& rng);

double default_beta(double initial_cost);

// Throws InputError for invalid inputs and SimulationError, with the chain
// index, if a chain fails.
SearchReport mcmc_search(const OperatorGraph& graph, const DeviceTopology& topology,
                         const CostProfile& profile, const SearchParams& params);

struct ExhaustiveOptions {
  std::int64_t max_degree = 2;
  bool prune = true;
  bool symmetry_breaking = true;
  // Refuse when the estimated number of strategies exceeds this.
  double cap = 1e9;
  BuildOptions build;
};

struct ExhaustiveResult {
  ParallelizationStrategy strategy;
  double cost = 0.0;
  std::int64_t leaves = 0;  // complete strategies simulated
  std::int64_t pruned = 0;  // subtrees cut by the bound
  double estimated_size = 0.0;
};

// Estimated strategy count: product over ops of their (degree map,
// assignment) choices, divided by the device-symmetry factor when enabled.
double exhaustive_space_size(const OperatorGraph& graph, const DeviceTopology& topology,
                             const ExhaustiveOptions& options);

// Depth-first enumeration with an admissible lower bound. Returns the first
// optimum in enumeration order. Throws CapExceededError when too large.
ExhaustiveResult exhaustive_optimal(const OperatorGraph& graph,
                                    const DeviceTopology& topology,
                                    const CostProfile& profile,
                                    const ExhaustiveOptions& options = {});

// Device equivalence classes used for symmetry breaking: two devices are
// interchangeable when they share kind and node and swapping them maps the
// topology onto itself. Returns a class id per device.
std::vector<std::size_t> device_symmetry_classes(const DeviceTopology& topology);

struct LocalOptimalityOptions {
  std::int64_t max_degree = 2;
  double cap = 1e7;  // maximum neighbors
  // Improvements smaller than this fraction of the cost are treated as ties.
  double relative_tolerance = 1e-12;
  BuildOptions build;
};

struct LocalOptimalityResult {
  bool locally_optimal = true;
  double cost = 0.0;
  std::int64_t neighbors = 0;
  std::optional<Proposal> improvement;
  double improved_cost = 0.0;
};

// Tries every single-op replacement (all degree maps and assignments).
LocalOptimalityResult local_optimality_check(const ParallelizationStrategy& s,
                                             const OperatorGraph& graph,
                                             const DeviceTopology& topology,
                                             const CostProfile& profile,
                                             const LocalOptimalityOptions& options = {});

}  // namespace soapsim

#endif  // SOAPSIM_SEARCH_H_
