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

#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "soapsim/error.h"
#include "soapsim/simulator.h"

namespace soapsim {

std::string_view to_string(Termination t) {
  return t == Termination::kBudget ? "budget" : "stagnation";
}

std::optional<Termination> parse_termination(std::string_view text) {
  if (text == "budget") return Termination::kBudget;
  if (text == "stagnation") return Termination::kStagnation;
  return std::nullopt;
}

Proposal propose_change(const ConfigSpace& space, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, space.num_ops() - 1);
  Proposal p;
  p.op = pick(rng);
  p.config = space.sample(p.op, rng);
  return p;
}

ParallelizationStrategy propose(const ParallelizationStrategy& s,
                                const OperatorGraph& graph,
                                const DeviceTopology& topology,
                                std::int64_t max_degree, Rng& rng) {
  ConfigSpace space(graph, topology, max_degree);
  Proposal p = propose_change(space, rng);
  ParallelizationStrategy next = s;
  next.configs[p.op] = std::move(p.config);
  return next;
}

bool accept(double cost_s, double cost_s_star, double beta, Rng& rng) {
  if (cost_s_star <= cost_s) return true;
  const double alpha = std::exp(beta * (cost_s - cost_s_star));
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < alpha;
}

double default_beta(double initial_cost) {
  return std::log(10.0) / (0.05 * initial_cost);
}

namespace {

struct ChainOutput {
  ChainSummary summary;
  ParallelizationStrategy best;
  std::vector<TraceEntry> trace;
};

ChainOutput run_chain(std::size_t index, const ParallelizationStrategy& initial,
                      const OperatorGraph& graph, const DeviceTopology& topology,
                      const CostProfile& profile, const ConfigSpace& space,
                      const SearchParams& params) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  ChainOutput out;
  TaskGraph tg = TaskGraph::build(graph, topology, initial, profile, params.build);
  double cost = full_simulate(tg).makespan;
  ChainSummary& sum = out.summary;
  sum.initial_cost = cost;
  sum.best_cost = cost;
  sum.beta = params.beta.value_or(default_beta(cost));
  out.best = initial;

  std::seed_seq seq{static_cast<std::uint64_t>(params.seed >> 32),
                    static_cast<std::uint64_t>(params.seed & 0xffffffffu),
                    static_cast<std::uint64_t>(index)};
  Rng rng(seq);
  std::int64_t since_improvement = 0;

  while (true) {
    if (params.max_proposals > 0 && sum.proposals >= params.max_proposals) {
      sum.termination = Termination::kBudget;
      break;
    }
    if (std::chrono::duration<double>(Clock::now() - started).count() >=
        params.budget_seconds) {
      sum.termination = Termination::kBudget;
      break;
    }
    if (sum.proposals >= params.min_proposals && 2 * since_improvement > sum.proposals) {
      sum.termination = Termination::kStagnation;
      break;
    }

    Proposal p = propose_change(space, rng);
    ++sum.proposals;
    const ParallelizationConfig previous = tg.strategy().configs[p.op];
    double proposed = cost;
    bool accepted = true;
    bool feasible = true;
    if (!(p.config == previous)) {
      std::vector<TaskId> changed;
      try {
        changed = tg.reconfigure(p.op, p.config);
      } catch (const NoRouteError&) {
        feasible = false;
      }
      if (feasible) {
        proposed = delta_simulate(tg, changed).makespan;
        accepted = accept(cost, proposed, sum.beta, rng);
        if (accepted) {
          cost = proposed;
        } else {
          delta_simulate(tg, tg.reconfigure(p.op, previous));
        }
      } else {
        accepted = false;
      }
    }
    if (accepted) ++sum.accepted;

    bool improved = false;
    if (cost < sum.best_cost) {
      sum.best_cost = cost;
      out.best = tg.strategy();
      since_improvement = 0;
      improved = true;
    } else {
      ++since_improvement;
    }
    if (feasible && (improved || out.trace.size() < params.trace_limit)) {
      out.trace.push_back({index, sum.proposals, proposed, accepted, sum.best_cost});
    }

    if (accepted && params.verify_every > 0 && sum.accepted % params.verify_every == 0) {
      TaskGraph fresh = TaskGraph::build(graph, topology, tg.strategy(), profile, params.build);
      const double check = full_simulate(fresh).makespan;
      if (check != cost) {
        throw SimulationError("chain makespan " + std::to_string(cost) +
                              " differs from full simulation " + std::to_string(check) +
                              " at proposal " + std::to_string(sum.proposals));
      }
    }
  }
  return out;
}

}  // namespace

SearchReport mcmc_search(const OperatorGraph& graph, const DeviceTopology& topology,
                         const CostProfile& profile, const SearchParams& params) {
  if (params.beta && !(*params.beta > 0.0)) throw InputError("beta must be positive");
  if (!(params.budget_seconds > 0.0)) throw InputError("budget must be positive");
  if (params.max_degree < 1) throw InputError("max_degree must be at least 1");
  if (graph.num_ops() == 0) throw InputError("operator graph is empty");
  if (auto r = validate_graph(graph); !r.ok()) {
    throw InputError("invalid operator graph:\n" + r.to_string());
  }
  if (auto r = validate_topology(topology); !r.ok()) {
    throw InputError("invalid topology:\n" + r.to_string());
  }

  std::vector<ParallelizationStrategy> initial = params.initial;
  if (initial.empty()) {
    initial.push_back(data_parallel_strategy(graph, topology));
    initial.push_back(random_strategy(graph, topology, params.max_degree, params.seed));
  }
  for (std::size_t i = 0; i < initial.size(); ++i) {
    if (auto r = validate_strategy(graph, topology, initial[i]); !r.ok()) {
      throw InputError("initial strategy " + std::to_string(i) + " is invalid:\n" +
                       r.to_string());
    }
  }

  const ConfigSpace space(graph, topology, params.max_degree);
  std::vector<ChainOutput> outputs(initial.size());
  std::vector<std::exception_ptr> errors(initial.size());
  auto work = [&](std::size_t i) {
    try {
      outputs[i] = run_chain(i, initial[i], graph, topology, profile, space, params);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (params.parallel && initial.size() > 1) {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < initial.size(); ++i) threads.emplace_back(work, i);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t i = 0; i < initial.size(); ++i) work(i);
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw SimulationError("chain " + std::to_string(i) + ": " + e.what());
    }
  }

  SearchReport report;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    ChainOutput& o = outputs[i];
    if (i == 0 || o.summary.best_cost < report.best_cost) {
      report.best_cost = o.summary.best_cost;
      report.best_chain = i;
      report.best_strategy = o.best;
      report.termination = o.summary.termination;
    }
    report.proposals += o.summary.proposals;
    report.chains.push_back(o.summary);
    report.trace.insert(report.trace.end(), o.trace.begin(), o.trace.end());
  }
  return report;
}

}  // namespace soapsim
