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

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "soapsim/cost_model.h"
#include "soapsim/error.h"
#include "soapsim/generators.h"
#include "soapsim/search.h"
#include "soapsim/serialization.h"
#include "soapsim/simulator.h"
#include "soapsim/soap_space.h"
#include "soapsim/task_graph.h"

namespace soapsim::cli {
namespace {

struct Inputs {
  std::string graph;
  std::string topology;
  std::vector<std::string> profiles;
  std::string mode = "forward";
  double backward_multiplier = 2.0;
};

struct SimulateArgs {
  std::string strategy;
  std::string init = "data";
  std::int64_t max_degree = 8;
  std::uint64_t seed = 0;
  std::string trace;
  std::string csv;
  std::string dot;
  std::int64_t check_delta = 0;
};

struct OptimizeArgs {
  std::vector<std::string> init;
  std::optional<double> beta;
  double budget_seconds = 60.0;
  std::int64_t max_degree = 8;
  std::uint64_t seed = 0;
  std::int64_t min_proposals = 2000;
  std::int64_t max_proposals = 0;
  std::int64_t verify_every = 0;
  std::size_t trace_limit = 100000;
  bool sequential = false;
  std::string out;
  std::string report;
  std::string trace;
};

struct EnumerateArgs {
  std::string op;
  std::int64_t max_degree = 8;
};

struct GenerateArgs {
  std::string model;
  ModelOptions model_options;
  std::string graph_out;
  std::string topology;
  TopologyOptions topology_options;
  std::string topology_out;
  bool list = false;
};

struct CheckArgs {
  std::string strategy;
};

void add_inputs(CLI::App* cmd, Inputs& in, bool need_topology) {
  cmd->add_option("--graph", in.graph, "Operator graph JSON")->required();
  auto* topo = cmd->add_option("--topology", in.topology, "Device topology JSON");
  if (need_topology) topo->required();
  cmd->add_option("--profile", in.profiles, "Cost profile (repeatable; later files win)");
  cmd->add_option("--mode", in.mode, "Iteration mode")
      ->check(CLI::IsMember({"forward", "full-iteration"}));
  cmd->add_option("--backward-multiplier", in.backward_multiplier,
                  "Backward task cost relative to forward")
      ->check(CLI::PositiveNumber);
}

BuildOptions build_options(const Inputs& in) {
  BuildOptions b;
  b.mode = *parse_iteration_mode(in.mode);
  b.backward_multiplier = in.backward_multiplier;
  return b;
}

CostProfile load_profiles(const std::vector<std::string>& paths) {
  CostProfile profile;
  for (const std::string& p : paths) profile = merge_profiles(profile, load_profile(p));
  return profile;
}

void require_valid(const ValidationReport& report, const std::string& what) {
  if (!report.ok()) throw InputError("invalid " + what + ":\n" + report.to_string());
}

ParallelizationStrategy initial_strategy(const std::string& init, const OperatorGraph& graph,
                                         const DeviceTopology& topology,
                                         std::int64_t max_degree, std::uint64_t seed) {
  if (init == "data") return data_parallel_strategy(graph, topology);
  if (init == "random") return random_strategy(graph, topology, max_degree, seed);
  if (init.rfind("file:", 0) == 0) return load_strategy(init.substr(5), graph, topology);
  throw InputError("--init must be data, random or file:PATH (got '" + init + "')");
}

std::string format_seconds(double s) {
  std::ostringstream os;
  os << std::setprecision(17) << s;
  return os.str();
}

void print_summary(const TaskGraph& tg, const SimulationResult& r, std::ostream& out) {
  out << "makespan_seconds " << format_seconds(r.makespan) << "\n";
  out << "tasks " << tg.num_tasks() << " comm_tasks " << tg.num_comm_tasks() << " edges "
      << tg.num_edges() << "\n";
  out << "total_comm_bytes " << r.total_comm_bytes << "\n";
  for (std::uint32_t slot = 0; slot < r.busy_time.size(); ++slot) {
    if (slot >= tg.num_compute_devices() && r.busy_time[slot] == 0.0) continue;
    out << "busy_seconds " << tg.device_label(slot) << " " << format_seconds(r.busy_time[slot])
        << "\n";
  }
}

// Timeline keyed by TaskKey so graphs with different id layouts compare.
std::map<TaskKey, std::pair<double, double>> keyed_timeline(const TaskGraph& tg) {
  std::map<TaskKey, std::pair<double, double>> m;
  for (TaskId id : tg.task_ids()) m[tg.task(id).key] = {tg.start_time(id), tg.end_time(id)};
  return m;
}

int check_delta(const OperatorGraph& graph, const DeviceTopology& topology,
                const CostProfile& profile, const ParallelizationStrategy& strategy,
                const BuildOptions& build, std::int64_t changes, std::int64_t max_degree,
                std::uint64_t seed, std::ostream& out, std::ostream& err) {
  TaskGraph tg = TaskGraph::build(graph, topology, strategy, profile, build);
  full_simulate(tg);
  ConfigSpace space(graph, topology, max_degree);
  Rng rng(seed);
  std::int64_t applied = 0;
  std::int64_t skipped = 0;
  while (applied < changes) {
    Proposal p = propose_change(space, rng);
    std::vector<TaskId> changed;
    try {
      changed = tg.reconfigure(p.op, p.config);
    } catch (const NoRouteError&) {
      ++skipped;
      if (skipped > 100 * (changes + 1)) throw InputError("no routable changes found");
      continue;
    }
    SimulationResult delta = delta_simulate(tg, changed);
    TaskGraph fresh = TaskGraph::build(graph, topology, tg.strategy(), profile, build);
    SimulationResult full = full_simulate(fresh);
    ++applied;
    if (delta.makespan != full.makespan || keyed_timeline(tg) != keyed_timeline(fresh)) {
      err << "delta mismatch at change " << applied << " (op '" << graph.op(p.op).id
          << "'): delta " << format_seconds(delta.makespan) << " full "
          << format_seconds(full.makespan) << "\n";
      return kExitFailure;
    }
  }
  out << "check_delta ok " << applied << " changes\n";
  return kExitOk;
}

int cmd_simulate(const Inputs& in, const SimulateArgs& a, std::ostream& out,
                 std::ostream& err) {
  OperatorGraph graph = load_graph(in.graph);
  require_valid(validate_graph(graph), "graph '" + in.graph + "'");
  DeviceTopology topology = load_topology(in.topology);
  require_valid(validate_topology(topology), "topology '" + in.topology + "'");
  CostProfile profile = load_profiles(in.profiles);
  ParallelizationStrategy strategy =
      a.strategy.empty() ? initial_strategy(a.init, graph, topology, a.max_degree, a.seed)
                         : load_strategy(a.strategy, graph, topology);
  require_valid(validate_strategy(graph, topology, strategy), "strategy");
  const BuildOptions build = build_options(in);

  TaskGraph tg = TaskGraph::build(graph, topology, strategy, profile, build);
  SimulationResult r = full_simulate(tg);
  print_summary(tg, r, out);
  if (!a.trace.empty()) write_file(a.trace, chrome_trace_json(tg));
  if (!a.csv.empty()) write_file(a.csv, timeline_csv(tg));
  if (!a.dot.empty()) write_file(a.dot, tg.to_dot());
  if (a.check_delta > 0) {
    return check_delta(graph, topology, profile, strategy, build, a.check_delta, a.max_degree,
                       a.seed, out, err);
  }
  return kExitOk;
}

int cmd_optimize(const Inputs& in, const OptimizeArgs& a, std::ostream& out) {
  OperatorGraph graph = load_graph(in.graph);
  require_valid(validate_graph(graph), "graph '" + in.graph + "'");
  DeviceTopology topology = load_topology(in.topology);
  require_valid(validate_topology(topology), "topology '" + in.topology + "'");
  CostProfile profile = load_profiles(in.profiles);

  SearchParams params;
  params.beta = a.beta;
  params.budget_seconds = a.budget_seconds;
  params.max_degree = a.max_degree;
  params.seed = a.seed;
  params.min_proposals = a.min_proposals;
  params.max_proposals = a.max_proposals;
  params.verify_every = a.verify_every;
  params.trace_limit = a.trace_limit;
  params.parallel = !a.sequential;
  params.build = build_options(in);
  for (std::size_t i = 0; i < a.init.size(); ++i) {
    params.initial.push_back(
        initial_strategy(a.init[i], graph, topology, a.max_degree, a.seed + i));
  }

  SearchReport report = mcmc_search(graph, topology, profile, params);
  if (!a.out.empty()) write_file(a.out, write_strategy(report.best_strategy, graph, topology));
  if (!a.report.empty()) write_file(a.report, write_report(report, graph, topology));
  if (!a.trace.empty()) {
    TaskGraph tg = TaskGraph::build(graph, topology, report.best_strategy, profile, params.build);
    full_simulate(tg);
    write_file(a.trace, chrome_trace_json(tg));
  }
  out << "best_cost_seconds " << format_seconds(report.best_cost) << "\n";
  out << "best_chain " << report.best_chain << "\n";
  out << "proposals " << report.proposals << "\n";
  out << "termination " << to_string(report.termination) << "\n";
  return kExitOk;
}

int cmd_enumerate(const Inputs& in, const EnumerateArgs& a, std::ostream& out) {
  OperatorGraph graph = load_graph(in.graph);
  require_valid(validate_graph(graph), "graph '" + in.graph + "'");
  DeviceTopology topology = load_topology(in.topology);
  require_valid(validate_topology(topology), "topology '" + in.topology + "'");
  auto op = graph.find_op(a.op);
  if (!op) throw InputError("unknown op '" + a.op + "'");
  const Operation& operation = graph.op(*op);
  std::vector<ParallelizationConfig> configs =
      enumerate_configs(operation, topology, a.max_degree);
  for (const ParallelizationConfig& c : configs) {
    std::string line;
    for (const Dim& d : operation.output_shape.dims) {
      if (!line.empty()) line += ' ';
      line += std::string(to_string(d.name)) + "=" + std::to_string(c.degrees[d.name]);
    }
    out << line << " tasks=" << config_size(c) << "\n";
  }
  out << "configs " << configs.size() << "\n";
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.list) {
    for (const std::string& m : model_names()) out << "model " << m << "\n";
    for (const std::string& t : topology_names()) out << "topology " << t << "\n";
    return kExitOk;
  }
  if (a.model.empty() && a.topology.empty()) {
    throw InputError("generate needs --model and/or --topology");
  }
  if (!a.model.empty()) {
    std::string text = write_graph(generate_model(a.model, a.model_options));
    if (a.graph_out.empty()) {
      out << text;
    } else {
      write_file(a.graph_out, text);
    }
  }
  if (!a.topology.empty()) {
    std::string text = write_topology(generate_topology(a.topology, a.topology_options));
    if (a.topology_out.empty()) {
      out << text;
    } else {
      write_file(a.topology_out, text);
    }
  }
  return kExitOk;
}

int cmd_check(const Inputs& in, const CheckArgs& a, std::ostream& out) {
  OperatorGraph graph = load_graph(in.graph);
  ValidationReport gr = validate_graph(graph);
  if (!gr.ok()) {
    out << "graph: invalid\n" << gr.to_string() << "\n";
    return kExitInputError;
  }
  out << "graph: ok (" << graph.num_ops() << " ops, " << graph.tensors().size()
      << " tensors)\n";
  if (!in.profiles.empty()) {
    CostProfile profile = load_profiles(in.profiles);
    out << "profile: ok (" << profile.entries().size() << " entries)\n";
  }
  if (in.topology.empty()) {
    if (!a.strategy.empty()) throw InputError("--strategy needs --topology");
    return kExitOk;
  }
  DeviceTopology topology = load_topology(in.topology);
  ValidationReport tr = validate_topology(topology);
  if (!tr.ok()) {
    out << "topology: invalid\n" << tr.to_string() << "\n";
    return kExitInputError;
  }
  out << "topology: ok (" << topology.num_devices() << " devices, "
      << topology.connections().size() << " connections)\n";
  if (a.strategy.empty()) return kExitOk;
  ParallelizationStrategy strategy = load_strategy(a.strategy, graph, topology);
  ValidationReport sr = validate_strategy(graph, topology, strategy);
  if (!sr.ok()) {
    out << "strategy: invalid\n" << sr.to_string() << "\n";
    return kExitInputError;
  }
  out << "strategy: ok\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parallelization strategy simulator and optimizer", "soapsim"};
  app.require_subcommand(1);

  Inputs sim_in;
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate one strategy");
  add_inputs(simulate, sim_in, true);
  simulate->add_option("--strategy", sim.strategy, "Strategy JSON (overrides --init)");
  simulate->add_option("--init", sim.init, "data, random or file:PATH");
  simulate->add_option("--max-degree", sim.max_degree, "Degree cap for random choices")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Seed for random choices");
  simulate->add_option("--trace", sim.trace, "Write a Chrome trace-event JSON");
  simulate->add_option("--csv", sim.csv, "Write the timeline as CSV");
  simulate->add_option("--dot", sim.dot, "Write the task graph in Graphviz format");
  simulate->add_option("--check-delta", sim.check_delta,
                       "Apply N random single-op changes and compare delta with full "
                       "simulation")
      ->check(CLI::NonNegativeNumber);

  Inputs opt_in;
  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Search for a fast strategy");
  add_inputs(optimize, opt_in, true);
  optimize->add_option("--init", opt.init, "Chain start: data, random or file:PATH (repeatable)");
  optimize->add_option("--beta", opt.beta, "Inverse temperature (default from initial cost)")
      ->check(CLI::PositiveNumber);
  optimize->add_option("--budget-seconds", opt.budget_seconds, "Wall-clock budget per chain")
      ->check(CLI::PositiveNumber);
  optimize->add_option("--max-degree", opt.max_degree, "Largest degree per dimension")
      ->check(CLI::PositiveNumber);
  optimize->add_option("--seed", opt.seed, "Random seed");
  optimize->add_option("--min-proposals", opt.min_proposals,
                       "Proposals before stagnation may stop a chain")
      ->check(CLI::NonNegativeNumber);
  optimize->add_option("--max-proposals", opt.max_proposals, "Proposal cap per chain (0: none)")
      ->check(CLI::NonNegativeNumber);
  optimize->add_option("--verify-every", opt.verify_every,
                       "Cross-check with full simulation every N accepted steps")
      ->check(CLI::NonNegativeNumber);
  optimize->add_option("--trace-limit", opt.trace_limit, "Report trace entries per chain");
  optimize->add_flag("--sequential", opt.sequential, "Run chains on one thread");
  optimize->add_option("--out", opt.out, "Write the best strategy");
  optimize->add_option("--report", opt.report, "Write the search report");
  optimize->add_option("--trace", opt.trace, "Write a Chrome trace of the best strategy");

  Inputs enum_in;
  EnumerateArgs en;
  auto* enumerate = app.add_subcommand("enumerate", "List the degree maps of one op");
  add_inputs(enumerate, enum_in, true);
  enumerate->add_option("--op", en.op, "Op id")->required();
  enumerate->add_option("--max-degree", en.max_degree, "Largest degree per dimension")
      ->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Emit benchmark graphs and topologies");
  generate->add_option("--model", gen.model, "Model name");
  generate->add_option("--batch", gen.model_options.batch, "Batch size");
  generate->add_option("--steps", gen.model_options.steps, "Unroll steps");
  generate->add_option("--hidden", gen.model_options.hidden, "Hidden width");
  generate->add_option("--vocab", gen.model_options.vocab, "Vocabulary or class count");
  generate->add_option("--image", gen.model_options.image, "Input image size");
  generate->add_option("--channels", gen.model_options.channels, "Base channel count");
  generate->add_option("--layers", gen.model_options.layers, "Layers or blocks");
  generate->add_option("--graph-out", gen.graph_out, "Graph output path (default stdout)");
  generate->add_option("--topology", gen.topology, "Topology name");
  generate->add_option("--nodes", gen.topology_options.nodes, "Nodes");
  generate->add_option("--gpus-per-node", gen.topology_options.gpus_per_node, "GPUs per node");
  generate->add_option("--intra-bandwidth", gen.topology_options.intra_bandwidth,
                       "Bytes/s between GPUs of a node");
  generate->add_option("--intra-latency", gen.topology_options.intra_latency, "Seconds");
  generate->add_option("--pair-bandwidth", gen.topology_options.pair_bandwidth,
                       "Bytes/s between paired GPUs (k80-cluster)");
  generate->add_option("--pair-latency", gen.topology_options.pair_latency, "Seconds");
  generate->add_option("--inter-bandwidth", gen.topology_options.inter_bandwidth,
                       "Bytes/s between nodes");
  generate->add_option("--inter-latency", gen.topology_options.inter_latency, "Seconds");
  generate->add_option("--topology-out", gen.topology_out,
                       "Topology output path (default stdout)");
  generate->add_flag("--list", gen.list, "List model and topology names");

  Inputs check_in;
  CheckArgs chk;
  auto* check = app.add_subcommand("check", "Validate input files");
  add_inputs(check, check_in, false);
  check->add_option("--strategy", chk.strategy, "Strategy JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_in, sim, out, err);
    if (optimize->parsed()) return cmd_optimize(opt_in, opt, out);
    if (enumerate->parsed()) return cmd_enumerate(enum_in, en, out);
    if (generate->parsed()) return cmd_generate(gen, out);
    if (check->parsed()) return cmd_check(check_in, chk, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const CapExceededError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const SimulationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitInputError;
}

}  // namespace soapsim::cli
