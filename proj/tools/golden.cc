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

// Regenerates the rnn3 golden files. Usage: soapsim_golden DIR
// Reads DIR/rnn3_graph.json and DIR/rnn3_topology.json, writes the
// layer-per-device strategy and the expected counts and makespan, the latter
// computed by the event-driven reference simulator.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>

#include "soapsim/cost_model.h"
#include "soapsim/generators.h"
#include "soapsim/serialization.h"
#include "soapsim/simulator.h"
#include "soapsim/task_graph.h"

int main(int argc, char** argv) {
  using namespace soapsim;
  if (argc != 2) {
    std::cerr << "usage: soapsim_golden DIR\n";
    return 2;
  }
  const std::string dir = argv[1];
  try {
    OperatorGraph graph = load_graph(dir + "/rnn3_graph.json");
    DeviceTopology topology = load_topology(dir + "/rnn3_topology.json");
    ParallelizationStrategy strategy = layer_per_device_strategy(graph, topology);
    write_file(dir + "/rnn3_strategy.json", write_strategy(strategy, graph, topology));
    CostProfile profile;
    TaskGraph tg = TaskGraph::build(graph, topology, strategy, profile);
    char makespan[64];
    std::snprintf(makespan, sizeof makespan, "%.17g", oracle_simulate(tg));
    std::ostringstream out;
    out << "# rnn3, 2 steps, layer-per-device on a 3-GPU chain, default cost model.\n"
        << "# Generated by soapsim_golden from the graph and topology in this\n"
        << "# directory; the makespan comes from oracle_simulate.\n"
        << "tasks " << tg.num_tasks() << "\n"
        << "comm_tasks " << tg.num_comm_tasks() << "\n"
        << "edges " << tg.num_edges() << "\n"
        << "comm_bytes " << tg.total_comm_bytes() << "\n"
        << "makespan " << makespan << "\n";
    write_file(dir + "/rnn3_golden.txt", out.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
