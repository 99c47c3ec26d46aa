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

// Timeline simulation of a task graph.
//
// Every device (compute or communication) runs its tasks one at a time in
// the order they become ready; tasks that become ready at the same instant
// are ordered by TaskKey. A task starts at max(readyTime, end of the previous
// task on its device) and runs for its exeTime.

#ifndef SOAPSIM_SIMULATOR_H_
#define SOAPSIM_SIMULATOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "soapsim/task_graph.h"

namespace soapsim {

struct SimulationResult {
  double makespan = 0.0;
  std::vector<double> busy_time;  // per device slot
  std::int64_t total_comm_bytes = 0;
};

// From-scratch simulation. Throws SimulationError if a task never becomes
// ready (a cycle).
SimulationResult full_simulate(TaskGraph& graph);

// Incremental re-simulation after TaskGraph::reconfigure(); `changed` is its
// return value. Produces the same timeline as full_simulate(). Throws
// SimulationError if the graph was never simulated.
SimulationResult delta_simulate(TaskGraph& graph, std::span<const TaskId> changed);

// Independent discrete-event implementation used as a test oracle. Does not
// touch the graph's timeline.
struct OracleResult {
  double makespan = 0.0;
  std::vector<double> start_time;  // indexed by TaskId; dead slots are 0
  std::vector<double> end_time;
};
OracleResult oracle_run(const TaskGraph& graph);
double oracle_simulate(const TaskGraph& graph);

// Lower bounds on the makespan of the graph's current contents.
double device_work_bound(const TaskGraph& graph);
double critical_path_bound(const TaskGraph& graph);

// Result summary recomputed from the graph's current timeline.
SimulationResult summarize(const TaskGraph& graph);

// Chrome trace-event JSON with one lane per device slot.
std::string chrome_trace_json(const TaskGraph& graph);
// "task,device,start,end" rows sorted by device then start time.
std::string timeline_csv(const TaskGraph& graph);

}  // namespace soapsim

#endif  // SOAPSIM_SIMULATOR_H_
