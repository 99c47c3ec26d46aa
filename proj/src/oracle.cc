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

// Event-driven reference simulator. A global clock advances from one
// completion instant to the next; at each instant all completions are
// retired, newly ready tasks join their device's FIFO (same-instant arrivals
// in key order), and idle devices start their queue heads.

#include <algorithm>
#include <deque>
#include <functional>
#include <map>

#include "soapsim/error.h"
#include "soapsim/simulator.h"

namespace soapsim {

OracleResult oracle_run(const TaskGraph& graph) {
  const std::size_t n = graph.capacity();
  const std::size_t slots = graph.num_device_slots();
  OracleResult out;
  out.start_time.assign(n, 0.0);
  out.end_time.assign(n, 0.0);

  std::vector<std::size_t> waiting(n, 0);
  std::vector<std::deque<TaskId>> fifo(slots);
  std::vector<bool> busy(slots, false);
  // completion instant -> tasks finishing then
  std::map<double, std::vector<TaskId>> events;

  auto by_key = [&](TaskId x, TaskId y) { return graph.task(x).key < graph.task(y).key; };
  auto dispatch = [&](double now) {
    for (std::size_t d = 0; d < slots; ++d) {
      if (busy[d] || fifo[d].empty()) continue;
      const TaskId id = fifo[d].front();
      fifo[d].pop_front();
      busy[d] = true;
      out.start_time[id] = now;
      out.end_time[id] = now + graph.task(id).exe_time;
      events[out.end_time[id]].push_back(id);
    }
  };

  std::vector<TaskId> arrivals;
  std::size_t live = 0;
  for (TaskId id = 0; id < n; ++id) {
    if (!graph.alive(id)) continue;
    ++live;
    waiting[id] = graph.task(id).inputs.size();
    if (waiting[id] == 0) arrivals.push_back(id);
  }
  std::sort(arrivals.begin(), arrivals.end(), by_key);
  for (TaskId id : arrivals) fifo[graph.task(id).device].push_back(id);
  dispatch(0.0);

  std::size_t finished = 0;
  while (!events.empty()) {
    auto node = events.extract(events.begin());
    const double now = node.key();
    arrivals.clear();
    for (TaskId id : node.mapped()) {
      ++finished;
      busy[graph.task(id).device] = false;
      out.makespan = std::max(out.makespan, now);
      for (TaskId next : graph.task(id).outputs) {
        if (--waiting[next] == 0) arrivals.push_back(next);
      }
    }
    std::sort(arrivals.begin(), arrivals.end(), by_key);
    for (TaskId id : arrivals) fifo[graph.task(id).device].push_back(id);
    dispatch(now);
  }
  if (finished != live) {
    throw SimulationError("oracle: " + std::to_string(live - finished) +
                          " tasks never became ready (cycle in task graph)");
  }
  return out;
}

double oracle_simulate(const TaskGraph& graph) { return oracle_run(graph).makespan; }

}  // namespace soapsim
