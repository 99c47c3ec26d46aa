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

#include <sstream>

#include "json.hpp"
#include "soapsim/error.h"
#include "soapsim/simulator.h"

namespace soapsim {

namespace {

void require_simulated(const TaskGraph& graph) {
  if (!graph.simulated()) throw SimulationError("task graph has not been simulated");
}

}  // namespace

std::string chrome_trace_json(const TaskGraph& graph) {
  require_simulated(graph);
  nlohmann::json events = nlohmann::json::array();
  for (std::uint32_t slot = 0; slot < graph.num_device_slots(); ++slot) {
    events.push_back({{"name", "thread_name"},
                      {"ph", "M"},
                      {"pid", 0},
                      {"tid", slot},
                      {"args", {{"name", graph.device_label(slot)}}}});
  }
  for (std::uint32_t slot = 0; slot < graph.num_device_slots(); ++slot) {
    for (TaskId id : graph.device_order(slot)) {
      const Task& t = graph.task(id);
      nlohmann::json args = {{"ready_us", graph.ready_time(id) * 1e6}};
      if (t.bytes > 0) args["bytes"] = t.bytes;
      events.push_back({{"name", graph.task_label(id)},
                        {"cat", is_communication(t.key.kind) ? "comm" : "compute"},
                        {"ph", "X"},
                        {"pid", 0},
                        {"tid", slot},
                        {"ts", graph.start_time(id) * 1e6},
                        {"dur", t.exe_time * 1e6},
                        {"args", args}});
    }
  }
  nlohmann::json doc = {{"traceEvents", events}, {"displayTimeUnit", "ms"}};
  return doc.dump(1) + "\n";
}

std::string timeline_csv(const TaskGraph& graph) {
  require_simulated(graph);
  std::ostringstream out;
  out.precision(17);
  out << "task,device,start,end\n";
  for (std::uint32_t slot = 0; slot < graph.num_device_slots(); ++slot) {
    for (TaskId id : graph.device_order(slot)) {
      out << graph.task_label(id) << ',' << graph.device_label(slot)
          << ',' << graph.start_time(id) << ',' << graph.end_time(id) << '\n';
    }
  }
  return out.str();
}

}  // namespace soapsim
