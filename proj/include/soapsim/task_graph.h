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

// Task graphs: normal tasks (one per block of an op's output) and
// communication tasks (one per producer/consumer task pair on different
// devices that share data), with ordering edges between them.
//
// Every hardware connection is a communication device; its tasks serialize
// FIFO like those of a compute device. Device slots [0, D) are compute
// devices and slots [D, D + C) the topology's connections in order.
//
// Each task has a TaskKey derived from the op/edge/task index it stands for.
// Keys are independent of construction history, so a graph reached through
// reconfigure() and one built from scratch agree on every key, and the
// simulator uses keys to break readyTime ties.

#ifndef SOAPSIM_TASK_GRAPH_H_
#define SOAPSIM_TASK_GRAPH_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "soapsim/core_model.h"
#include "soapsim/cost_model.h"
#include "soapsim/soap_space.h"

namespace soapsim {

using TaskId = std::uint32_t;

enum class TaskKind : std::uint8_t {
  kForward,        // a = op, b = task index
  kForwardComm,    // a = tensor edge, b = producer task, c = consumer task
  kBackward,       // a = op, b = task index
  kBackwardComm,   // a = tensor edge, b = producer task, c = consumer task
  kParamSync,      // a = op, b = parameter shard, c = ring step
};

struct TaskKey {
  TaskKind kind = TaskKind::kForward;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;

  friend auto operator<=>(const TaskKey&, const TaskKey&) = default;
};

std::string to_string(const TaskKey& key);

bool is_communication(TaskKind kind);

struct Task {
  TaskKey key;
  std::uint32_t device = 0;  // device slot, see file comment
  double exe_time = 0.0;
  std::int64_t bytes = 0;  // communication tasks only
  std::vector<TaskId> inputs;   // tasks that must finish first
  std::vector<TaskId> outputs;  // tasks waiting on this one
  bool alive = false;
};

enum class TaskState : std::uint8_t { kNotReady, kReady, kComplete };

struct TimelineEntry {
  double ready_time = 0.0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::optional<TaskId> pre_task;
  std::optional<TaskId> next_task;
  TaskState state = TaskState::kNotReady;
};

enum class IterationMode : std::uint8_t { kForward, kFullIteration };

std::string_view to_string(IterationMode mode);
std::optional<IterationMode> parse_iteration_mode(std::string_view text);

struct BuildOptions {
  IterationMode mode = IterationMode::kForward;
  double backward_multiplier = 2.0;
};

class TaskGraph {
 public:
  // The graph keeps pointers to its inputs; they must outlive it.
  static TaskGraph build(const OperatorGraph& graph,
                         const DeviceTopology& topology,
                         const ParallelizationStrategy& strategy,
                         const CostProfile& profile,
                         BuildOptions options = {});

  // Replaces one op's configuration in place, rebuilding its tasks and the
  // communication on its tensors. Returns the tasks whose inputs or
  // execution time changed, new tasks, and the device successors of removed
  // tasks; delta_simulate() takes this list. Throws before modifying
  // anything if the new configuration is invalid or needs a missing route.
  std::vector<TaskId> reconfigure(std::size_t op,
                                  const ParallelizationConfig& config);

  const OperatorGraph& graph() const { return *graph_; }
  const DeviceTopology& topology() const { return *topology_; }
  const CostProfile& profile() const { return *profile_; }
  const BuildOptions& options() const { return options_; }
  const ParallelizationStrategy& strategy() const { return strategy_; }

  // Slots include dead tasks; check alive() when iterating by id.
  std::size_t capacity() const { return tasks_.size(); }
  bool alive(TaskId id) const { return id < tasks_.size() && tasks_[id].alive; }
  const Task& task(TaskId id) const { return tasks_[id]; }
  std::size_t num_tasks() const { return num_alive_; }
  std::vector<TaskId> task_ids() const;

  std::size_t num_compute_devices() const { return topology_->num_devices(); }
  std::size_t num_device_slots() const {
    return topology_->num_devices() + topology_->connections().size();
  }
  std::string device_label(std::uint32_t slot) const;

  std::size_t num_edges() const;
  std::size_t num_comm_tasks() const;
  // Exact sum of bytes over live communication tasks.
  std::int64_t total_comm_bytes() const { return total_comm_bytes_; }

  // Normal tasks of an op (forward), indexed by task index.
  const std::vector<TaskId>& forward_tasks(std::size_t op) const {
    return ops_[op].forward;
  }

  // Timeline. Valid after full_simulate()/delta_simulate().
  bool simulated() const { return simulated_; }
  TimelineEntry timeline(TaskId id) const;
  double ready_time(TaskId id) const { return times_[id].ready; }
  double start_time(TaskId id) const { return times_[id].start; }
  double end_time(TaskId id) const { return times_[id].end; }
  // Tasks on one device slot in execution order.
  std::vector<TaskId> device_order(std::uint32_t slot) const;

  // "op:k", "op':k" (backward), "src:kp->dst:kc", "grad src:kp->dst:kc"
  // or "op sync shard.step".
  std::string task_label(TaskId id) const;

  // Graphviz text; node labels are task_label(), device and bytes.
  std::string to_dot() const;

 private:
  friend class Simulator;

  struct Times {
    double ready = 0.0;
    double start = 0.0;
    double end = 0.0;
    TaskState state = TaskState::kNotReady;
    bool ordered = false;  // present in its device's order set
  };

  struct OrderEntry {
    double ready;
    TaskKey key;
    TaskId id;

    friend bool operator<(const OrderEntry& x, const OrderEntry& y) {
      if (x.ready != y.ready) return x.ready < y.ready;
      return x.key < y.key;
    }
  };

  // Per-op derived data for the current configuration.
  struct OpLayout {
    std::vector<TensorRegion> out_regions;
    // inputs[k][slot]: region of input `slot` read by task k, if any.
    std::vector<std::vector<std::optional<TensorRegion>>> inputs;
    std::vector<double> exe_times;
  };

  struct OpTasks {
    std::vector<TaskId> forward;
    std::vector<TaskId> backward;
    std::vector<TaskId> sync;
  };

  struct CommPlan {
    std::size_t producer_task;
    std::size_t consumer_task;
    std::int64_t bytes;  // 0 when both tasks share a device
  };

  TaskGraph() = default;

  OpLayout make_layout(std::size_t op, const ParallelizationConfig& config) const;
  std::vector<CommPlan> plan_edge(std::size_t edge, const OpLayout& producer,
                                  const ParallelizationConfig& producer_config,
                                  const OpLayout& consumer,
                                  const ParallelizationConfig& consumer_config) const;
  std::uint32_t link_slot(std::size_t a, std::size_t b) const;

  TaskId add_task(TaskKey key, std::uint32_t device, double exe, std::int64_t bytes);
  void add_dependency(TaskId from, TaskId to);
  void remove_task(TaskId id, std::vector<TaskId>& device_successors);

  void materialize_op(std::size_t op);
  void materialize_edge(std::size_t edge, const std::vector<CommPlan>& plan);
  void materialize_sync(std::size_t op);
  void check_sync_routes(std::size_t op, const ParallelizationConfig& config) const;

  const OperatorGraph* graph_ = nullptr;
  const DeviceTopology* topology_ = nullptr;
  const CostProfile* profile_ = nullptr;
  BuildOptions options_;
  ParallelizationStrategy strategy_;

  std::vector<Task> tasks_;
  std::vector<Times> times_;
  std::vector<TaskId> free_;
  std::size_t num_alive_ = 0;
  std::int64_t total_comm_bytes_ = 0;

  std::vector<OpLayout> layouts_;
  std::vector<OpTasks> ops_;
  std::vector<std::vector<TaskId>> edge_tasks_;  // comm tasks per tensor edge

  // Bookkeeping for the current reconfigure() call.
  std::vector<TaskId> created_;
  std::vector<TaskId> touched_;

  std::vector<std::set<OrderEntry>> order_;
  // Per-slot busy time summed in execution order; dirty slots are recomputed
  // on the next simulation.
  std::vector<double> busy_;
  std::vector<char> busy_dirty_;
  bool simulated_ = false;
};

// Free-function spellings of the two construction entry points.
inline TaskGraph build_task_graph(const OperatorGraph& graph,
                                  const DeviceTopology& topology,
                                  const ParallelizationStrategy& strategy,
                                  const CostProfile& profile,
                                  BuildOptions options = {}) {
  return TaskGraph::build(graph, topology, strategy, profile, options);
}

inline std::vector<TaskId> update_task_graph(TaskGraph& graph, std::size_t op,
                                             const ParallelizationConfig& config) {
  return graph.reconfigure(op, config);
}

}  // namespace soapsim

#endif  // SOAPSIM_TASK_GRAPH_H_
