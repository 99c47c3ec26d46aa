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

#include "soapsim/task_graph.h"

#include <algorithm>
#include <map>
#include <sstream>

#include "soapsim/error.h"

namespace soapsim {

std::string to_string(const TaskKey& key) {
  static constexpr const char* kNames[] = {"fwd", "fwd-comm", "bwd", "bwd-comm",
                                           "sync"};
  std::ostringstream out;
  out << kNames[static_cast<int>(key.kind)] << "(" << key.a << "," << key.b;
  if (key.kind != TaskKind::kForward && key.kind != TaskKind::kBackward) {
    out << "," << key.c;
  }
  out << ")";
  return out.str();
}

bool is_communication(TaskKind kind) {
  return kind == TaskKind::kForwardComm || kind == TaskKind::kBackwardComm ||
         kind == TaskKind::kParamSync;
}

std::string_view to_string(IterationMode mode) {
  return mode == IterationMode::kForward ? "forward" : "full-iteration";
}

std::optional<IterationMode> parse_iteration_mode(std::string_view text) {
  if (text == "forward") return IterationMode::kForward;
  if (text == "full-iteration") return IterationMode::kFullIteration;
  return std::nullopt;
}

TaskGraph TaskGraph::build(const OperatorGraph& graph,
                           const DeviceTopology& topology,
                           const ParallelizationStrategy& strategy,
                           const CostProfile& profile, BuildOptions options) {
  if (auto report = validate_strategy(graph, topology, strategy); !report.ok()) {
    throw InputError("invalid strategy:\n" + report.to_string());
  }
  if (!graph.topological_order()) throw InputError("operator graph has a cycle");

  TaskGraph g;
  g.graph_ = &graph;
  g.topology_ = &topology;
  g.profile_ = &profile;
  g.options_ = options;
  g.strategy_ = strategy;
  g.ops_.resize(graph.num_ops());
  g.edge_tasks_.resize(graph.tensors().size());
  g.order_.resize(g.num_device_slots());
  g.busy_.assign(g.num_device_slots(), 0.0);
  g.busy_dirty_.assign(g.num_device_slots(), 1);

  g.layouts_.reserve(graph.num_ops());
  for (std::size_t op = 0; op < graph.num_ops(); ++op) {
    g.layouts_.push_back(g.make_layout(op, strategy.configs[op]));
  }
  std::vector<std::vector<CommPlan>> plans;
  plans.reserve(graph.tensors().size());
  for (std::size_t e = 0; e < graph.tensors().size(); ++e) {
    const std::size_t src = graph.src_of(e);
    const std::size_t dst = graph.dst_of(e);
    plans.push_back(g.plan_edge(e, g.layouts_[src], strategy.configs[src],
                                g.layouts_[dst], strategy.configs[dst]));
  }
  const bool full = options.mode == IterationMode::kFullIteration;
  if (full) {
    for (std::size_t op = 0; op < graph.num_ops(); ++op) {
      g.check_sync_routes(op, strategy.configs[op]);
    }
  }

  for (std::size_t op = 0; op < graph.num_ops(); ++op) g.materialize_op(op);
  for (std::size_t e = 0; e < graph.tensors().size(); ++e) {
    g.materialize_edge(e, plans[e]);
  }
  if (full) {
    for (std::size_t op = 0; op < graph.num_ops(); ++op) g.materialize_sync(op);
  }
  return g;
}

TaskGraph::OpLayout TaskGraph::make_layout(
    std::size_t op, const ParallelizationConfig& config) const {
  const Operation& operation = graph_->op(op);
  const auto input_shapes = graph_->input_shapes(op);
  const auto n = static_cast<std::size_t>(config_size(config));
  OpLayout layout;
  layout.out_regions.reserve(n);
  layout.inputs.resize(n);
  layout.exe_times.resize(n);
  std::map<std::string, double, std::less<>> exe_by_kind;
  for (std::size_t k = 0; k < n; ++k) {
    TensorRegion out = output_region(operation, config, static_cast<std::int64_t>(k));
    auto& slots = layout.inputs[k];
    slots.resize(input_shapes.size());
    for (InputRegion& r : input_regions(operation, input_shapes, out)) {
      if (r.slot != kParamSlot) slots[static_cast<std::size_t>(r.slot)] = std::move(r.region);
    }
    // Blocks are equal sized, so the time only depends on the device kind.
    const Device& device = topology_->device(config.assignment[k]);
    auto it = exe_by_kind.find(device.kind);
    if (it == exe_by_kind.end()) {
      it = exe_by_kind.emplace(device.kind, profile_->task_exe_time(operation, out, device))
               .first;
    }
    layout.exe_times[k] = it->second;
    layout.out_regions.push_back(std::move(out));
  }
  return layout;
}

std::uint32_t TaskGraph::link_slot(std::size_t a, std::size_t b) const {
  auto link = topology_->connection_between(a, b);
  if (!link) {
    throw NoRouteError("no route between devices '" + topology_->device(a).id +
                       "' and '" + topology_->device(b).id + "'");
  }
  return static_cast<std::uint32_t>(topology_->num_devices() + *link);
}

std::vector<TaskGraph::CommPlan> TaskGraph::plan_edge(
    std::size_t edge, const OpLayout& producer,
    const ParallelizationConfig& producer_config, const OpLayout& consumer,
    const ParallelizationConfig& consumer_config) const {
  const TensorEdge& tensor = graph_->tensors()[edge];
  const auto slot = static_cast<std::size_t>(tensor.slot);
  std::vector<CommPlan> plan;
  for (std::size_t kc = 0; kc < consumer.inputs.size(); ++kc) {
    const auto& need = consumer.inputs[kc][slot];
    if (!need) continue;
    for (std::size_t kp = 0; kp < producer.out_regions.size(); ++kp) {
      TensorRegion shared = intersect(producer.out_regions[kp], *need);
      if (shared.empty()) continue;
      const std::size_t dp = producer_config.assignment[kp];
      const std::size_t dc = consumer_config.assignment[kc];
      std::int64_t bytes = 0;
      if (dp != dc) {
        link_slot(dp, dc);
        bytes = region_volume_bytes(shared, tensor.shape.element_size);
      }
      plan.push_back({kp, kc, bytes});
    }
  }
  return plan;
}

TaskId TaskGraph::add_task(TaskKey key, std::uint32_t device, double exe,
                           std::int64_t bytes) {
  TaskId id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    id = static_cast<TaskId>(tasks_.size());
    tasks_.emplace_back();
    times_.emplace_back();
  }
  Task& t = tasks_[id];
  t.key = key;
  t.device = device;
  t.exe_time = exe;
  t.bytes = bytes;
  t.inputs.clear();
  t.outputs.clear();
  t.alive = true;
  times_[id] = Times{};
  ++num_alive_;
  total_comm_bytes_ += bytes;
  created_.push_back(id);
  return id;
}

void TaskGraph::add_dependency(TaskId from, TaskId to) {
  auto& out = tasks_[from].outputs;
  if (std::find(out.begin(), out.end(), to) != out.end()) return;
  out.push_back(to);
  tasks_[to].inputs.push_back(from);
  touched_.push_back(to);
}

void TaskGraph::remove_task(TaskId id, std::vector<TaskId>& device_successors) {
  Task& t = tasks_[id];
  if (times_[id].ordered) {
    auto& order = order_[t.device];
    auto it = order.find(OrderEntry{times_[id].ready, t.key, id});
    if (it != order.end()) {
      if (auto next = std::next(it); next != order.end()) {
        device_successors.push_back(next->id);
      }
      order.erase(it);
      busy_dirty_[t.device] = 1;
    }
    times_[id].ordered = false;
  }
  for (TaskId p : t.inputs) {
    auto& v = tasks_[p].outputs;
    v.erase(std::remove(v.begin(), v.end(), id), v.end());
  }
  for (TaskId s : t.outputs) {
    auto& v = tasks_[s].inputs;
    v.erase(std::remove(v.begin(), v.end(), id), v.end());
    touched_.push_back(s);
  }
  t.inputs.clear();
  t.outputs.clear();
  t.alive = false;
  total_comm_bytes_ -= t.bytes;
  --num_alive_;
  free_.push_back(id);
}

void TaskGraph::materialize_op(std::size_t op) {
  const auto& config = strategy_.configs[op];
  const auto& layout = layouts_[op];
  OpTasks& tasks = ops_[op];
  const auto opk = static_cast<std::uint32_t>(op);
  const bool full = options_.mode == IterationMode::kFullIteration;
  for (std::size_t k = 0; k < layout.exe_times.size(); ++k) {
    const auto device = static_cast<std::uint32_t>(config.assignment[k]);
    const auto kk = static_cast<std::uint32_t>(k);
    TaskId fwd = add_task({TaskKind::kForward, opk, kk, 0}, device,
                          layout.exe_times[k], 0);
    tasks.forward.push_back(fwd);
    if (full) {
      TaskId bwd = add_task({TaskKind::kBackward, opk, kk, 0}, device,
                            layout.exe_times[k] * options_.backward_multiplier, 0);
      tasks.backward.push_back(bwd);
      add_dependency(fwd, bwd);
    }
  }
}

void TaskGraph::materialize_edge(std::size_t edge,
                                 const std::vector<CommPlan>& plan) {
  const std::size_t src = graph_->src_of(edge);
  const std::size_t dst = graph_->dst_of(edge);
  const bool full = options_.mode == IterationMode::kFullIteration;
  const auto ek = static_cast<std::uint32_t>(edge);
  for (const CommPlan& p : plan) {
    const TaskId producer = ops_[src].forward[p.producer_task];
    const TaskId consumer = ops_[dst].forward[p.consumer_task];
    if (p.bytes == 0) {
      add_dependency(producer, consumer);
      if (full) {
        add_dependency(ops_[dst].backward[p.consumer_task],
                       ops_[src].backward[p.producer_task]);
      }
      continue;
    }
    const std::size_t dp = strategy_.configs[src].assignment[p.producer_task];
    const std::size_t dc = strategy_.configs[dst].assignment[p.consumer_task];
    const std::uint32_t link = link_slot(dp, dc);
    const double exe = comm_time(
        topology_->connections()[link - topology_->num_devices()], p.bytes);
    const auto kp = static_cast<std::uint32_t>(p.producer_task);
    const auto kc = static_cast<std::uint32_t>(p.consumer_task);
    TaskId comm = add_task({TaskKind::kForwardComm, ek, kp, kc}, link, exe, p.bytes);
    add_dependency(producer, comm);
    add_dependency(comm, consumer);
    edge_tasks_[edge].push_back(comm);
    if (full) {
      TaskId back = add_task({TaskKind::kBackwardComm, ek, kp, kc}, link, exe, p.bytes);
      add_dependency(ops_[dst].backward[p.consumer_task], back);
      add_dependency(back, ops_[src].backward[p.producer_task]);
      edge_tasks_[edge].push_back(back);
    }
  }
}

namespace {

// Replica groups: tasks holding the same parameter shard, keyed by the
// block coordinates along parameter-class dimensions.
std::map<std::int64_t, std::vector<std::size_t>> shard_groups(
    const Operation& op, const ParallelizationConfig& config) {
  std::vector<std::size_t> param_dims;
  const auto pdims = parallelizable_dims(op);
  for (std::size_t i = 0; i < op.output_shape.dims.size(); ++i) {
    for (const ParallelDim& p : pdims) {
      if (p.name == op.output_shape.dims[i].name &&
          p.dim_class == DimClass::kParameter) {
        param_dims.push_back(i);
      }
    }
  }
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  const std::int64_t n = config_size(config);
  for (std::int64_t k = 0; k < n; ++k) {
    TensorRegion r = output_region(op, config, k);
    std::int64_t shard = 0;
    for (std::size_t i : param_dims) {
      const Dim& d = op.output_shape.dims[i];
      const std::int64_t deg = config.degrees[d.name];
      shard = shard * deg + r.ranges[i].lo / (d.size / deg);
    }
    groups[shard].push_back(static_cast<std::size_t>(k));
  }
  return groups;
}

std::vector<std::size_t> ring_devices(const ParallelizationConfig& config,
                                      const std::vector<std::size_t>& members) {
  std::vector<std::size_t> ring;
  for (std::size_t k : members) {
    const std::size_t d = config.assignment[k];
    if (std::find(ring.begin(), ring.end(), d) == ring.end()) ring.push_back(d);
  }
  return ring;
}

}  // namespace

void TaskGraph::check_sync_routes(std::size_t op,
                                  const ParallelizationConfig& config) const {
  const Operation& operation = graph_->op(op);
  if (operation.param_bytes <= 0) return;
  for (const auto& [shard, members] : shard_groups(operation, config)) {
    const auto ring = ring_devices(config, members);
    if (ring.size() < 2) continue;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      link_slot(ring[i], ring[(i + 1) % ring.size()]);
    }
  }
}

void TaskGraph::materialize_sync(std::size_t op) {
  const Operation& operation = graph_->op(op);
  if (operation.param_bytes <= 0) return;
  const auto& config = strategy_.configs[op];
  const auto groups = shard_groups(operation, config);
  const auto num_shards = static_cast<std::int64_t>(groups.size());
  const std::int64_t shard_bytes = (operation.param_bytes + num_shards - 1) / num_shards;
  const auto opk = static_cast<std::uint32_t>(op);
  for (const auto& [shard, members] : groups) {
    const auto ring = ring_devices(config, members);
    const auto r = static_cast<std::int64_t>(ring.size());
    if (r < 2) continue;
    const std::int64_t chunk = (shard_bytes + r - 1) / r;
    TaskId prev = 0;
    for (std::int64_t step = 0; step < 2 * (r - 1); ++step) {
      const std::uint32_t link =
          link_slot(ring[static_cast<std::size_t>(step % r)],
                    ring[static_cast<std::size_t>((step + 1) % r)]);
      const double exe =
          comm_time(topology_->connections()[link - topology_->num_devices()], chunk);
      TaskId t = add_task({TaskKind::kParamSync, opk, static_cast<std::uint32_t>(shard),
                           static_cast<std::uint32_t>(step)},
                          link, exe, chunk);
      if (step == 0) {
        for (std::size_t k : members) add_dependency(ops_[op].backward[k], t);
      } else {
        add_dependency(prev, t);
      }
      ops_[op].sync.push_back(t);
      prev = t;
    }
  }
}

std::vector<TaskId> TaskGraph::reconfigure(std::size_t op,
                                           const ParallelizationConfig& config) {
  if (op >= graph_->num_ops()) throw InputError("op index out of range");
  if (config == strategy_.configs[op]) return {};
  if (std::string err = check_config(graph_->op(op), *topology_, config); !err.empty()) {
    throw InputError("invalid config for op '" + graph_->op(op).id + "': " + err);
  }

  // Everything that can fail happens before the first mutation.
  OpLayout layout = make_layout(op, config);
  std::vector<std::pair<std::size_t, std::vector<CommPlan>>> plans;
  for (std::size_t e : graph_->in_edges(op)) {
    const std::size_t src = graph_->src_of(e);
    plans.emplace_back(e, plan_edge(e, layouts_[src], strategy_.configs[src],
                                    layout, config));
  }
  for (std::size_t e : graph_->out_edges(op)) {
    const std::size_t dst = graph_->dst_of(e);
    plans.emplace_back(e, plan_edge(e, layout, config, layouts_[dst],
                                    strategy_.configs[dst]));
  }
  const bool full = options_.mode == IterationMode::kFullIteration;
  if (full) check_sync_routes(op, config);

  created_.clear();
  touched_.clear();
  std::vector<TaskId> successors;
  for (const auto& [e, plan] : plans) {
    for (TaskId t : edge_tasks_[e]) remove_task(t, successors);
    edge_tasks_[e].clear();
  }
  OpTasks& tasks = ops_[op];
  for (auto* list : {&tasks.sync, &tasks.backward, &tasks.forward}) {
    for (TaskId t : *list) remove_task(t, successors);
    list->clear();
  }

  strategy_.configs[op] = config;
  layouts_[op] = std::move(layout);
  materialize_op(op);
  for (const auto& [e, plan] : plans) materialize_edge(e, plan);
  if (full) materialize_sync(op);

  std::vector<TaskId> changed;
  changed.reserve(created_.size() + touched_.size() + successors.size());
  for (auto* list : {&created_, &touched_, &successors}) {
    for (TaskId t : *list) {
      if (tasks_[t].alive) changed.push_back(t);
    }
  }
  std::sort(changed.begin(), changed.end());
  changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
  return changed;
}

std::vector<TaskId> TaskGraph::task_ids() const {
  std::vector<TaskId> ids;
  ids.reserve(num_alive_);
  for (TaskId id = 0; id < tasks_.size(); ++id) {
    if (tasks_[id].alive) ids.push_back(id);
  }
  return ids;
}

std::string TaskGraph::device_label(std::uint32_t slot) const {
  const std::size_t d = topology_->num_devices();
  if (slot < d) return topology_->device(slot).id;
  const Connection& c = topology_->connections()[slot - d];
  return c.a + "<->" + c.b;
}

std::size_t TaskGraph::num_edges() const {
  std::size_t n = 0;
  for (const Task& t : tasks_) {
    if (t.alive) n += t.inputs.size();
  }
  return n;
}

std::size_t TaskGraph::num_comm_tasks() const {
  std::size_t n = 0;
  for (const Task& t : tasks_) {
    if (t.alive && is_communication(t.key.kind)) ++n;
  }
  return n;
}

TimelineEntry TaskGraph::timeline(TaskId id) const {
  const Times& t = times_[id];
  TimelineEntry e{t.ready, t.start, t.end, std::nullopt, std::nullopt, t.state};
  if (t.ordered) {
    const auto& order = order_[tasks_[id].device];
    auto it = order.find(OrderEntry{t.ready, tasks_[id].key, id});
    if (it != order.end()) {
      if (it != order.begin()) e.pre_task = std::prev(it)->id;
      if (auto next = std::next(it); next != order.end()) e.next_task = next->id;
    }
  }
  return e;
}

std::vector<TaskId> TaskGraph::device_order(std::uint32_t slot) const {
  std::vector<TaskId> ids;
  for (const OrderEntry& e : order_[slot]) ids.push_back(e.id);
  return ids;
}

std::string TaskGraph::task_label(TaskId id) const {
  const Task& t = tasks_[id];
  const auto& ops = graph_->ops();
  std::ostringstream out;
  switch (t.key.kind) {
    case TaskKind::kForward:
      out << ops[t.key.a].id << ":" << t.key.b;
      break;
    case TaskKind::kBackward:
      out << ops[t.key.a].id << "':" << t.key.b;
      break;
    case TaskKind::kForwardComm:
    case TaskKind::kBackwardComm: {
      const TensorEdge& e = graph_->tensors()[t.key.a];
      out << (t.key.kind == TaskKind::kBackwardComm ? "grad " : "") << e.src << ":"
          << t.key.b << "->" << e.dst << ":" << t.key.c;
      break;
    }
    case TaskKind::kParamSync:
      out << ops[t.key.a].id << " sync " << t.key.b << "." << t.key.c;
      break;
  }
  return out.str();
}

std::string TaskGraph::to_dot() const {
  auto label = [&](TaskId id) {
    const Task& t = tasks_[id];
    std::ostringstream out;
    out << task_label(id) << "\\n" << device_label(t.device);
    if (t.bytes > 0) out << "\\n" << t.bytes << "B";
    return out.str();
  };
  std::vector<TaskId> ids = task_ids();
  std::sort(ids.begin(), ids.end(),
            [&](TaskId x, TaskId y) { return tasks_[x].key < tasks_[y].key; });
  std::ostringstream out;
  out << "digraph tasks {\n";
  for (TaskId id : ids) {
    const Task& t = tasks_[id];
    out << "  t" << id << " [label=\"" << label(id) << "\", shape="
        << (is_communication(t.key.kind) ? "hexagon" : "box") << "];\n";
  }
  for (TaskId id : ids) {
    std::vector<TaskId> outs = tasks_[id].outputs;
    std::sort(outs.begin(), outs.end(), [&](TaskId x, TaskId y) {
      return tasks_[x].key < tasks_[y].key;
    });
    for (TaskId o : outs) out << "  t" << id << " -> t" << o << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace soapsim
