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

#include "soapsim/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "soapsim/error.h"

namespace soapsim {

namespace {

struct QueueEntry {
  double ready;
  TaskKey key;
  TaskId id;

  // Inverted for std::priority_queue, which pops the largest element.
  friend bool operator<(const QueueEntry& x, const QueueEntry& y) {
    if (x.ready != y.ready) return x.ready > y.ready;
    return x.key > y.key;
  }
};

}  // namespace

class Simulator {
 public:
  static SimulationResult full(TaskGraph& g) {
    const std::size_t n = g.tasks_.size();
    std::vector<std::uint32_t> pending(n, 0);
    std::priority_queue<QueueEntry> queue;
    for (auto& order : g.order_) order.clear();
    std::vector<double> last_end(g.num_device_slots(), 0.0);

    for (TaskId id = 0; id < n; ++id) {
      TaskGraph::Times& t = g.times_[id];
      t = TaskGraph::Times{};
      const Task& task = g.tasks_[id];
      if (!task.alive) continue;
      pending[id] = static_cast<std::uint32_t>(task.inputs.size());
      if (pending[id] == 0) {
        t.state = TaskState::kReady;
        queue.push({0.0, task.key, id});
      }
    }

    std::size_t done = 0;
    while (!queue.empty()) {
      const QueueEntry e = queue.top();
      queue.pop();
      const Task& task = g.tasks_[e.id];
      TaskGraph::Times& t = g.times_[e.id];
      t.start = std::max(t.ready, last_end[task.device]);
      t.end = t.start + task.exe_time;
      t.state = TaskState::kComplete;
      last_end[task.device] = t.end;
      g.order_[task.device].insert(g.order_[task.device].end(),
                                   {t.ready, task.key, e.id});
      t.ordered = true;
      ++done;
      for (TaskId next : task.outputs) {
        TaskGraph::Times& nt = g.times_[next];
        nt.ready = std::max(nt.ready, t.end);
        if (--pending[next] == 0) {
          nt.state = TaskState::kReady;
          queue.push({nt.ready, g.tasks_[next].key, next});
        }
      }
    }
    if (done != g.num_alive_) {
      for (TaskId id = 0; id < n; ++id) {
        if (g.tasks_[id].alive && g.times_[id].state != TaskState::kComplete) {
          throw SimulationError("task " + to_string(g.tasks_[id].key) +
                                " never became ready (cycle in task graph)");
        }
      }
    }
    g.simulated_ = true;
    std::fill(g.busy_dirty_.begin(), g.busy_dirty_.end(), 1);
    return result(g);
  }

  static SimulationResult delta(TaskGraph& g, std::span<const TaskId> changed) {
    if (!g.simulated_) {
      throw SimulationError("delta_simulate called on a graph that was never simulated");
    }
    if (changed.empty()) return result(g);

    const std::size_t n = g.tasks_.size();
    constexpr double kNone = std::numeric_limits<double>::quiet_NaN();
    queued_.assign(n, kNone);
    deferred_.assign(n, 0);
    std::priority_queue<QueueEntry> queue;

    auto ready_of = [&](TaskId id) {
      double r = 0.0;
      for (TaskId p : g.tasks_[id].inputs) r = std::max(r, g.times_[p].end);
      return r;
    };
    auto push = [&](TaskId id) {
      if (!g.tasks_[id].alive) return;
      deferred_[id] = 0;
      const double r = ready_of(id);
      if (queued_[id] == r) return;
      queued_[id] = r;
      queue.push({r, g.tasks_[id].key, id});
    };
    // An input still waiting to be processed will change this task's ready
    // time again; the input pushes it once settled.
    auto waiting_on_input = [&](TaskId id) {
      for (TaskId p : g.tasks_[id].inputs) {
        if (deferred_[p] || !std::isnan(queued_[p])) return true;
      }
      return false;
    };

    for (TaskId id : changed) push(id);

    std::size_t steps = 0;
    const std::size_t limit = 64 * (g.num_alive_ + 16) * (g.num_alive_ + 16);
    while (!queue.empty()) {
      const QueueEntry e = queue.top();
      queue.pop();
      if (queued_[e.id] != e.ready) continue;  // superseded
      queued_[e.id] = kNone;
      if (++steps > limit) throw SimulationError("delta simulation did not converge");
      if (waiting_on_input(e.id)) {
        deferred_[e.id] = 1;
        continue;
      }

      const Task& task = g.tasks_[e.id];
      TaskGraph::Times& t = g.times_[e.id];
      auto& order = g.order_[task.device];
      std::set<TaskGraph::OrderEntry>::iterator it;
      bool moved = false;
      if (!t.ordered || t.ready != e.ready) {
        if (t.ordered) {
          auto old = order.find({t.ready, task.key, e.id});
          if (auto after = std::next(old); after != order.end()) push(after->id);
          order.erase(old);
        }
        t.ready = e.ready;
        it = order.insert({t.ready, task.key, e.id}).first;
        if (auto after = std::next(it); after != order.end()) push(after->id);
        t.ordered = true;
        g.busy_dirty_[task.device] = 1;
        moved = true;
      } else {
        it = order.find({t.ready, task.key, e.id});
      }
      const double prev_end = it == order.begin() ? 0.0 : g.times_[std::prev(it)->id].end;
      const double start = std::max(t.ready, prev_end);
      const double end = start + task.exe_time;
      const bool fresh = t.state != TaskState::kComplete;
      t.state = TaskState::kComplete;
      const bool end_changed = fresh || end != t.end;
      if (moved || end_changed || start != t.start) {
        t.start = start;
        t.end = end;
      }
      for (TaskId next : task.outputs) {
        if (end_changed || deferred_[next]) push(next);
      }
      if (auto after = std::next(it); after != order.end()) {
        if (end_changed || deferred_[after->id]) push(after->id);
      }
    }
    return result(g);
  }

  // Makespan and busy times from the current timeline. Ends are
  // nondecreasing along a device's order, so the last entry of each slot
  // holds its latest end.
  static SimulationResult result(TaskGraph& g) {
    SimulationResult r;
    const std::size_t slots = g.num_device_slots();
    for (std::size_t slot = 0; slot < slots; ++slot) {
      const auto& order = g.order_[slot];
      if (order.empty()) {
        g.busy_[slot] = 0.0;
        g.busy_dirty_[slot] = 0;
        continue;
      }
      r.makespan = std::max(r.makespan, g.times_[order.rbegin()->id].end);
      if (g.busy_dirty_[slot]) {
        double busy = 0.0;
        for (const auto& e : order) busy += g.tasks_[e.id].exe_time;
        g.busy_[slot] = busy;
        g.busy_dirty_[slot] = 0;
      }
    }
    r.busy_time = g.busy_;
    r.total_comm_bytes = g.total_comm_bytes_;
    return r;
  }

 private:
  static thread_local std::vector<double> queued_;
  static thread_local std::vector<char> deferred_;
};

thread_local std::vector<double> Simulator::queued_;
thread_local std::vector<char> Simulator::deferred_;

SimulationResult full_simulate(TaskGraph& graph) { return Simulator::full(graph); }

SimulationResult delta_simulate(TaskGraph& graph, std::span<const TaskId> changed) {
  return Simulator::delta(graph, changed);
}

SimulationResult summarize(const TaskGraph& graph) {
  SimulationResult r;
  r.busy_time.assign(graph.num_device_slots(), 0.0);
  for (std::uint32_t slot = 0; slot < graph.num_device_slots(); ++slot) {
    for (TaskId id : graph.device_order(slot)) {
      r.makespan = std::max(r.makespan, graph.end_time(id));
      r.busy_time[slot] += graph.task(id).exe_time;
    }
  }
  r.total_comm_bytes = graph.total_comm_bytes();
  return r;
}

double device_work_bound(const TaskGraph& graph) {
  std::vector<double> work(graph.num_device_slots(), 0.0);
  for (TaskId id = 0; id < graph.capacity(); ++id) {
    if (graph.alive(id)) work[graph.task(id).device] += graph.task(id).exe_time;
  }
  return work.empty() ? 0.0 : *std::max_element(work.begin(), work.end());
}

double critical_path_bound(const TaskGraph& graph) {
  const std::size_t n = graph.capacity();
  std::vector<std::uint32_t> pending(n, 0);
  std::vector<double> finish(n, 0.0);
  std::vector<TaskId> stack;
  for (TaskId id = 0; id < n; ++id) {
    if (!graph.alive(id)) continue;
    pending[id] = static_cast<std::uint32_t>(graph.task(id).inputs.size());
    if (pending[id] == 0) stack.push_back(id);
  }
  double best = 0.0;
  while (!stack.empty()) {
    const TaskId id = stack.back();
    stack.pop_back();
    finish[id] += graph.task(id).exe_time;
    best = std::max(best, finish[id]);
    for (TaskId next : graph.task(id).outputs) {
      finish[next] = std::max(finish[next], finish[id]);
      if (--pending[next] == 0) stack.push_back(next);
    }
  }
  return best;
}

}  // namespace soapsim
