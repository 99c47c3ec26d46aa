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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "soapsim/error.h"
#include "soapsim/cost_model.h"
#include "soapsim/search.h"
#include "soapsim/simulator.h"

namespace soapsim {

namespace {

bool same_link(const DeviceTopology& topo, std::size_t a, std::size_t b,
               std::size_t c, std::size_t d) {
  auto x = topo.connection_between(a, b);
  auto y = topo.connection_between(c, d);
  if (!x || !y) return !x && !y;
  const Connection& p = topo.connections()[*x];
  const Connection& q = topo.connections()[*y];
  return p.bandwidth == q.bandwidth && p.latency == q.latency;
}

bool interchangeable(const DeviceTopology& topo, std::size_t i, std::size_t j) {
  const Device& a = topo.device(i);
  const Device& b = topo.device(j);
  if (a.kind != b.kind || a.node != b.node) return false;
  for (std::size_t k = 0; k < topo.num_devices(); ++k) {
    if (k == i || k == j) continue;
    if (!same_link(topo, i, k, j, k)) return false;
  }
  return true;
}

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

void check_inputs(const OperatorGraph& graph, const DeviceTopology& topology,
                  std::int64_t max_degree) {
  if (max_degree < 1) throw InputError("max_degree must be at least 1");
  if (auto r = validate_graph(graph); !r.ok()) {
    throw InputError("invalid operator graph:\n" + r.to_string());
  }
  if (auto r = validate_topology(topology); !r.ok()) {
    throw InputError("invalid topology:\n" + r.to_string());
  }
  if (topology.num_devices() == 0) throw InputError("topology has no devices");
}

class BranchAndBound {
 public:
  BranchAndBound(const OperatorGraph& graph, const DeviceTopology& topology,
                 const CostProfile& profile, const ExhaustiveOptions& options)
      : graph_(graph),
        topology_(topology),
        options_(options),
        order_(*graph.topological_order()),
        num_devices_(topology.num_devices()),
        work_(num_devices_, 0.0),
        link_work_(topology.connections().size(), 0.0),
        dist_(graph.num_ops(), 0.0),
        finish_(graph.num_ops()),
        map_of_(graph.num_ops(), 0),
        class_of_(device_symmetry_classes(topology)),
        rank_(num_devices_, 0),
        link_(num_devices_ * num_devices_, kNoLink),
        tg_(TaskGraph::build(graph, topology, single_device_strategy(graph, 0), profile,
                             options.build)) {
    std::vector<std::size_t> class_size;
    for (std::size_t d = 0; d < num_devices_; ++d) {
      const std::size_t c = class_of_[d];
      if (c >= class_size.size()) class_size.resize(c + 1, 0);
      rank_[d] = class_size[c]++;
    }
    used_.assign(class_size.size(), 0);
    for (std::size_t a = 0; a < num_devices_; ++a) {
      for (std::size_t b = 0; b < num_devices_; ++b) {
        if (auto c = topology.connection_between(a, b); c && a != b) link_[a * num_devices_ + b] = *c;
      }
    }

    maps_.resize(graph.num_ops());
    layouts_.resize(graph.num_ops());
    exe_.resize(graph.num_ops());
    lb_time_.resize(graph.num_ops());
    lb_work_.resize(graph.num_ops());
    for (std::size_t op = 0; op < graph.num_ops(); ++op) {
      const Operation& operation = graph.op(op);
      const auto input_shapes = graph.input_shapes(op);
      maps_[op] = enumerate_configs(operation, topology, options.max_degree);
      lb_time_[op] = std::numeric_limits<double>::infinity();
      lb_work_[op] = std::numeric_limits<double>::infinity();
      for (ParallelizationConfig& m : maps_[op]) {
        const std::int64_t n = config_size(m);
        m.assignment.assign(static_cast<std::size_t>(n), 0);
        Layout layout;
        for (std::int64_t k = 0; k < n; ++k) {
          TensorRegion out = output_region(operation, m, k);
          std::vector<std::optional<TensorRegion>> need(input_shapes.size());
          for (InputRegion& r : input_regions(operation, input_shapes, out)) {
            if (r.slot != kParamSlot) need[static_cast<std::size_t>(r.slot)] = std::move(r.region);
          }
          layout.out.push_back(std::move(out));
          layout.need.push_back(std::move(need));
        }
        std::vector<double> per_task(static_cast<std::size_t>(n) * num_devices_);
        double fastest_task = std::numeric_limits<double>::infinity();
        double fastest_total = 0.0;
        for (std::size_t k = 0; k < layout.out.size(); ++k) {
          double fastest = std::numeric_limits<double>::infinity();
          for (std::size_t d = 0; d < num_devices_; ++d) {
            const double x = profile.task_exe_time(operation, layout.out[k], topology.device(d));
            per_task[k * num_devices_ + d] = x;
            fastest = std::min(fastest, x);
          }
          fastest_task = std::min(fastest_task, fastest);
          fastest_total += fastest;
        }
        lb_time_[op] = std::min(lb_time_[op], fastest_task);
        lb_work_[op] = std::min(lb_work_[op], fastest_total);
        exe_[op].push_back(std::move(per_task));
        layouts_[op].push_back(std::move(layout));
      }
    }
    current_ = tg_.strategy();
    full_simulate(tg_);
  }

  ExhaustiveResult run() {
    visit_op(0);
    if (!found_) throw SimulationError("no feasible strategy: every candidate needs a missing route");
    return result_;
  }

 private:
  static constexpr std::size_t kNoLink = static_cast<std::size_t>(-1);

  struct Layout {
    std::vector<TensorRegion> out;
    std::vector<std::vector<std::optional<TensorRegion>>> need;  // [task][slot]
  };

  struct Transfer {
    std::size_t producer_task;
    std::size_t consumer_task;
    std::int64_t bytes;
  };

  // Admissible: device and link loads of the assigned ops, dependency paths
  // with their actual transfer times, and the cheapest completion of the
  // remaining ops.
  double bound(std::size_t pos) {
    double b = *std::max_element(work_.begin(), work_.end());
    for (double w : link_work_) b = std::max(b, w);
    double total = 0.0;
    for (double w : work_) total += w;
    for (std::size_t j = pos; j < order_.size(); ++j) {
      const std::size_t op = order_[j];
      total += lb_work_[op];
      double before = 0.0;
      if (graph_.op(op).kind.tag != OpTag::kConcat) {
        for (std::size_t e : graph_.in_edges(op)) {
          before = std::max(before, dist_[graph_.src_of(e)]);
        }
      }
      dist_[op] = before + lb_time_[op];
    }
    b = std::max(b, total / static_cast<double>(num_devices_));
    for (double d : dist_) b = std::max(b, d);
    return b;
  }

  const std::vector<Transfer>& transfers(std::size_t edge, std::size_t mp, std::size_t mc) {
    auto [it, inserted] = transfers_.try_emplace({edge, mp, mc});
    if (inserted) {
      const TensorEdge& tensor = graph_.tensors()[edge];
      const auto slot = static_cast<std::size_t>(tensor.slot);
      const Layout& producer = layouts_[graph_.src_of(edge)][mp];
      const Layout& consumer = layouts_[graph_.dst_of(edge)][mc];
      for (std::size_t kc = 0; kc < consumer.need.size(); ++kc) {
        const auto& need = consumer.need[kc][slot];
        if (!need) continue;
        for (std::size_t kp = 0; kp < producer.out.size(); ++kp) {
          TensorRegion shared = intersect(producer.out[kp], *need);
          if (shared.empty()) continue;
          it->second.push_back(
              {kp, kc, region_volume_bytes(shared, tensor.shape.element_size)});
        }
      }
    }
    return it->second;
  }

  // Earliest finish of every task of the just-assigned op, ignoring
  // contention, and the link time its inputs need. False when a transfer
  // has no route.
  bool place_op(std::size_t op, std::vector<std::pair<std::size_t, double>>& link_added) {
    const std::size_t m = map_of_[op];
    const auto& assignment = current_.configs[op].assignment;
    std::vector<double> ready(assignment.size(), 0.0);
    for (std::size_t e : graph_.in_edges(op)) {
      const std::size_t src = graph_.src_of(e);
      const auto& src_assignment = current_.configs[src].assignment;
      for (const Transfer& t : transfers(e, map_of_[src], m)) {
        const std::size_t dp = src_assignment[t.producer_task];
        const std::size_t dc = assignment[t.consumer_task];
        double arrival = finish_[src][t.producer_task];
        if (dp != dc) {
          const std::size_t link = link_[dp * num_devices_ + dc];
          if (link == kNoLink) return false;
          const double time = comm_time(topology_.connections()[link], t.bytes);
          arrival += time;
          link_work_[link] += time;
          link_added.emplace_back(link, time);
        }
        ready[t.consumer_task] = std::max(ready[t.consumer_task], arrival);
      }
    }
    auto& finish = finish_[op];
    finish.resize(assignment.size());
    double earliest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < assignment.size(); ++k) {
      finish[k] = ready[k] + exe_[op][m][k * num_devices_ + assignment[k]];
      earliest = std::min(earliest, finish[k]);
    }
    dist_[op] = earliest;
    return true;
  }

  void visit_op(std::size_t pos) {
    if (pos == order_.size()) {
      leaf();
      return;
    }
    if (options_.prune && found_ &&
        bound(pos) > result_.cost * (1.0 + 1e-9)) {
      ++result_.pruned;
      return;
    }
    const std::size_t op = order_[pos];
    for (std::size_t m = 0; m < maps_[op].size(); ++m) {
      current_.configs[op] = maps_[op][m];
      map_of_[op] = m;
      visit_task(pos, m, 0);
    }
  }

  void visit_task(std::size_t pos, std::size_t m, std::size_t k) {
    const std::size_t op = order_[pos];
    auto& assignment = current_.configs[op].assignment;
    if (k == assignment.size()) {
      std::vector<std::pair<std::size_t, double>> link_added;
      if (place_op(op, link_added)) visit_op(pos + 1);
      for (auto it = link_added.rbegin(); it != link_added.rend(); ++it) {
        link_work_[it->first] -= it->second;
      }
      return;
    }
    for (std::size_t d = 0; d < num_devices_; ++d) {
      const std::size_t c = class_of_[d];
      bool fresh = false;
      if (options_.symmetry_breaking) {
        if (rank_[d] > used_[c]) continue;
        fresh = rank_[d] == used_[c];
        if (fresh) ++used_[c];
      }
      assignment[k] = d;
      const double saved = work_[d];
      work_[d] = saved + exe_[op][m][k * num_devices_ + d];
      visit_task(pos, m, k + 1);
      work_[d] = saved;
      if (fresh) --used_[c];
    }
  }

  void leaf() {
    for (std::size_t op = 0; op < graph_.num_ops(); ++op) {
      if (tg_.strategy().configs[op] == current_.configs[op]) continue;
      try {
        auto changed = tg_.reconfigure(op, current_.configs[op]);
        pending_.insert(pending_.end(), changed.begin(), changed.end());
      } catch (const NoRouteError&) {
        return;
      }
    }
    const double cost = delta_simulate(tg_, pending_).makespan;
    pending_.clear();
    ++result_.leaves;
    if (!found_ || cost < result_.cost) {
      found_ = true;
      result_.cost = cost;
      result_.strategy = current_;
    }
  }

  const OperatorGraph& graph_;
  const DeviceTopology& topology_;
  ExhaustiveOptions options_;
  std::vector<std::size_t> order_;
  std::size_t num_devices_;

  std::vector<std::vector<ParallelizationConfig>> maps_;
  std::vector<std::vector<Layout>> layouts_;           // [op][map]
  std::vector<std::vector<std::vector<double>>> exe_;  // [op][map][task * devices + device]
  std::vector<double> lb_time_;
  std::vector<double> lb_work_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<Transfer>> transfers_;

  std::vector<double> work_;
  std::vector<double> link_work_;
  std::vector<double> dist_;
  std::vector<std::vector<double>> finish_;
  std::vector<std::size_t> map_of_;
  std::vector<std::size_t> class_of_;
  std::vector<std::size_t> rank_;
  std::vector<std::size_t> used_;
  std::vector<std::size_t> link_;  // [a * devices + b] connection index

  TaskGraph tg_;
  ParallelizationStrategy current_;
  std::vector<TaskId> pending_;
  bool found_ = false;
  ExhaustiveResult result_;
};

}  // namespace

std::vector<std::size_t> device_symmetry_classes(const DeviceTopology& topology) {
  std::vector<std::size_t> cls(topology.num_devices());
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < topology.num_devices(); ++i) {
    std::size_t c = 0;
    while (c < reps.size() && !interchangeable(topology, reps[c], i)) ++c;
    if (c == reps.size()) reps.push_back(i);
    cls[i] = c;
  }
  return cls;
}

double exhaustive_space_size(const OperatorGraph& graph, const DeviceTopology& topology,
                             const ExhaustiveOptions& options) {
  const ConfigSpace space(graph, topology, options.max_degree);
  double size = 1.0;
  for (std::size_t op = 0; op < graph.num_ops(); ++op) size *= space.num_choices(op);
  if (options.symmetry_breaking) {
    const auto cls = device_symmetry_classes(topology);
    std::vector<std::size_t> count;
    for (std::size_t c : cls) {
      if (c >= count.size()) count.resize(c + 1, 0);
      ++count[c];
    }
    for (std::size_t n : count) size /= factorial(n);
  }
  return std::max(size, 1.0);
}

ExhaustiveResult exhaustive_optimal(const OperatorGraph& graph,
                                    const DeviceTopology& topology,
                                    const CostProfile& profile,
                                    const ExhaustiveOptions& options) {
  check_inputs(graph, topology, options.max_degree);
  const double size = exhaustive_space_size(graph, topology, options);
  if (size > options.cap) {
    std::ostringstream msg;
    msg << "search space of about " << size << " strategies exceeds the cap of "
        << options.cap;
    throw CapExceededError(msg.str(), size);
  }
  BranchAndBound search(graph, topology, profile, options);
  ExhaustiveResult result = search.run();
  result.estimated_size = size;
  return result;
}

LocalOptimalityResult local_optimality_check(const ParallelizationStrategy& s,
                                             const OperatorGraph& graph,
                                             const DeviceTopology& topology,
                                             const CostProfile& profile,
                                             const LocalOptimalityOptions& options) {
  check_inputs(graph, topology, options.max_degree);
  const ConfigSpace space(graph, topology, options.max_degree);
  double total = 0.0;
  for (std::size_t op = 0; op < graph.num_ops(); ++op) total += space.num_choices(op);
  if (total > options.cap) {
    std::ostringstream msg;
    msg << "neighborhood of about " << total << " strategies exceeds the cap of "
        << options.cap;
    throw CapExceededError(msg.str(), total);
  }

  TaskGraph tg = TaskGraph::build(graph, topology, s, profile, options.build);
  LocalOptimalityResult result;
  result.cost = full_simulate(tg).makespan;
  const double threshold = result.cost * (1.0 - options.relative_tolerance);
  const std::size_t devices = topology.num_devices();

  for (std::size_t op = 0; op < graph.num_ops(); ++op) {
    const ParallelizationConfig original = s.configs[op];
    for (ParallelizationConfig candidate : space.configs(op)) {
      const auto n = static_cast<std::size_t>(config_size(candidate));
      candidate.assignment.assign(n, 0);
      while (true) {
        if (!(candidate == original)) {
          std::vector<TaskId> changed;
          bool feasible = true;
          try {
            changed = tg.reconfigure(op, candidate);
          } catch (const NoRouteError&) {
            feasible = false;
          }
          if (feasible) {
            ++result.neighbors;
            const double cost = delta_simulate(tg, changed).makespan;
            if (cost < threshold) {
              result.locally_optimal = false;
              result.improvement = Proposal{op, candidate};
              result.improved_cost = cost;
              return result;
            }
          }
        }
        // Next assignment in odometer order, last task fastest.
        std::size_t k = n;
        while (k > 0 && ++candidate.assignment[k - 1] == devices) {
          candidate.assignment[k - 1] = 0;
          --k;
        }
        if (k == 0) break;
      }
    }
    if (!(tg.strategy().configs[op] == original)) {
      delta_simulate(tg, tg.reconfigure(op, original));
    }
  }
  return result;
}

}  // namespace soapsim
