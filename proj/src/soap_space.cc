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

#include "soapsim/soap_space.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "soapsim/error.h"

namespace soapsim {

TensorRegion TensorRegion::full(const TensorShape& shape) {
  TensorRegion r;
  r.ranges.reserve(shape.dims.size());
  for (const Dim& d : shape.dims) r.ranges.push_back({0, d.size});
  return r;
}

bool TensorRegion::empty() const {
  return std::any_of(ranges.begin(), ranges.end(),
                     [](const Interval& i) { return i.empty(); });
}

std::int64_t TensorRegion::num_elements() const {
  std::int64_t n = 1;
  for (const Interval& i : ranges) n *= i.length();
  return n;
}

TensorRegion intersect(const TensorRegion& a, const TensorRegion& b) {
  TensorRegion r;
  const std::size_t n = std::min(a.ranges.size(), b.ranges.size());
  r.ranges.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.ranges[i] = {std::max(a.ranges[i].lo, b.ranges[i].lo),
                   std::min(a.ranges[i].hi, b.ranges[i].hi)};
  }
  return r;
}

bool region_within(const TensorRegion& region, const TensorShape& shape) {
  if (region.ranges.size() != shape.dims.size()) return false;
  for (std::size_t i = 0; i < region.ranges.size(); ++i) {
    const Interval& r = region.ranges[i];
    if (r.lo < 0 || r.lo >= r.hi || r.hi > shape.dims[i].size) return false;
  }
  return true;
}

std::string to_string(const TensorRegion& region) {
  std::ostringstream out;
  for (std::size_t i = 0; i < region.ranges.size(); ++i) {
    if (i) out << " x ";
    out << "[" << region.ranges[i].lo << "," << region.ranges[i].hi << ")";
  }
  return out.str();
}

std::int64_t region_volume_bytes(const TensorRegion& region,
                                 std::int64_t element_size) {
  return region.num_elements() * element_size;
}

std::int64_t DegreeMap::product() const {
  std::int64_t p = 1;
  for (std::int64_t d : degree) p *= d;
  return p;
}

std::int64_t config_size(const ParallelizationConfig& config) {
  return config.degrees.product();
}

std::string check_config(const Operation& op, const DeviceTopology& topology,
                         const ParallelizationConfig& config) {
  const auto dims = parallelizable_dims(op);
  for (int n = 0; n < kNumDimNames; ++n) {
    const auto name = static_cast<DimName>(n);
    const std::int64_t deg = config.degrees[name];
    if (deg < 1) {
      return "degree for '" + std::string(to_string(name)) + "' is not positive";
    }
    if (deg == 1) continue;
    const bool allowed = std::any_of(dims.begin(), dims.end(), [&](auto& p) {
      return p.name == name;
    });
    if (!allowed) {
      return "dimension '" + std::string(to_string(name)) +
             "' is not parallelizable for " + std::string(to_string(op.kind.tag));
    }
    if (op.output_shape.size_of(name) % deg != 0) {
      return "degree " + std::to_string(deg) + " does not divide '" +
             std::string(to_string(name)) + "' size " +
             std::to_string(op.output_shape.size_of(name));
    }
  }
  if (static_cast<std::int64_t>(config.assignment.size()) != config_size(config)) {
    return "assignment has " + std::to_string(config.assignment.size()) +
           " entries, expected " + std::to_string(config_size(config));
  }
  for (std::size_t d : config.assignment) {
    if (d >= topology.num_devices()) return "assignment names an unknown device";
  }
  return {};
}

ValidationReport validate_strategy(const OperatorGraph& graph,
                                   const DeviceTopology& topology,
                                   const ParallelizationStrategy& strategy) {
  ValidationReport report;
  if (strategy.configs.size() != graph.num_ops()) {
    report.violations.push_back(
        {"strategy", "has " + std::to_string(strategy.configs.size()) +
                         " configs for " + std::to_string(graph.num_ops()) +
                         " ops"});
    return report;
  }
  for (std::size_t i = 0; i < graph.num_ops(); ++i) {
    std::string err = check_config(graph.op(i), topology, strategy.configs[i]);
    if (!err.empty()) report.violations.push_back({graph.op(i).id, err});
  }
  return report;
}

TensorRegion output_region(const Operation& op,
                           const ParallelizationConfig& config,
                           std::int64_t task_index) {
  if (task_index < 0 || task_index >= config_size(config)) {
    throw InputError("task index " + std::to_string(task_index) +
                     " out of range for op '" + op.id + "'");
  }
  const auto& dims = op.output_shape.dims;
  TensorRegion r;
  r.ranges.resize(dims.size());
  std::int64_t k = task_index;
  for (std::size_t i = dims.size(); i-- > 0;) {
    const std::int64_t deg = config.degrees[dims[i].name];
    const std::int64_t block = dims[i].size / deg;
    const std::int64_t pos = k % deg;
    k /= deg;
    r.ranges[i] = {pos * block, (pos + 1) * block};
  }
  return r;
}

std::optional<std::array<std::int64_t, 2>> param_extents(const Operation& op) {
  if (op.param_bytes <= 0) return std::nullopt;
  const std::int64_t cout = op.output_shape.size_of(DimName::kChannel);
  switch (op.kind.tag) {
    case OpTag::kMatMul:
    case OpTag::kEmbedding:
      return std::array<std::int64_t, 2>{cout, op.kind.in_channels};
    case OpTag::kConv1D:
    case OpTag::kConv2D: {
      std::int64_t fan = op.kind.in_channels;
      for (const Window& w : op.kind.windows) fan *= w.kernel;
      return std::array<std::int64_t, 2>{cout, fan};
    }
    default: {
      const std::int64_t elems =
          std::max<std::int64_t>(1, op.param_bytes / op.output_shape.element_size);
      return std::array<std::int64_t, 2>{1, elems};
    }
  }
}

namespace {

// Input interval read by outputs [out.lo, out.hi) of a window, clamped.
Interval receptive_field(const Window& w, std::int64_t input_size,
                         const Interval& out) {
  const std::int64_t pad = window_pad_before(w, input_size);
  const std::int64_t lo = out.lo * w.stride - pad;
  const std::int64_t hi = (out.hi - 1) * w.stride - pad + w.kernel;
  return {std::clamp<std::int64_t>(lo, 0, input_size),
          std::clamp<std::int64_t>(hi, 0, input_size)};
}

}  // namespace

std::vector<InputRegion> input_regions(const Operation& op,
                                       std::span<const TensorShape> inputs,
                                       const TensorRegion& out) {
  const TensorShape& y = op.output_shape;
  if (!region_within(out, y)) {
    throw InputError("region " + to_string(out) + " is not contained in the " +
                     "output of op '" + op.id + "'");
  }
  auto out_range = [&](DimName name) -> Interval {
    auto i = y.index_of(name);
    return i ? out.ranges[*i] : Interval{};
  };
  const auto spatial = window_dims(op.kind.tag);
  auto window_for = [&](DimName name) -> const Window* {
    for (std::size_t i = 0; i < spatial.size(); ++i) {
      if (spatial[i] == name) return &op.kind.windows[i];
    }
    return nullptr;
  };

  std::vector<InputRegion> result;
  std::int64_t concat_offset = 0;
  for (std::size_t slot = 0; slot < inputs.size(); ++slot) {
    const TensorShape& x = inputs[slot];
    TensorRegion r;
    r.ranges.reserve(x.dims.size());
    for (const Dim& d : x.dims) {
      Interval range{0, d.size};
      switch (op.kind.tag) {
        case OpTag::kMatMul:
          if (d.name == DimName::kSample) range = out_range(d.name);
          break;
        case OpTag::kConv1D:
        case OpTag::kConv2D:
        case OpTag::kPool1D:
        case OpTag::kPool2D:
          if (const Window* w = window_for(d.name)) {
            range = receptive_field(*w, d.size, out_range(d.name));
          } else if (d.name == DimName::kSample) {
            range = out_range(d.name);
          } else if (d.name == DimName::kChannel &&
                     (op.kind.tag == OpTag::kPool1D ||
                      op.kind.tag == OpTag::kPool2D)) {
            range = out_range(d.name);
          }
          break;
        case OpTag::kEmbedding:
        case OpTag::kElementWise:
          range = out_range(d.name);
          break;
        case OpTag::kConcat:
          range = out_range(d.name);
          if (d.name == op.kind.concat_axis) {
            range = {std::max(range.lo, concat_offset) - concat_offset,
                     std::min(range.hi, concat_offset + d.size) - concat_offset};
          }
          break;
      }
      r.ranges.push_back(range);
    }
    if (op.kind.tag == OpTag::kConcat) {
      concat_offset += x.size_of(op.kind.concat_axis);
    }
    if (!r.empty()) result.push_back({static_cast<int>(slot), std::move(r)});
  }

  if (auto extents = param_extents(op)) {
    TensorRegion p;
    if ((*extents)[0] == y.size_of(DimName::kChannel) &&
        (op.kind.tag == OpTag::kMatMul || op.kind.tag == OpTag::kEmbedding ||
         op.kind.tag == OpTag::kConv1D || op.kind.tag == OpTag::kConv2D)) {
      p.ranges = {out_range(DimName::kChannel), {0, (*extents)[1]}};
    } else {
      p.ranges = {{0, (*extents)[0]}, {0, (*extents)[1]}};
    }
    result.push_back({kParamSlot, std::move(p)});
  }
  return result;
}

std::vector<ParallelizationConfig> enumerate_configs(
    const Operation& op, const DeviceTopology& topology,
    std::int64_t max_degree) {
  const auto dims = parallelizable_dims(op);
  const std::int64_t limit = std::max<std::int64_t>(
      1, std::min<std::int64_t>(max_degree,
                                static_cast<std::int64_t>(topology.num_devices())));
  std::vector<ParallelizationConfig> result;
  ParallelizationConfig current;
  auto recurse = [&](auto&& self, std::size_t i, std::int64_t product) -> void {
    if (i == dims.size()) {
      result.push_back(current);
      return;
    }
    const std::int64_t size = op.output_shape.size_of(dims[i].name);
    for (std::int64_t deg = 1; deg * product <= limit; ++deg) {
      if (size % deg != 0) continue;
      current.degrees[dims[i].name] = deg;
      self(self, i + 1, product * deg);
    }
    current.degrees[dims[i].name] = 1;
  };
  recurse(recurse, 0, 1);
  return result;
}

namespace {

std::int64_t largest_divisor_at_most(std::int64_t n, std::int64_t bound) {
  for (std::int64_t d = std::min(n, bound); d > 1; --d) {
    if (n % d == 0) return d;
  }
  return 1;
}

}  // namespace

ParallelizationStrategy data_parallel_strategy(const OperatorGraph& graph,
                                               const DeviceTopology& topology) {
  ParallelizationStrategy s;
  const auto devices = static_cast<std::int64_t>(std::max<std::size_t>(1, topology.num_devices()));
  for (const Operation& op : graph.ops()) {
    ParallelizationConfig c;
    const std::int64_t r =
        largest_divisor_at_most(op.output_shape.size_of(DimName::kSample), devices);
    c.degrees[DimName::kSample] = r;
    for (std::int64_t k = 0; k < r; ++k) c.assignment.push_back(static_cast<std::size_t>(k));
    s.configs.push_back(std::move(c));
  }
  return s;
}

ParallelizationStrategy single_device_strategy(const OperatorGraph& graph,
                                               std::size_t device) {
  ParallelizationStrategy s;
  s.configs.assign(graph.num_ops(), ParallelizationConfig{DegreeMap{}, {device}});
  return s;
}

ConfigSpace::ConfigSpace(const OperatorGraph& graph,
                         const DeviceTopology& topology,
                         std::int64_t max_degree)
    : num_devices_(topology.num_devices()), max_degree_(max_degree) {
  if (num_devices_ == 0) throw InputError("topology has no devices");
  configs_.reserve(graph.num_ops());
  for (const Operation& op : graph.ops()) {
    configs_.push_back(enumerate_configs(op, topology, max_degree));
  }
}

ParallelizationConfig ConfigSpace::sample(std::size_t op, Rng& rng) const {
  const auto& list = configs_[op];
  // Each degree map is weighted by its number of assignments, so every
  // (degree map, assignment) pair is equally likely.
  std::int64_t largest = 0;
  for (const auto& c : list) largest = std::max(largest, config_size(c));
  const double log_d = std::log(static_cast<double>(num_devices_));
  std::vector<double> weights;
  weights.reserve(list.size());
  for (const auto& c : list) {
    weights.push_back(std::exp(static_cast<double>(config_size(c) - largest) * log_d));
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  ParallelizationConfig c = list[pick(rng)];
  std::uniform_int_distribution<std::size_t> device(0, num_devices_ - 1);
  const std::int64_t n = config_size(c);
  c.assignment.resize(static_cast<std::size_t>(n));
  for (auto& d : c.assignment) d = device(rng);
  return c;
}

double ConfigSpace::num_choices(std::size_t op) const {
  double total = 0.0;
  for (const auto& c : configs_[op]) {
    total += std::pow(static_cast<double>(num_devices_),
                      static_cast<double>(config_size(c)));
  }
  return total;
}

ParallelizationStrategy random_strategy(const OperatorGraph& graph,
                                        const DeviceTopology& topology,
                                        std::int64_t max_degree,
                                        std::uint64_t seed) {
  ConfigSpace space(graph, topology, max_degree);
  Rng rng(seed);
  ParallelizationStrategy s;
  s.configs.reserve(graph.num_ops());
  std::uniform_int_distribution<std::size_t> device(0, space.num_devices() - 1);
  for (std::size_t i = 0; i < graph.num_ops(); ++i) {
    const auto list = space.configs(i);
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    ParallelizationConfig c = list[pick(rng)];
    c.assignment.resize(static_cast<std::size_t>(config_size(c)));
    for (auto& d : c.assignment) d = device(rng);
    s.configs.push_back(std::move(c));
  }
  return s;
}

}  // namespace soapsim
