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

// Parallelization configurations and the partition math behind them.
//
// A configuration splits an op's output tensor into equal blocks, one task
// per block. Tasks are numbered row-major over the degree grid, taking the
// dimensions in output-shape order (the last dimension varies fastest).

#ifndef SOAPSIM_SOAP_SPACE_H_
#define SOAPSIM_SOAP_SPACE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "soapsim/core_model.h"

namespace soapsim {

// Half-open interval [lo, hi) of element indices.
struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  std::int64_t length() const { return hi > lo ? hi - lo : 0; }
  bool empty() const { return hi <= lo; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Per-dimension ranges, positionally aligned with some TensorShape.
struct TensorRegion {
  std::vector<Interval> ranges;

  static TensorRegion full(const TensorShape& shape);

  bool empty() const;
  std::int64_t num_elements() const;

  friend bool operator==(const TensorRegion&, const TensorRegion&) = default;
};

TensorRegion intersect(const TensorRegion& a, const TensorRegion& b);
bool region_within(const TensorRegion& region, const TensorShape& shape);
std::string to_string(const TensorRegion& region);

std::int64_t region_volume_bytes(const TensorRegion& region,
                                 std::int64_t element_size);

struct DegreeMap {
  std::array<std::int64_t, kNumDimNames> degree{1, 1, 1, 1, 1};

  std::int64_t operator[](DimName name) const {
    return degree[static_cast<std::size_t>(name)];
  }
  std::int64_t& operator[](DimName name) {
    return degree[static_cast<std::size_t>(name)];
  }
  std::int64_t product() const;

  friend bool operator==(const DegreeMap&, const DegreeMap&) = default;
};

struct ParallelizationConfig {
  DegreeMap degrees;
  // Device index (into DeviceTopology::devices()) per task. Empty for an
  // unassigned placeholder as returned by enumerate_configs().
  std::vector<std::size_t> assignment;

  friend bool operator==(const ParallelizationConfig&,
                         const ParallelizationConfig&) = default;
};

// Number of tasks: the product of the degrees.
std::int64_t config_size(const ParallelizationConfig& config);

// One configuration per op, indexed like OperatorGraph::ops().
struct ParallelizationStrategy {
  std::vector<ParallelizationConfig> configs;

  friend bool operator==(const ParallelizationStrategy&,
                         const ParallelizationStrategy&) = default;
};

// Empty string when valid, otherwise the first problem found.
std::string check_config(const Operation& op, const DeviceTopology& topology,
                         const ParallelizationConfig& config);
ValidationReport validate_strategy(const OperatorGraph& graph,
                                   const DeviceTopology& topology,
                                   const ParallelizationStrategy& strategy);

TensorRegion output_region(const Operation& op,
                           const ParallelizationConfig& config,
                           std::int64_t task_index);

// Input slot number, or kParamSlot for the op's trainable parameters.
inline constexpr int kParamSlot = -1;

struct InputRegion {
  int slot;
  TensorRegion region;

  friend bool operator==(const InputRegion&, const InputRegion&) = default;
};

// Parameters are viewed as a 2-D tensor [output channels, fan], where fan is
// in_channels (MatMul, Embedding) or in_channels times the kernel volume
// (convolutions). Kinds without a parameter dimension that still carry
// parameters use [1, param elements]. Empty when param_bytes is 0.
std::optional<std::array<std::int64_t, 2>> param_extents(const Operation& op);

// Minimal input and parameter regions needed to compute `out`. Slots whose
// region would be empty (e.g. Concat inputs outside `out`) are omitted.
std::vector<InputRegion> input_regions(const Operation& op,
                                       std::span<const TensorShape> inputs,
                                       const TensorRegion& out);

// All degree maps with each degree dividing its dimension and a product of
// at most min(max_degree, number of devices). Assignments are left empty.
std::vector<ParallelizationConfig> enumerate_configs(
    const Operation& op, const DeviceTopology& topology,
    std::int64_t max_degree);

ParallelizationStrategy data_parallel_strategy(const OperatorGraph& graph,
                                               const DeviceTopology& topology);

ParallelizationStrategy single_device_strategy(const OperatorGraph& graph,
                                               std::size_t device = 0);

using Rng = std::mt19937_64;

// Precomputed degree maps per op, plus uniform sampling over
// (degree map, assignment) pairs.
class ConfigSpace {
 public:
  ConfigSpace(const OperatorGraph& graph, const DeviceTopology& topology,
              std::int64_t max_degree);

  std::span<const ParallelizationConfig> configs(std::size_t op) const {
    return configs_[op];
  }
  std::size_t num_ops() const { return configs_.size(); }
  std::size_t num_devices() const { return num_devices_; }
  std::int64_t max_degree() const { return max_degree_; }

  // Uniform over all (degree map, assignment) pairs.
  ParallelizationConfig sample(std::size_t op, Rng& rng) const;

  // Number of (degree map, assignment) pairs for one op.
  double num_choices(std::size_t op) const;

 private:
  std::vector<std::vector<ParallelizationConfig>> configs_;
  std::size_t num_devices_;
  std::int64_t max_degree_;
};

// Per op: a uniformly chosen degree map, then uniformly random devices.
ParallelizationStrategy random_strategy(const OperatorGraph& graph,
                                        const DeviceTopology& topology,
                                        std::int64_t max_degree,
                                        std::uint64_t seed);

}  // namespace soapsim

#endif  // SOAPSIM_SOAP_SPACE_H_
