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

// Operator graphs, device topologies and per-kind dimension metadata.
//
// Both graphs and topologies are immutable once constructed. They may hold
// inconsistent data (dangling edges, cycles, bad bandwidths); validate_graph()
// and validate_topology() report such problems, and code that needs a valid
// input checks the report first.

#ifndef SOAPSIM_CORE_MODEL_H_
#define SOAPSIM_CORE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace soapsim {

enum class DimName : std::uint8_t { kSample, kChannel, kLength, kHeight, kWidth };
inline constexpr int kNumDimNames = 5;

std::string_view to_string(DimName name);
std::optional<DimName> parse_dim_name(std::string_view text);

struct Dim {
  DimName name;
  std::int64_t size;

  friend bool operator==(const Dim&, const Dim&) = default;
};

struct TensorShape {
  std::vector<Dim> dims;
  std::int64_t element_size = 4;

  std::optional<std::size_t> index_of(DimName name) const;
  // Size of the named dimension, or 0 if the shape does not have it.
  std::int64_t size_of(DimName name) const;
  std::int64_t num_elements() const;
  std::int64_t num_bytes() const { return num_elements() * element_size; }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::string to_string(const TensorShape& shape);

enum class OpTag : std::uint8_t {
  kMatMul,
  kConv1D,
  kConv2D,
  kPool1D,
  kPool2D,
  kEmbedding,
  kElementWise,
  kConcat,
};

std::string_view to_string(OpTag tag);
std::optional<OpTag> parse_op_tag(std::string_view text);

enum class Padding : std::uint8_t { kSame, kValid };

std::string_view to_string(Padding padding);
std::optional<Padding> parse_padding(std::string_view text);

// Sliding-window parameters of one spatial dimension of a conv/pool.
struct Window {
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  Padding padding = Padding::kValid;

  friend bool operator==(const Window&, const Window&) = default;
};

// Output extent of a window applied to `input` elements.
std::int64_t window_output_size(const Window& w, std::int64_t input);
// Number of elements padded before the first input element.
std::int64_t window_pad_before(const Window& w, std::int64_t input);

struct OperatorKind {
  OpTag tag = OpTag::kElementWise;
  // Conv1D/Pool1D: {length}. Conv2D/Pool2D: {height, width}. Empty otherwise.
  std::vector<Window> windows;
  // MatMul: fan-in (non-sample elements summed over all inputs).
  // Conv1D/Conv2D: input channels. Embedding: table rows. Unused otherwise.
  std::int64_t in_channels = 0;
  // Concat only.
  DimName concat_axis = DimName::kChannel;

  // Canonical text of the hyperparameters; part of the cost-cache key.
  std::string digest() const;

  static OperatorKind matmul(std::int64_t in_channels);
  static OperatorKind conv1d(Window length, std::int64_t in_channels);
  static OperatorKind conv2d(Window height, Window width,
                             std::int64_t in_channels);
  static OperatorKind pool1d(Window length);
  static OperatorKind pool2d(Window height, Window width);
  static OperatorKind embedding(std::int64_t rows);
  static OperatorKind element_wise();
  static OperatorKind concat(DimName axis);

  friend bool operator==(const OperatorKind&, const OperatorKind&) = default;
};

// Spatial output dimensions a window list applies to, in window order.
std::vector<DimName> window_dims(OpTag tag);

struct Operation {
  std::string id;
  OperatorKind kind;
  TensorShape output_shape;
  std::int64_t param_bytes = 0;

  friend bool operator==(const Operation&, const Operation&) = default;
};

// A tensor flowing from `src`'s output into input position `slot` of `dst`.
struct TensorEdge {
  std::string src;
  std::string dst;
  int slot = 0;
  TensorShape shape;

  friend bool operator==(const TensorEdge&, const TensorEdge&) = default;
};

class OperatorGraph {
 public:
  OperatorGraph() = default;
  OperatorGraph(std::vector<Operation> ops, std::vector<TensorEdge> tensors);

  const std::vector<Operation>& ops() const { return ops_; }
  const std::vector<TensorEdge>& tensors() const { return tensors_; }
  std::size_t num_ops() const { return ops_.size(); }
  const Operation& op(std::size_t index) const { return ops_[index]; }

  std::optional<std::size_t> find_op(std::string_view id) const;

  // Resolved endpoints. Only meaningful for edges whose endpoints exist.
  std::size_t src_of(std::size_t edge) const { return edge_src_[edge]; }
  std::size_t dst_of(std::size_t edge) const { return edge_dst_[edge]; }

  // Incoming edges sorted by slot; outgoing edges in insertion order.
  std::span<const std::size_t> in_edges(std::size_t op) const {
    return in_edges_[op];
  }
  std::span<const std::size_t> out_edges(std::size_t op) const {
    return out_edges_[op];
  }

  std::vector<TensorShape> input_shapes(std::size_t op) const;

  // Kahn order with ties broken by op index; empty optional if cyclic.
  const std::optional<std::vector<std::size_t>>& topological_order() const {
    return topo_order_;
  }

  friend bool operator==(const OperatorGraph& a, const OperatorGraph& b) {
    return a.ops_ == b.ops_ && a.tensors_ == b.tensors_;
  }

 private:
  static constexpr std::size_t kMissing = static_cast<std::size_t>(-1);

  std::vector<Operation> ops_;
  std::vector<TensorEdge> tensors_;
  std::map<std::string, std::size_t, std::less<>> op_by_id_;
  std::vector<std::size_t> edge_src_;
  std::vector<std::size_t> edge_dst_;
  std::vector<std::vector<std::size_t>> in_edges_;
  std::vector<std::vector<std::size_t>> out_edges_;
  std::optional<std::vector<std::size_t>> topo_order_;
};

// Incremental construction helper. connect() infers the edge shape from the
// source's output shape and appends the next free slot of the destination.
class GraphBuilder {
 public:
  std::string add(Operation op);
  GraphBuilder& connect(std::string_view src, std::string_view dst);
  const Operation& get(std::string_view id) const;
  OperatorGraph build() const;

 private:
  std::vector<Operation> ops_;
  std::vector<TensorEdge> tensors_;
  std::map<std::string, int, std::less<>> next_slot_;
};

struct Device {
  std::string id;
  std::string kind;
  std::string node;

  friend bool operator==(const Device&, const Device&) = default;
};

struct Connection {
  std::string a;
  std::string b;
  double bandwidth = 0.0;  // bytes per second
  double latency = 0.0;    // seconds

  friend bool operator==(const Connection&, const Connection&) = default;
};

class DeviceTopology {
 public:
  DeviceTopology() = default;
  DeviceTopology(std::vector<Device> devices,
                 std::vector<Connection> connections);

  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<Connection>& connections() const { return connections_; }
  std::size_t num_devices() const { return devices_.size(); }
  const Device& device(std::size_t index) const { return devices_[index]; }

  std::optional<std::size_t> find_device(std::string_view id) const;
  // Index into connections() for the unordered pair, if directly connected.
  std::optional<std::size_t> connection_between(std::size_t a,
                                                std::size_t b) const;

  friend bool operator==(const DeviceTopology& a, const DeviceTopology& b) {
    return a.devices_ == b.devices_ && a.connections_ == b.connections_;
  }

 private:
  std::vector<Device> devices_;
  std::vector<Connection> connections_;
  std::map<std::string, std::size_t, std::less<>> device_by_id_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> link_by_pair_;
};

struct Violation {
  std::string subject;  // op, edge, device or connection identifier
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_graph(const OperatorGraph& graph);
ValidationReport validate_topology(const DeviceTopology& topology);

enum class DimClass : std::uint8_t { kSample, kAttribute, kParameter };

std::string_view to_string(DimClass c);

struct ParallelDim {
  DimName name;
  DimClass dim_class;

  friend bool operator==(const ParallelDim&, const ParallelDim&) = default;
};

// Divisible output dimensions of `op` in output-shape order. Always holds
// exactly one sample-class entry.
std::vector<ParallelDim> parallelizable_dims(const Operation& op);

}  // namespace soapsim

#endif  // SOAPSIM_CORE_MODEL_H_
