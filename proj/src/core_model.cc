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

#include "soapsim/core_model.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "soapsim/error.h"

namespace soapsim {
namespace {

constexpr std::array<std::string_view, kNumDimNames> kDimNames = {
    "sample", "channel", "length", "height", "width"};

constexpr std::array<std::string_view, 8> kOpTags = {
    "MatMul", "Conv1D",    "Conv2D",      "Pool1D",
    "Pool2D", "Embedding", "ElementWise", "Concat"};

bool has_exact_dims(const TensorShape& shape, std::initializer_list<DimName> names) {
  if (shape.dims.size() != names.size()) return false;
  for (DimName n : names) {
    if (!shape.index_of(n)) return false;
  }
  return true;
}

bool same_dim_names(const TensorShape& a, const TensorShape& b) {
  if (a.dims.size() != b.dims.size()) return false;
  for (std::size_t i = 0; i < a.dims.size(); ++i) {
    if (a.dims[i].name != b.dims[i].name) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(DimName name) {
  return kDimNames[static_cast<std::size_t>(name)];
}

std::optional<DimName> parse_dim_name(std::string_view text) {
  for (std::size_t i = 0; i < kDimNames.size(); ++i) {
    if (kDimNames[i] == text) return static_cast<DimName>(i);
  }
  return std::nullopt;
}

std::optional<std::size_t> TensorShape::index_of(DimName name) const {
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i].name == name) return i;
  }
  return std::nullopt;
}

std::int64_t TensorShape::size_of(DimName name) const {
  auto i = index_of(name);
  return i ? dims[*i].size : 0;
}

std::int64_t TensorShape::num_elements() const {
  std::int64_t n = 1;
  for (const Dim& d : dims) n *= d.size;
  return n;
}

std::string to_string(const TensorShape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.dims.size(); ++i) {
    if (i) out << ", ";
    out << to_string(shape.dims[i].name) << "=" << shape.dims[i].size;
  }
  out << "; " << shape.element_size << "B)";
  return out.str();
}

std::string_view to_string(OpTag tag) {
  auto i = static_cast<std::size_t>(tag);
  if (i >= kOpTags.size()) throw InputError("unknown operator kind");
  return kOpTags[i];
}

std::optional<OpTag> parse_op_tag(std::string_view text) {
  for (std::size_t i = 0; i < kOpTags.size(); ++i) {
    if (kOpTags[i] == text) return static_cast<OpTag>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Padding padding) {
  return padding == Padding::kSame ? "same" : "valid";
}

std::optional<Padding> parse_padding(std::string_view text) {
  if (text == "same") return Padding::kSame;
  if (text == "valid") return Padding::kValid;
  return std::nullopt;
}

std::int64_t window_output_size(const Window& w, std::int64_t input) {
  if (w.padding == Padding::kSame) return (input + w.stride - 1) / w.stride;
  if (input < w.kernel) return 0;
  return (input - w.kernel) / w.stride + 1;
}

std::int64_t window_pad_before(const Window& w, std::int64_t input) {
  if (w.padding == Padding::kValid) return 0;
  const std::int64_t out = window_output_size(w, input);
  const std::int64_t total =
      std::max<std::int64_t>((out - 1) * w.stride + w.kernel - input, 0);
  return total / 2;
}

std::string OperatorKind::digest() const {
  std::ostringstream out;
  bool first = true;
  auto sep = [&] {
    if (!first) out << ",";
    first = false;
  };
  for (const Window& w : windows) {
    sep();
    out << "k" << w.kernel << "s" << w.stride << to_string(w.padding);
  }
  switch (tag) {
    case OpTag::kMatMul:
    case OpTag::kConv1D:
    case OpTag::kConv2D:
    case OpTag::kEmbedding:
      sep();
      out << "cin" << in_channels;
      break;
    case OpTag::kConcat:
      sep();
      out << "axis" << to_string(concat_axis);
      break;
    default:
      break;
  }
  if (first) out << "-";
  return out.str();
}

OperatorKind OperatorKind::matmul(std::int64_t in_channels) {
  return {OpTag::kMatMul, {}, in_channels, DimName::kChannel};
}
OperatorKind OperatorKind::conv1d(Window length, std::int64_t in_channels) {
  return {OpTag::kConv1D, {length}, in_channels, DimName::kChannel};
}
OperatorKind OperatorKind::conv2d(Window height, Window width,
                                  std::int64_t in_channels) {
  return {OpTag::kConv2D, {height, width}, in_channels, DimName::kChannel};
}
OperatorKind OperatorKind::pool1d(Window length) {
  return {OpTag::kPool1D, {length}, 0, DimName::kChannel};
}
OperatorKind OperatorKind::pool2d(Window height, Window width) {
  return {OpTag::kPool2D, {height, width}, 0, DimName::kChannel};
}
OperatorKind OperatorKind::embedding(std::int64_t rows) {
  return {OpTag::kEmbedding, {}, rows, DimName::kChannel};
}
OperatorKind OperatorKind::element_wise() {
  return {OpTag::kElementWise, {}, 0, DimName::kChannel};
}
OperatorKind OperatorKind::concat(DimName axis) {
  return {OpTag::kConcat, {}, 0, axis};
}

std::vector<DimName> window_dims(OpTag tag) {
  switch (tag) {
    case OpTag::kConv1D:
    case OpTag::kPool1D:
      return {DimName::kLength};
    case OpTag::kConv2D:
    case OpTag::kPool2D:
      return {DimName::kHeight, DimName::kWidth};
    default:
      return {};
  }
}

OperatorGraph::OperatorGraph(std::vector<Operation> ops,
                             std::vector<TensorEdge> tensors)
    : ops_(std::move(ops)), tensors_(std::move(tensors)) {
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    op_by_id_.emplace(ops_[i].id, i);
  }
  in_edges_.resize(ops_.size());
  out_edges_.resize(ops_.size());
  edge_src_.assign(tensors_.size(), kMissing);
  edge_dst_.assign(tensors_.size(), kMissing);
  bool dangling = false;
  for (std::size_t e = 0; e < tensors_.size(); ++e) {
    auto s = find_op(tensors_[e].src);
    auto d = find_op(tensors_[e].dst);
    if (!s || !d) {
      dangling = true;
      continue;
    }
    edge_src_[e] = *s;
    edge_dst_[e] = *d;
    out_edges_[*s].push_back(e);
    in_edges_[*d].push_back(e);
  }
  for (auto& edges : in_edges_) {
    std::stable_sort(edges.begin(), edges.end(), [&](auto x, auto y) {
      return tensors_[x].slot < tensors_[y].slot;
    });
  }
  if (dangling) return;

  std::vector<std::size_t> indegree(ops_.size(), 0);
  for (std::size_t e = 0; e < tensors_.size(); ++e) ++indegree[edge_dst_[e]];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>>
      ready;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(ops_.size());
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t e : out_edges_[i]) {
      if (--indegree[edge_dst_[e]] == 0) ready.push(edge_dst_[e]);
    }
  }
  if (order.size() == ops_.size()) topo_order_ = std::move(order);
}

std::optional<std::size_t> OperatorGraph::find_op(std::string_view id) const {
  auto it = op_by_id_.find(id);
  if (it == op_by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<TensorShape> OperatorGraph::input_shapes(std::size_t op) const {
  std::vector<TensorShape> shapes;
  for (std::size_t e : in_edges_[op]) shapes.push_back(tensors_[e].shape);
  return shapes;
}

std::string GraphBuilder::add(Operation op) {
  std::string id = op.id;
  ops_.push_back(std::move(op));
  return id;
}

GraphBuilder& GraphBuilder::connect(std::string_view src, std::string_view dst) {
  int& slot = next_slot_[std::string(dst)];
  tensors_.push_back(
      {std::string(src), std::string(dst), slot, get(src).output_shape});
  ++slot;
  return *this;
}

const Operation& GraphBuilder::get(std::string_view id) const {
  for (const Operation& op : ops_) {
    if (op.id == id) return op;
  }
  throw InputError("GraphBuilder: unknown op '" + std::string(id) + "'");
}

OperatorGraph GraphBuilder::build() const { return OperatorGraph(ops_, tensors_); }

DeviceTopology::DeviceTopology(std::vector<Device> devices,
                               std::vector<Connection> connections)
    : devices_(std::move(devices)), connections_(std::move(connections)) {
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    device_by_id_.emplace(devices_[i].id, i);
  }
  for (std::size_t c = 0; c < connections_.size(); ++c) {
    auto a = find_device(connections_[c].a);
    auto b = find_device(connections_[c].b);
    if (!a || !b || *a == *b) continue;
    link_by_pair_.emplace(std::minmax(*a, *b), c);
  }
}

std::optional<std::size_t> DeviceTopology::find_device(std::string_view id) const {
  auto it = device_by_id_.find(id);
  if (it == device_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> DeviceTopology::connection_between(std::size_t a,
                                                              std::size_t b) const {
  auto it = link_by_pair_.find(std::minmax(a, b));
  if (it == link_by_pair_.end()) return std::nullopt;
  return it->second;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const Violation& v : violations) {
    out << v.subject << ": " << v.message << "\n";
  }
  return out.str();
}

namespace {

void check_shape(const TensorShape& shape, const std::string& subject,
                 std::vector<Violation>& out) {
  std::set<DimName> seen;
  for (const Dim& d : shape.dims) {
    if (!seen.insert(d.name).second) {
      out.push_back({subject, "duplicate dimension '" +
                                  std::string(to_string(d.name)) + "'"});
    }
    if (d.size < 1) {
      out.push_back({subject, "dimension '" + std::string(to_string(d.name)) +
                                  "' has non-positive size"});
    }
  }
  if (!seen.contains(DimName::kSample)) {
    out.push_back({subject, "shape has no sample dimension"});
  }
  if (shape.element_size < 1) {
    out.push_back({subject, "element_size must be positive"});
  }
}

void check_kind(const Operation& op, std::vector<Violation>& out) {
  const auto& kind = op.kind;
  const std::size_t expected_windows = window_dims(kind.tag).size();
  if (kind.windows.size() != expected_windows) {
    out.push_back({op.id, "expected " + std::to_string(expected_windows) +
                              " window parameter set(s)"});
  }
  for (const Window& w : kind.windows) {
    if (w.kernel < 1 || w.stride < 1) {
      out.push_back({op.id, "kernel size and stride must be >= 1"});
    }
  }
  switch (kind.tag) {
    case OpTag::kMatMul:
    case OpTag::kConv1D:
    case OpTag::kConv2D:
    case OpTag::kEmbedding:
      if (kind.in_channels < 1) {
        out.push_back({op.id, "in_channels must be >= 1"});
      }
      break;
    default:
      break;
  }
  if (op.param_bytes < 0) {
    out.push_back({op.id, "param_bytes must be nonnegative"});
  }
}

// Shape consistency between an op and its inputs. Assumes shapes are
// individually well formed.
void check_io(const Operation& op, const std::vector<TensorShape>& inputs,
              std::vector<Violation>& out) {
  const TensorShape& y = op.output_shape;
  auto fail = [&](const std::string& msg) { out.push_back({op.id, msg}); };
  // Ops without in-edges read external graph inputs, which are unchecked.
  auto want_inputs = [&](std::size_t n) {
    if (inputs.empty()) return false;
    if (inputs.size() != n) {
      fail("expects " + std::to_string(n) + " input(s), has " +
           std::to_string(inputs.size()));
      return false;
    }
    return true;
  };
  auto check_windows = [&](const TensorShape& x) {
    const auto spatial = window_dims(op.kind.tag);
    for (std::size_t i = 0; i < spatial.size() && i < op.kind.windows.size();
         ++i) {
      const std::int64_t expect =
          window_output_size(op.kind.windows[i], x.size_of(spatial[i]));
      if (expect != y.size_of(spatial[i])) {
        fail("output " + std::string(to_string(spatial[i])) + " is " +
             std::to_string(y.size_of(spatial[i])) + ", window gives " +
             std::to_string(expect));
      }
    }
  };

  switch (op.kind.tag) {
    case OpTag::kMatMul: {
      if (!has_exact_dims(y, {DimName::kSample, DimName::kChannel})) {
        fail("MatMul output must have exactly sample and channel dimensions");
      }
      if (inputs.empty()) return;
      std::int64_t fan_in = 0;
      for (const TensorShape& x : inputs) {
        if (x.size_of(DimName::kSample) != y.size_of(DimName::kSample)) {
          fail("input sample size differs from output");
        }
        fan_in += x.num_elements() / std::max<std::int64_t>(1, x.size_of(DimName::kSample));
      }
      if (fan_in != op.kind.in_channels) {
        fail("in_channels " + std::to_string(op.kind.in_channels) +
             " does not match input fan-in " + std::to_string(fan_in));
      }
      break;
    }
    case OpTag::kConv1D:
    case OpTag::kConv2D:
    case OpTag::kPool1D:
    case OpTag::kPool2D: {
      const bool conv =
          op.kind.tag == OpTag::kConv1D || op.kind.tag == OpTag::kConv2D;
      const bool one_d =
          op.kind.tag == OpTag::kConv1D || op.kind.tag == OpTag::kPool1D;
      if (one_d ? !has_exact_dims(y, {DimName::kSample, DimName::kLength,
                                      DimName::kChannel})
                : !has_exact_dims(y, {DimName::kSample, DimName::kHeight,
                                      DimName::kWidth, DimName::kChannel})) {
        fail(std::string(to_string(op.kind.tag)) +
             " output has the wrong dimension set");
        return;
      }
      if (!want_inputs(1)) return;
      const TensorShape& x = inputs[0];
      if (!same_dim_names(x, y)) {
        fail("input and output dimension names differ");
        return;
      }
      if (x.size_of(DimName::kSample) != y.size_of(DimName::kSample)) {
        fail("input sample size differs from output");
      }
      if (conv && x.size_of(DimName::kChannel) != op.kind.in_channels) {
        fail("input channel size does not match in_channels");
      }
      if (!conv && x.size_of(DimName::kChannel) != y.size_of(DimName::kChannel)) {
        fail("pooling must preserve the channel size");
      }
      check_windows(x);
      break;
    }
    case OpTag::kEmbedding: {
      if (!want_inputs(1)) return;
      const TensorShape& x = inputs[0];
      if (x.index_of(DimName::kChannel) || !y.index_of(DimName::kChannel) ||
          y.dims.size() != x.dims.size() + 1) {
        fail("Embedding output must be its input shape plus a channel dimension");
        return;
      }
      for (const Dim& d : x.dims) {
        if (y.size_of(d.name) != d.size) {
          fail("Embedding output " + std::string(to_string(d.name)) +
               " differs from input");
        }
      }
      break;
    }
    case OpTag::kElementWise: {
      if (inputs.empty()) return;
      for (const TensorShape& x : inputs) {
        if (x.dims != y.dims) fail("ElementWise input shape differs from output");
      }
      break;
    }
    case OpTag::kConcat: {
      if (inputs.empty()) return;
      const DimName axis = op.kind.concat_axis;
      if (!y.index_of(axis)) {
        fail("Concat axis is not an output dimension");
        return;
      }
      std::int64_t total = 0;
      for (const TensorShape& x : inputs) {
        if (!same_dim_names(x, y)) {
          fail("Concat input dimension names differ from output");
          return;
        }
        for (const Dim& d : x.dims) {
          if (d.name != axis && d.size != y.size_of(d.name)) {
            fail("Concat input differs from output off the concat axis");
          }
        }
        total += x.size_of(axis);
      }
      if (total != y.size_of(axis)) {
        fail("Concat inputs do not sum to the output axis size");
      }
      break;
    }
  }
}

}  // namespace

ValidationReport validate_graph(const OperatorGraph& graph) {
  ValidationReport report;
  auto& out = report.violations;
  std::set<std::string> ids;
  std::vector<bool> op_ok(graph.num_ops(), true);
  for (std::size_t i = 0; i < graph.num_ops(); ++i) {
    const Operation& op = graph.op(i);
    const std::size_t before = out.size();
    if (op.id.empty()) out.push_back({"<op #" + std::to_string(i) + ">", "empty op id"});
    if (!ids.insert(op.id).second) out.push_back({op.id, "duplicate op id"});
    check_shape(op.output_shape, op.id, out);
    check_kind(op, out);
    op_ok[i] = out.size() == before;
  }

  bool edges_ok = true;
  std::map<std::string, std::vector<int>> slots;
  for (std::size_t e = 0; e < graph.tensors().size(); ++e) {
    const TensorEdge& t = graph.tensors()[e];
    const std::string subject =
        "edge #" + std::to_string(e) + " (" + t.src + " -> " + t.dst + ")";
    auto s = graph.find_op(t.src);
    auto d = graph.find_op(t.dst);
    if (!s || !d) {
      out.push_back({subject, "dangling edge"});
      edges_ok = false;
      continue;
    }
    if (t.shape != graph.op(*s).output_shape) {
      out.push_back({subject, "edge shape does not equal source output shape"});
      op_ok[*d] = false;
    }
    slots[t.dst].push_back(t.slot);
  }
  for (auto& [dst, list] : slots) {
    std::sort(list.begin(), list.end());
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k] != static_cast<int>(k)) {
        out.push_back({dst, "input slots must be 0..n-1 without repeats"});
        op_ok[*graph.find_op(dst)] = false;
        break;
      }
    }
  }
  if (!edges_ok) return report;
  if (!graph.topological_order()) {
    out.push_back({"graph", "cycle detected"});
  }
  for (std::size_t i = 0; i < graph.num_ops(); ++i) {
    if (!op_ok[i]) continue;
    check_io(graph.op(i), graph.input_shapes(i), out);
  }
  return report;
}

ValidationReport validate_topology(const DeviceTopology& topology) {
  ValidationReport report;
  auto& out = report.violations;
  std::set<std::string> ids;
  for (const Device& d : topology.devices()) {
    if (d.id.empty()) out.push_back({"<device>", "empty device id"});
    if (!ids.insert(d.id).second) out.push_back({d.id, "duplicate device id"});
    if (d.kind.empty()) out.push_back({d.id, "empty device kind"});
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (std::size_t c = 0; c < topology.connections().size(); ++c) {
    const Connection& conn = topology.connections()[c];
    const std::string subject =
        "connection #" + std::to_string(c) + " (" + conn.a + " <-> " + conn.b + ")";
    if (!topology.find_device(conn.a) || !topology.find_device(conn.b)) {
      out.push_back({subject, "endpoint is not a known device"});
    }
    if (conn.a == conn.b) out.push_back({subject, "endpoints must be distinct"});
    if (!(conn.bandwidth > 0.0) || !std::isfinite(conn.bandwidth)) {
      out.push_back({subject, "bandwidth must be positive and finite"});
    }
    if (!(conn.latency >= 0.0) || !std::isfinite(conn.latency)) {
      out.push_back({subject, "latency must be nonnegative and finite"});
    }
    if (!pairs.insert(std::minmax(conn.a, conn.b)).second) {
      out.push_back({subject, "duplicate connection for device pair"});
    }
  }
  return report;
}

std::string_view to_string(DimClass c) {
  switch (c) {
    case DimClass::kSample:
      return "sample";
    case DimClass::kAttribute:
      return "attribute";
    case DimClass::kParameter:
      return "parameter";
  }
  return "?";
}

std::vector<ParallelDim> parallelizable_dims(const Operation& op) {
  auto classify = [&](DimName name) -> std::optional<DimClass> {
    if (name == DimName::kSample) return DimClass::kSample;
    switch (op.kind.tag) {
      case OpTag::kMatMul:
      case OpTag::kEmbedding:
        if (name == DimName::kChannel) return DimClass::kParameter;
        return std::nullopt;
      case OpTag::kConv1D:
        if (name == DimName::kLength) return DimClass::kAttribute;
        if (name == DimName::kChannel) return DimClass::kParameter;
        return std::nullopt;
      case OpTag::kConv2D:
        if (name == DimName::kHeight || name == DimName::kWidth) {
          return DimClass::kAttribute;
        }
        if (name == DimName::kChannel) return DimClass::kParameter;
        return std::nullopt;
      case OpTag::kPool1D:
        if (name == DimName::kLength || name == DimName::kChannel) {
          return DimClass::kAttribute;
        }
        return std::nullopt;
      case OpTag::kPool2D:
        if (name == DimName::kHeight || name == DimName::kWidth ||
            name == DimName::kChannel) {
          return DimClass::kAttribute;
        }
        return std::nullopt;
      case OpTag::kElementWise:
      case OpTag::kConcat:
        return DimClass::kAttribute;
    }
    throw InputError("unknown operator kind");
  };
  std::vector<ParallelDim> dims;
  for (const Dim& d : op.output_shape.dims) {
    if (auto c = classify(d.name)) dims.push_back({d.name, *c});
  }
  return dims;
}

}  // namespace soapsim
