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

#include "soapsim/serialization.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "soapsim/error.h"

namespace soapsim {

using nlohmann::json;

namespace {

// Parse failures inside the helpers below; rethrown with the source name.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json shape_to_json(const TensorShape& shape) {
  json dims = json::array();
  for (const Dim& d : shape.dims) dims.push_back({std::string(to_string(d.name)), d.size});
  return {{"dims", dims}, {"element_size", shape.element_size}};
}

DimName dim_from_json(const json& j) {
  auto name = parse_dim_name(j.get<std::string>());
  if (!name) throw FormatError("unknown dimension name '" + j.get<std::string>() + "'");
  return *name;
}

TensorShape shape_from_json(const json& j) {
  TensorShape shape;
  for (const json& d : j.at("dims")) {
    if (!d.is_array() || d.size() != 2) throw FormatError("dimension must be [name, size]");
    shape.dims.push_back({dim_from_json(d[0]), d[1].get<std::int64_t>()});
  }
  shape.element_size = j.value("element_size", std::int64_t{4});
  return shape;
}

json op_to_json(const Operation& op) {
  json j = {{"id", op.id},
            {"kind", std::string(to_string(op.kind.tag))},
            {"output_shape", shape_to_json(op.output_shape)},
            {"param_bytes", op.param_bytes}};
  if (!op.kind.windows.empty()) {
    json windows = json::array();
    for (const Window& w : op.kind.windows) {
      windows.push_back({{"kernel", w.kernel},
                         {"stride", w.stride},
                         {"padding", std::string(to_string(w.padding))}});
    }
    j["windows"] = windows;
  }
  if (op.kind.in_channels != 0) j["in_channels"] = op.kind.in_channels;
  if (op.kind.tag == OpTag::kConcat) {
    j["concat_axis"] = std::string(to_string(op.kind.concat_axis));
  }
  return j;
}

Operation op_from_json(const json& j) {
  Operation op;
  op.id = j.at("id").get<std::string>();
  auto tag = parse_op_tag(j.at("kind").get<std::string>());
  if (!tag) throw FormatError("op '" + op.id + "': unknown operator kind");
  op.kind.tag = *tag;
  if (j.contains("windows")) {
    for (const json& w : j.at("windows")) {
      Window win;
      win.kernel = w.at("kernel").get<std::int64_t>();
      win.stride = w.at("stride").get<std::int64_t>();
      auto pad = parse_padding(w.at("padding").get<std::string>());
      if (!pad) throw FormatError("op '" + op.id + "': unknown padding");
      win.padding = *pad;
      op.kind.windows.push_back(win);
    }
  }
  op.kind.in_channels = j.value("in_channels", std::int64_t{0});
  if (j.contains("concat_axis")) op.kind.concat_axis = dim_from_json(j.at("concat_axis"));
  op.output_shape = shape_from_json(j.at("output_shape"));
  op.param_bytes = j.value("param_bytes", std::int64_t{0});
  return op;
}

json parse_document(std::string_view text, std::string_view what) {
  json doc = json::parse(text);
  if (!doc.is_object()) throw FormatError(std::string(what) + " document must be a JSON object");
  if (!doc.contains("format_version")) throw FormatError("missing format_version");
  const int version = doc.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw FormatError("unsupported format_version " + std::to_string(version));
  }
  return doc;
}

template <typename F>
auto with_source(std::string_view source, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string(source) + ": " + e.what());
  } catch (const FormatError& e) {
    throw InputError(std::string(source) + ": " + e.what());
  }
}

json strategy_to_json(const ParallelizationStrategy& s, const OperatorGraph& graph,
                      const DeviceTopology& topology) {
  if (s.configs.size() != graph.num_ops()) {
    throw InputError("strategy has " + std::to_string(s.configs.size()) +
                     " configs for a graph of " + std::to_string(graph.num_ops()) + " ops");
  }
  json configs = json::array();
  for (std::size_t i = 0; i < graph.num_ops(); ++i) {
    const Operation& op = graph.op(i);
    const ParallelizationConfig& c = s.configs[i];
    json degrees = json::object();
    for (const Dim& d : op.output_shape.dims) {
      degrees[std::string(to_string(d.name))] = c.degrees[d.name];
    }
    for (int k = 0; k < kNumDimNames; ++k) {
      const auto name = static_cast<DimName>(k);
      if (c.degrees[name] != 1 && !op.output_shape.index_of(name)) {
        degrees[std::string(to_string(name))] = c.degrees[name];
      }
    }
    json assignment = json::array();
    for (std::size_t d : c.assignment) {
      if (d >= topology.num_devices()) throw InputError("strategy refers to a missing device");
      assignment.push_back(topology.device(d).id);
    }
    configs.push_back({{"op", op.id}, {"degrees", degrees}, {"assignment", assignment}});
  }
  return configs;
}

ParallelizationStrategy strategy_from_json(const json& configs, const OperatorGraph& graph,
                                           const DeviceTopology& topology) {
  ParallelizationStrategy s;
  s.configs.resize(graph.num_ops());
  std::vector<bool> seen(graph.num_ops(), false);
  for (const json& c : configs) {
    const std::string id = c.at("op").get<std::string>();
    auto op = graph.find_op(id);
    if (!op) throw FormatError("strategy names unknown op '" + id + "'");
    if (seen[*op]) throw FormatError("op '" + id + "' configured twice");
    seen[*op] = true;
    ParallelizationConfig& cfg = s.configs[*op];
    for (const auto& [name, value] : c.at("degrees").items()) {
      auto dim = parse_dim_name(name);
      if (!dim) throw FormatError("op '" + id + "': unknown dimension '" + name + "'");
      cfg.degrees[*dim] = value.get<std::int64_t>();
    }
    for (const json& d : c.at("assignment")) {
      auto dev = topology.find_device(d.get<std::string>());
      if (!dev) {
        throw FormatError("op '" + id + "': unknown device '" + d.get<std::string>() + "'");
      }
      cfg.assignment.push_back(*dev);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw FormatError("strategy has no config for op '" + graph.op(i).id + "'");
  }
  return s;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

Termination termination_from_json(const json& j) {
  auto t = parse_termination(j.get<std::string>());
  if (!t) throw FormatError("unknown termination reason '" + j.get<std::string>() + "'");
  return *t;
}

}  // namespace

std::string write_graph(const OperatorGraph& graph) {
  json ops = json::array();
  for (const Operation& op : graph.ops()) ops.push_back(op_to_json(op));
  json tensors = json::array();
  for (const TensorEdge& t : graph.tensors()) {
    tensors.push_back(
        {{"src", t.src}, {"dst", t.dst}, {"slot", t.slot}, {"shape", shape_to_json(t.shape)}});
  }
  json doc = {{"format_version", kFormatVersion}, {"ops", ops}, {"tensors", tensors}};
  return doc.dump(2) + "\n";
}

OperatorGraph parse_graph(std::string_view text, std::string_view source) {
  return with_source(source, [&] {
    json doc = parse_document(text, "graph");
    std::vector<Operation> ops;
    for (const json& j : doc.at("ops")) ops.push_back(op_from_json(j));
    std::vector<TensorEdge> tensors;
    for (const json& j : doc.at("tensors")) {
      tensors.push_back({j.at("src").get<std::string>(), j.at("dst").get<std::string>(),
                         j.at("slot").get<int>(), shape_from_json(j.at("shape"))});
    }
    return OperatorGraph(std::move(ops), std::move(tensors));
  });
}

std::string write_topology(const DeviceTopology& topology) {
  json devices = json::array();
  for (const Device& d : topology.devices()) {
    devices.push_back({{"id", d.id}, {"kind", d.kind}, {"node", d.node}});
  }
  json links = json::array();
  for (const Connection& c : topology.connections()) {
    links.push_back(
        {{"a", c.a}, {"b", c.b}, {"bandwidth", c.bandwidth}, {"latency", c.latency}});
  }
  json doc = {{"format_version", kFormatVersion}, {"devices", devices}, {"connections", links}};
  return doc.dump(2) + "\n";
}

DeviceTopology parse_topology(std::string_view text, std::string_view source) {
  return with_source(source, [&] {
    json doc = parse_document(text, "topology");
    std::vector<Device> devices;
    for (const json& j : doc.at("devices")) {
      devices.push_back({j.at("id").get<std::string>(), j.at("kind").get<std::string>(),
                         j.value("node", std::string())});
    }
    std::vector<Connection> links;
    for (const json& j : doc.at("connections")) {
      links.push_back({j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                       j.at("bandwidth").get<double>(), j.value("latency", 0.0)});
    }
    return DeviceTopology(std::move(devices), std::move(links));
  });
}

std::string write_strategy(const ParallelizationStrategy& strategy, const OperatorGraph& graph,
                           const DeviceTopology& topology) {
  json doc = {{"format_version", kFormatVersion},
              {"configs", strategy_to_json(strategy, graph, topology)}};
  return doc.dump(2) + "\n";
}

ParallelizationStrategy parse_strategy(std::string_view text, const OperatorGraph& graph,
                                       const DeviceTopology& topology,
                                       std::string_view source) {
  return with_source(source, [&] {
    json doc = parse_document(text, "strategy");
    return strategy_from_json(doc.at("configs"), graph, topology);
  });
}

std::string write_report(const SearchReport& report, const OperatorGraph& graph,
                         const DeviceTopology& topology) {
  json chains = json::array();
  for (const ChainSummary& c : report.chains) {
    chains.push_back({{"initial_cost", c.initial_cost},
                      {"best_cost", c.best_cost},
                      {"beta", finite_or_null(c.beta)},
                      {"proposals", c.proposals},
                      {"accepted", c.accepted},
                      {"termination", std::string(to_string(c.termination))}});
  }
  json trace = json::array();
  for (const TraceEntry& e : report.trace) {
    trace.push_back({e.chain, e.iteration, e.proposed_cost, e.accepted, e.best_cost});
  }
  json doc = {{"format_version", kFormatVersion},
              {"best_cost", report.best_cost},
              {"best_chain", report.best_chain},
              {"proposals", report.proposals},
              {"termination", std::string(to_string(report.termination))},
              {"best_strategy", strategy_to_json(report.best_strategy, graph, topology)},
              {"chains", chains},
              {"trace_columns", {"chain", "iteration", "proposed_cost", "accepted", "best_cost"}},
              {"trace", trace}};
  return doc.dump(1) + "\n";
}

SearchReport parse_report(std::string_view text, const OperatorGraph& graph,
                          const DeviceTopology& topology, std::string_view source) {
  return with_source(source, [&] {
    json doc = parse_document(text, "report");
    SearchReport r;
    r.best_cost = doc.at("best_cost").get<double>();
    r.best_chain = doc.at("best_chain").get<std::size_t>();
    r.proposals = doc.at("proposals").get<std::int64_t>();
    r.termination = termination_from_json(doc.at("termination"));
    r.best_strategy = strategy_from_json(doc.at("best_strategy"), graph, topology);
    for (const json& c : doc.at("chains")) {
      r.chains.push_back({c.at("initial_cost").get<double>(), c.at("best_cost").get<double>(),
                          number_or_inf(c.at("beta")), c.at("proposals").get<std::int64_t>(),
                          c.at("accepted").get<std::int64_t>(),
                          termination_from_json(c.at("termination"))});
    }
    for (const json& e : doc.at("trace")) {
      if (!e.is_array() || e.size() != 5) throw FormatError("trace rows need 5 columns");
      r.trace.push_back({e[0].get<std::size_t>(), e[1].get<std::int64_t>(), e[2].get<double>(),
                         e[3].get<bool>(), e[4].get<double>()});
    }
    return r;
  });
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("error writing '" + path + "'");
}

OperatorGraph load_graph(const std::string& path) { return parse_graph(read_file(path), path); }

DeviceTopology load_topology(const std::string& path) {
  return parse_topology(read_file(path), path);
}

ParallelizationStrategy load_strategy(const std::string& path, const OperatorGraph& graph,
                                      const DeviceTopology& topology) {
  return parse_strategy(read_file(path), graph, topology, path);
}

}  // namespace soapsim
