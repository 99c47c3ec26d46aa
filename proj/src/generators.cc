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

#include "soapsim/generators.h"

#include <map>

#include "soapsim/error.h"

namespace soapsim {

namespace {

constexpr std::int64_t kElem = 4;

TensorShape matrix(std::int64_t batch, std::int64_t channels) {
  return TensorShape{{{DimName::kSample, batch}, {DimName::kChannel, channels}}, kElem};
}

TensorShape image(std::int64_t batch, std::int64_t h, std::int64_t w, std::int64_t c) {
  return TensorShape{{{DimName::kSample, batch},
                      {DimName::kHeight, h},
                      {DimName::kWidth, w},
                      {DimName::kChannel, c}},
                     kElem};
}

struct Feature {
  std::string id;  // empty for the external input image
  std::int64_t h, w, c;
};

class Builder {
 public:
  explicit Builder(std::int64_t batch) : batch_(batch) {}

  Feature conv(const std::string& id, const Feature& in, std::int64_t k, std::int64_t s,
               std::int64_t cout) {
    const Window win{k, s, Padding::kSame};
    Operation op{id, OperatorKind::conv2d(win, win, in.c), {}, in.c * k * k * cout * kElem};
    const std::int64_t h = window_output_size(win, in.h);
    const std::int64_t w = window_output_size(win, in.w);
    op.output_shape = image(batch_, h, w, cout);
    add(std::move(op), {in.id});
    return {id, h, w, cout};
  }

  Feature pool(const std::string& id, const Feature& in, std::int64_t k, std::int64_t s) {
    const Window win{k, s, Padding::kSame};
    const std::int64_t h = window_output_size(win, in.h);
    const std::int64_t w = window_output_size(win, in.w);
    add({id, OperatorKind::pool2d(win, win), image(batch_, h, w, in.c), 0}, {in.id});
    return {id, h, w, in.c};
  }

  // Pools the whole spatial extent down to 1x1.
  Feature global_pool(const std::string& id, const Feature& in) {
    const Window wh{in.h, in.h, Padding::kSame};
    const Window ww{in.w, in.w, Padding::kSame};
    add({id, OperatorKind::pool2d(wh, ww), image(batch_, 1, 1, in.c), 0}, {in.id});
    return {id, 1, 1, in.c};
  }

  Feature concat(const std::string& id, const std::vector<Feature>& in) {
    std::int64_t c = 0;
    std::vector<std::string> ids;
    for (const Feature& f : in) {
      c += f.c;
      ids.push_back(f.id);
    }
    add({id, OperatorKind::concat(DimName::kChannel), image(batch_, in[0].h, in[0].w, c), 0},
        ids);
    return {id, in[0].h, in[0].w, c};
  }

  Feature add_features(const std::string& id, const Feature& a, const Feature& b) {
    add({id, OperatorKind::element_wise(), image(batch_, a.h, a.w, a.c), 0}, {a.id, b.id});
    return {id, a.h, a.w, a.c};
  }

  // Dense layer over the concatenated (flattened) inputs.
  std::string dense(const std::string& id, const std::vector<std::string>& inputs,
                    std::int64_t out, std::int64_t param_bytes = -1) {
    std::int64_t fan = 0;
    for (const std::string& in : inputs) {
      const TensorShape& s = builder_.get(in).output_shape;
      fan += s.num_elements() / s.size_of(DimName::kSample);
    }
    if (param_bytes < 0) param_bytes = fan * out * kElem;
    add({id, OperatorKind::matmul(fan), matrix(batch_, out), param_bytes}, inputs);
    return id;
  }

  std::string embedding(const std::string& id, std::int64_t rows, std::int64_t width) {
    add({id, OperatorKind::embedding(rows), matrix(batch_, width), rows * width * kElem}, {});
    return id;
  }

  std::string elementwise(const std::string& id, const std::string& in) {
    add({id, OperatorKind::element_wise(), builder_.get(in).output_shape, 0}, {in});
    return id;
  }

  OperatorGraph build() const { return builder_.build(); }

 private:
  void add(Operation op, const std::vector<std::string>& inputs) {
    const std::string id = builder_.add(std::move(op));
    for (const std::string& in : inputs) {
      if (!in.empty()) builder_.connect(in, id);
    }
  }

  std::int64_t batch_;
  GraphBuilder builder_;
};

std::string step(const std::string& prefix, std::int64_t t) {
  return prefix + "_" + std::to_string(t);
}

// Unrolled recurrent stack. inputs[t] feeds the bottom layer at step t;
// returns the top layer's op per step. Layer l at step t is "<name><l>_t".
std::vector<std::string> recurrent_stack(Builder& b, const std::string& name,
                                         std::vector<std::string> inputs,
                                         std::int64_t layers, std::int64_t hidden,
                                         const std::string& initial = "") {
  const std::int64_t params = 2 * hidden * 4 * hidden * kElem;
  for (std::int64_t l = 0; l < layers; ++l) {
    const std::string layer = name + std::to_string(l);
    std::vector<std::string> outputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      std::vector<std::string> in{inputs[t]};
      if (t > 0) {
        in.push_back(outputs.back());
      } else if (l == 0 && !initial.empty()) {
        in.push_back(initial);
      }
      outputs.push_back(b.dense(step(layer, static_cast<std::int64_t>(t)), in, hidden, params));
    }
    inputs = std::move(outputs);
  }
  return inputs;
}

OperatorGraph lenet(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  Feature x{"", o.image, o.image, 1};
  x = b.conv("conv1", x, 5, 1, o.channels);
  x = b.pool("pool1", x, 2, 2);
  x = b.conv("conv2", x, 5, 1, o.channels * 2);
  x = b.pool("pool2", x, 2, 2);
  b.dense("fc1", {x.id}, o.hidden);
  b.dense("fc2", {"fc1"}, o.vocab);
  return b.build();
}

OperatorGraph alexnet(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  const std::int64_t c = o.channels;
  Feature x{"", o.image, o.image, 3};
  x = b.conv("conv1", x, 11, 4, c);
  x = b.pool("pool1", x, 3, 2);
  x = b.conv("conv2", x, 5, 1, 3 * c);
  x = b.pool("pool2", x, 3, 2);
  x = b.conv("conv3", x, 3, 1, 6 * c);
  x = b.conv("conv4", x, 3, 1, 4 * c);
  x = b.conv("conv5", x, 3, 1, 4 * c);
  x = b.pool("pool3", x, 3, 2);
  b.dense("fc6", {x.id}, o.hidden);
  b.dense("fc7", {"fc6"}, o.hidden);
  b.dense("fc8", {"fc7"}, o.vocab);
  b.elementwise("softmax", "fc8");
  return b.build();
}

OperatorGraph inception(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  const std::int64_t c = o.channels;
  Feature x{"", o.image, o.image, 3};
  x = b.conv("stem", x, 3, 2, c);
  x = b.pool("stem-pool", x, 3, 2);
  for (std::int64_t m = 0; m < o.layers; ++m) {
    const std::string p = "mix" + std::to_string(m) + ".";
    Feature b1 = b.conv(p + "1x1", x, 1, 1, c);
    Feature b2 = b.conv(p + "3x3-reduce", x, 1, 1, c);
    b2 = b.conv(p + "3x3", b2, 3, 1, c);
    Feature b3 = b.conv(p + "5x5-reduce", x, 1, 1, c);
    b3 = b.conv(p + "5x5", b3, 5, 1, c);
    Feature b4 = b.pool(p + "pool", x, 3, 1);
    b4 = b.conv(p + "pool-proj", b4, 1, 1, c);
    x = b.concat(p + "concat", {b1, b2, b3, b4});
  }
  x = b.global_pool("avg-pool", x);
  b.dense("fc", {x.id}, o.vocab);
  b.elementwise("softmax", "fc");
  return b.build();
}

OperatorGraph resnet(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  const std::int64_t c = o.channels;
  Feature x{"", o.image, o.image, 3};
  x = b.conv("stem", x, 7, 2, c);
  x = b.pool("stem-pool", x, 3, 2);
  for (std::int64_t k = 0; k < o.layers; ++k) {
    const std::string p = "block" + std::to_string(k) + ".";
    Feature y = b.conv(p + "conv-a", x, 3, 1, c);
    y = b.conv(p + "conv-b", y, 3, 1, c);
    x = b.add_features(p + "add", x, y);
  }
  x = b.global_pool("avg-pool", x);
  b.dense("fc", {x.id}, o.vocab);
  b.elementwise("softmax", "fc");
  return b.build();
}

std::vector<std::string> embeddings(Builder& b, const std::string& name, std::int64_t steps,
                                    std::int64_t rows, std::int64_t width) {
  std::vector<std::string> ids;
  for (std::int64_t t = 0; t < steps; ++t) ids.push_back(b.embedding(step(name, t), rows, width));
  return ids;
}

OperatorGraph rnn3(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  const std::int64_t params = 2 * o.hidden * 4 * o.hidden * kElem;
  std::string prev;
  for (std::int64_t t = 0; t < o.steps; ++t) {
    const std::string e = b.embedding(step("embed", t), o.vocab, o.hidden);
    std::vector<std::string> in{e};
    if (!prev.empty()) in.push_back(prev);
    prev = b.dense(step("lstm", t), in, o.hidden, params);
    b.dense(step("linear", t), {prev}, o.vocab);
  }
  return b.build();
}

OperatorGraph rnntc(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  auto top = recurrent_stack(b, "lstm", embeddings(b, "embed", o.steps, o.vocab, o.hidden),
                             o.layers, o.hidden);
  b.dense("linear", {top.back()}, 2);
  b.elementwise("softmax", "linear");
  return b.build();
}

OperatorGraph rnnlm(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  auto top = recurrent_stack(b, "lstm", embeddings(b, "embed", o.steps, o.vocab, o.hidden),
                             o.layers, o.hidden);
  for (std::int64_t t = 0; t < o.steps; ++t) {
    const std::string lin = b.dense(step("linear", t), {top[static_cast<std::size_t>(t)]}, o.vocab);
    b.elementwise(step("softmax", t), lin);
  }
  return b.build();
}

OperatorGraph nmt(const ResolvedModelOptions& o) {
  Builder b(o.batch);
  auto enc = recurrent_stack(b, "enc", embeddings(b, "enc-embed", o.steps, o.vocab, o.hidden),
                             o.layers, o.hidden);
  auto dec = recurrent_stack(b, "dec", embeddings(b, "dec-embed", o.steps, o.vocab, o.hidden),
                             o.layers, o.hidden, enc.back());
  // Attention approximation: every decoder step reads all encoder outputs.
  std::vector<std::string> context;
  for (std::int64_t t = 0; t < o.steps; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    std::vector<std::string> in{dec[ts]};
    in.insert(in.end(), enc.begin(), enc.end());
    const std::string attn = b.dense(step("attn", t), in, o.hidden);
    const std::string lin = b.dense(step("linear", t), {attn}, o.vocab);
    b.elementwise(step("softmax", t), lin);
  }
  return b.build();
}

using Generator = OperatorGraph (*)(const ResolvedModelOptions&);

struct ModelEntry {
  Generator generate;
  ResolvedModelOptions defaults;
};

const std::map<std::string, ModelEntry, std::less<>>& models() {
  // batch, steps, hidden, vocab, image, channels, layers
  static const std::map<std::string, ModelEntry, std::less<>> table = {
      {"alexnet-like", {alexnet, {256, 1, 4096, 1000, 224, 64, 1}}},
      {"inception-like", {inception, {64, 1, 1, 1000, 64, 32, 3}}},
      {"lenet-like", {lenet, {64, 1, 120, 10, 28, 6, 1}}},
      {"nmt-like", {nmt, {64, 40, 1024, 32000, 1, 1, 2}}},
      {"resnet-like", {resnet, {64, 1, 1, 1000, 64, 64, 4}}},
      {"rnn3", {rnn3, {64, 40, 1024, 10000, 1, 1, 1}}},
      {"rnnlm-like", {rnnlm, {64, 40, 2048, 10000, 1, 1, 2}}},
      {"rnntc-like", {rnntc, {64, 40, 1024, 10000, 1, 1, 4}}},
  };
  return table;
}

const ModelEntry& find_model(std::string_view name) {
  auto it = models().find(name);
  if (it == models().end()) throw InputError("unknown model name '" + std::string(name) + "'");
  return it->second;
}

}  // namespace

std::vector<std::string> model_names() {
  std::vector<std::string> names;
  for (const auto& [name, entry] : models()) names.push_back(name);
  return names;
}

ResolvedModelOptions model_defaults(std::string_view name) { return find_model(name).defaults; }

OperatorGraph generate_model(std::string_view name, const ModelOptions& options) {
  const ModelEntry& entry = find_model(name);
  ResolvedModelOptions o = entry.defaults;
  o.batch = options.batch.value_or(o.batch);
  o.steps = options.steps.value_or(o.steps);
  o.hidden = options.hidden.value_or(o.hidden);
  o.vocab = options.vocab.value_or(o.vocab);
  o.image = options.image.value_or(o.image);
  o.channels = options.channels.value_or(o.channels);
  o.layers = options.layers.value_or(o.layers);
  for (std::int64_t v : {o.batch, o.steps, o.hidden, o.vocab, o.image, o.channels, o.layers}) {
    if (v < 1) throw InputError("model size options must be positive");
  }
  return entry.generate(o);
}

std::vector<std::string> topology_names() { return {"k80-cluster", "p100-node"}; }

DeviceTopology generate_topology(std::string_view name, const TopologyOptions& options) {
  const bool k80 = name == "k80-cluster";
  if (!k80 && name != "p100-node") {
    throw InputError("unknown topology name '" + std::string(name) + "'");
  }
  if (options.nodes < 1 || options.gpus_per_node < 1) {
    throw InputError("nodes and gpus-per-node must be positive");
  }
  const double intra_bw = options.intra_bandwidth.value_or(k80 ? 5e9 : 20e9);
  const double intra_lat = options.intra_latency.value_or(k80 ? 1e-5 : 5e-6);
  const double pair_bw = options.pair_bandwidth.value_or(10e9);
  const double pair_lat = options.pair_latency.value_or(5e-6);
  const double inter_bw = options.inter_bandwidth.value_or(k80 ? 7e9 : 12.5e9);
  const double inter_lat = options.inter_latency.value_or(2e-5);

  std::vector<Device> devices;
  for (std::int64_t n = 0; n < options.nodes; ++n) {
    for (std::int64_t g = 0; g < options.gpus_per_node; ++g) {
      const std::string node = "n" + std::to_string(n);
      devices.push_back({node + ".gpu" + std::to_string(g), k80 ? "K80" : "P100", node});
    }
  }
  std::vector<Connection> links;
  const auto per = static_cast<std::size_t>(options.gpus_per_node);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    for (std::size_t j = i + 1; j < devices.size(); ++j) {
      Connection c{devices[i].id, devices[j].id, inter_bw, inter_lat};
      if (i / per == j / per) {
        // k80: GPUs 2m and 2m+1 of a node share a switch.
        const bool paired = k80 && (i % per) / 2 == (j % per) / 2;
        c.bandwidth = paired ? pair_bw : intra_bw;
        c.latency = paired ? pair_lat : intra_lat;
      }
      links.push_back(std::move(c));
    }
  }
  return DeviceTopology(std::move(devices), std::move(links));
}

DeviceTopology cluster_with_devices(std::int64_t devices) {
  TopologyOptions o;
  if (devices <= 4) {
    o.gpus_per_node = devices;
  } else {
    if (devices % 4 != 0) throw InputError("device count above 4 must be a multiple of 4");
    o.nodes = devices / 4;
  }
  return generate_topology("p100-node", o);
}

ParallelizationStrategy layer_per_device_strategy(const OperatorGraph& graph,
                                                  const DeviceTopology& topology) {
  if (topology.num_devices() == 0) throw InputError("topology has no devices");
  std::map<std::string, std::size_t, std::less<>> layer;
  ParallelizationStrategy s;
  for (const Operation& op : graph.ops()) {
    const std::string prefix = op.id.substr(0, op.id.find('_'));
    auto it = layer.emplace(prefix, layer.size()).first;
    s.configs.push_back({DegreeMap{}, {it->second % topology.num_devices()}});
  }
  return s;
}

}  // namespace soapsim
