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

// Synthetic benchmark graphs and cluster topologies.
//
// Recurrent layers are unrolled: each step of a layer is one MatMul reading
// the layer below at that step and the same layer at the previous step.
// Softmax and attention are approximated with MatMul and ElementWise ops.
// Bandwidth and latency defaults are placeholders, not measurements.

#ifndef SOAPSIM_GENERATORS_H_
#define SOAPSIM_GENERATORS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "soapsim/core_model.h"
#include "soapsim/soap_space.h"

namespace soapsim {

// Unset fields take the model's default (see model_defaults()).
struct ModelOptions {
  std::optional<std::int64_t> batch;
  std::optional<std::int64_t> steps;     // unroll steps (recurrent models)
  std::optional<std::int64_t> hidden;    // recurrent / dense width
  std::optional<std::int64_t> vocab;     // vocabulary or class count
  std::optional<std::int64_t> image;     // input height and width (CNNs)
  std::optional<std::int64_t> channels;  // base channel count (CNNs)
  std::optional<std::int64_t> layers;    // repeated blocks or layers
};

struct ResolvedModelOptions {
  std::int64_t batch;
  std::int64_t steps;
  std::int64_t hidden;
  std::int64_t vocab;
  std::int64_t image;
  std::int64_t channels;
  std::int64_t layers;
};

std::vector<std::string> model_names();
// Throws InputError for an unknown name.
ResolvedModelOptions model_defaults(std::string_view name);
OperatorGraph generate_model(std::string_view name, const ModelOptions& options = {});

// Unset link parameters take the topology's placeholder default.
struct TopologyOptions {
  std::int64_t nodes = 1;
  std::int64_t gpus_per_node = 4;
  std::optional<double> intra_bandwidth;  // bytes/s between GPUs of a node
  std::optional<double> intra_latency;    // seconds
  std::optional<double> pair_bandwidth;   // k80-cluster: GPUs sharing a switch
  std::optional<double> pair_latency;
  std::optional<double> inter_bandwidth;  // between nodes
  std::optional<double> inter_latency;
};

std::vector<std::string> topology_names();
// Throws InputError for an unknown name or nonsensical sizes.
DeviceTopology generate_topology(std::string_view name, const TopologyOptions& options = {});

// p100-node shaped topology with `devices` GPUs: one node when devices <= 4,
// otherwise nodes of four.
DeviceTopology cluster_with_devices(std::int64_t devices);

// Every op at degree 1, op i on device (layer of i) where the layer is read
// from the op id prefix before '_'; layers are numbered in first-seen order.
// Used for the layer-per-device strategy of the rnn3 model.
ParallelizationStrategy layer_per_device_strategy(const OperatorGraph& graph,
                                                  const DeviceTopology& topology);

}  // namespace soapsim

#endif  // SOAPSIM_GENERATORS_H_
