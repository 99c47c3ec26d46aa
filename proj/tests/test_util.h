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

// Shared fixtures and hand-rolled generators for the unit tests.

#ifndef SOAPSIM_TESTS_TEST_UTIL_H_
#define SOAPSIM_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "soapsim/core_model.h"
#include "soapsim/cost_model.h"
#include "soapsim/soap_space.h"
#include "soapsim/task_graph.h"

namespace soapsim::testing {

inline TensorShape shape(std::initializer_list<Dim> dims, std::int64_t element_size = 4) {
  return TensorShape{std::vector<Dim>(dims), element_size};
}

inline TensorShape sc(std::int64_t sample, std::int64_t channel) {
  return shape({{DimName::kSample, sample}, {DimName::kChannel, channel}});
}

inline Operation matmul(const std::string& id, std::int64_t sample, std::int64_t channel,
                        std::int64_t in_channels, std::int64_t param_bytes = 0) {
  return {id, OperatorKind::matmul(in_channels), sc(sample, channel), param_bytes};
}

inline Operation elementwise(const std::string& id, TensorShape s) {
  return {id, OperatorKind::element_wise(), std::move(s), 0};
}

// Fully connected devices "d0".."d{n-1}", all of one kind on node "n0".
inline DeviceTopology mesh(std::size_t n, double bandwidth = 1e9, double latency = 0.0,
                           const std::string& kind = "gpu") {
  std::vector<Device> devices;
  for (std::size_t i = 0; i < n; ++i) devices.push_back({"d" + std::to_string(i), kind, "n0"});
  std::vector<Connection> links;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      links.push_back({devices[i].id, devices[j].id, bandwidth, latency});
    }
  }
  return DeviceTopology(std::move(devices), std::move(links));
}

inline DegreeMap degrees(std::initializer_list<std::pair<DimName, std::int64_t>> entries) {
  DegreeMap m;
  for (const auto& [name, d] : entries) m[name] = d;
  return m;
}

inline ParallelizationConfig config(DegreeMap d, std::vector<std::size_t> assignment) {
  return {d, std::move(assignment)};
}

inline ParallelizationConfig on_device(std::size_t device) { return {DegreeMap{}, {device}}; }

// Pins the execution time of task k of `op` under `c` on devices of `kind`.
inline void pin_time(CostProfile& profile, const Operation& op, const ParallelizationConfig& c,
                     std::int64_t k, const std::string& kind, double seconds) {
  profile.set_entry(make_cost_key(op, output_region(op, c, k), kind).to_string(), seconds);
}

// Per-task (device slot, ready, start, end) keyed by TaskKey.
using KeyedTimeline = std::map<TaskKey, std::tuple<std::uint32_t, double, double, double>>;

inline KeyedTimeline keyed_timeline(const TaskGraph& tg) {
  KeyedTimeline m;
  for (TaskId id : tg.task_ids()) {
    m[tg.task(id).key] = {tg.task(id).device, tg.ready_time(id), tg.start_time(id),
                          tg.end_time(id)};
  }
  return m;
}

// Structure keyed by TaskKey: device, exeTime, bytes and sorted input keys.
using KeyedStructure =
    std::map<TaskKey, std::tuple<std::uint32_t, double, std::int64_t, std::vector<TaskKey>>>;

inline KeyedStructure keyed_structure(const TaskGraph& tg) {
  KeyedStructure m;
  for (TaskId id : tg.task_ids()) {
    const Task& t = tg.task(id);
    std::vector<TaskKey> inputs;
    for (TaskId in : t.inputs) inputs.push_back(tg.task(in).key);
    std::sort(inputs.begin(), inputs.end());
    m[t.key] = {t.device, t.exe_time, t.bytes, inputs};
  }
  return m;
}

struct RandomGraphOptions {
  int min_ops = 2;
  int max_ops = 12;
  bool convolutions = true;
};

// Random valid operator graph mixing every operator kind on small shapes
// whose sizes have several divisors.
inline OperatorGraph random_graph(std::mt19937_64& rng, const RandomGraphOptions& opt = {}) {
  auto pick = [&](auto... values) {
    const std::int64_t v[] = {values...};
    return v[std::uniform_int_distribution<std::size_t>(0, sizeof...(values) - 1)(rng)];
  };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const std::int64_t sample = pick(2, 4, 8);
  const int n = std::uniform_int_distribution<int>(opt.min_ops, opt.max_ops)(rng);
  GraphBuilder b;
  std::vector<Operation> made;
  auto params = [&](std::int64_t v) { return coin(0.7) ? v * 4 : 0; };
  auto of_dims = [&](std::size_t ndims) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < made.size(); ++i) {
      if (made[i].output_shape.dims.size() == ndims) idx.push_back(i);
    }
    return idx;
  };
  auto any = [&](const std::vector<std::size_t>& idx) {
    return idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
  };
  for (int i = 0; i < n; ++i) {
    const std::string id = "op" + std::to_string(i);
    const int kind = std::uniform_int_distribution<int>(0, opt.convolutions ? 7 : 3)(rng);
    std::vector<std::size_t> inputs;
    Operation op;
    op.id = id;
    const auto flat = of_dims(2);
    const auto seq = of_dims(3);
    const auto img = of_dims(4);
    if (kind == 0 || made.empty()) {
      // MatMul over one to three earlier ops (or a source).
      const std::int64_t out = pick(2, 4, 6, 8);
      std::int64_t fan = pick(2, 4, 8);
      if (!made.empty() && coin(0.85)) {
        fan = 0;
        const int k = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int j = 0; j < k; ++j) {
          const auto src = std::uniform_int_distribution<std::size_t>(0, made.size() - 1)(rng);
          if (std::find(inputs.begin(), inputs.end(), src) != inputs.end()) continue;
          inputs.push_back(src);
          fan += made[src].output_shape.num_elements() / sample;
        }
      }
      op.kind = OperatorKind::matmul(fan);
      op.output_shape = sc(sample, out);
      op.param_bytes = params(fan * out);
    } else if (kind == 1 && !flat.empty()) {
      const std::size_t src = any(flat);
      inputs.push_back(src);
      for (std::size_t j : flat) {
        if (j != src && made[j].output_shape == made[src].output_shape && coin(0.5)) {
          inputs.push_back(j);
          break;
        }
      }
      op.kind = OperatorKind::element_wise();
      op.output_shape = made[src].output_shape;
    } else if (kind == 2 && flat.size() >= 2) {
      const std::size_t a = any(flat);
      std::size_t c = any(flat);
      if (c == a) c = flat.front() == a ? flat.back() : flat.front();
      inputs = {a, c};
      op.kind = OperatorKind::concat(DimName::kChannel);
      op.output_shape = sc(sample, made[a].output_shape.size_of(DimName::kChannel) +
                                       made[c].output_shape.size_of(DimName::kChannel));
    } else if (kind == 3) {
      // Embedding source.
      const std::int64_t rows = pick(8, 16);
      const std::int64_t width = pick(2, 4, 8);
      op.kind = OperatorKind::embedding(rows);
      op.output_shape = sc(sample, width);
      op.param_bytes = rows * width * 4;
    } else if (kind == 4 || kind == 5) {
      // Conv1D or Pool1D, from a sequence op or as a source.
      const Window w{pick(1, 2, 3), pick(1, 1, 2), coin(0.5) ? Padding::kSame : Padding::kValid};
      std::int64_t len = pick(4, 6, 8, 12);
      std::int64_t cin = pick(2, 4);
      if (!seq.empty() && coin(0.8)) {
        const std::size_t src = any(seq);
        inputs.push_back(src);
        len = made[src].output_shape.size_of(DimName::kLength);
        cin = made[src].output_shape.size_of(DimName::kChannel);
      }
      const std::int64_t out_len = window_output_size(w, len);
      if (out_len < 1) {
        --i;
        continue;
      }
      const bool conv = kind == 4 || inputs.empty();
      const std::int64_t cout = conv ? pick(2, 4, 8) : cin;
      op.kind = conv ? OperatorKind::conv1d(w, cin) : OperatorKind::pool1d(w);
      op.output_shape = shape(
          {{DimName::kSample, sample}, {DimName::kLength, out_len}, {DimName::kChannel, cout}});
      op.param_bytes = conv ? params(w.kernel * cin * cout) : 0;
    } else if (kind == 6 || kind == 7) {
      const Window h{pick(1, 3), 1, Padding::kSame};
      const Window w{pick(1, 2), pick(1, 2), Padding::kValid};
      std::int64_t hs = pick(4, 6);
      std::int64_t ws = pick(4, 8);
      std::int64_t cin = pick(2, 4);
      if (!img.empty() && coin(0.8)) {
        const std::size_t src = any(img);
        inputs.push_back(src);
        hs = made[src].output_shape.size_of(DimName::kHeight);
        ws = made[src].output_shape.size_of(DimName::kWidth);
        cin = made[src].output_shape.size_of(DimName::kChannel);
      }
      const std::int64_t oh = window_output_size(h, hs);
      const std::int64_t ow = window_output_size(w, ws);
      if (oh < 1 || ow < 1) {
        --i;
        continue;
      }
      const bool conv = kind == 6 || inputs.empty();
      const std::int64_t cout = conv ? pick(2, 4) : cin;
      op.kind = conv ? OperatorKind::conv2d(h, w, cin) : OperatorKind::pool2d(h, w);
      op.output_shape = shape({{DimName::kSample, sample},
                               {DimName::kHeight, oh},
                               {DimName::kWidth, ow},
                               {DimName::kChannel, cout}});
      op.param_bytes = conv ? params(h.kernel * w.kernel * cin * cout) : 0;
    } else {
      --i;
      continue;
    }
    b.add(op);
    for (std::size_t src : inputs) b.connect(made[src].id, id);
    made.push_back(op);
  }
  return b.build();
}

// Full mesh with randomized link parameters and one or two device kinds.
inline DeviceTopology random_topology(std::mt19937_64& rng, std::size_t devices) {
  const double bandwidths[] = {4.0, 8.0, 1e9, 1e3};
  const double latencies[] = {0.0, 0.0, 0.5, 1e-6};
  std::uniform_int_distribution<int> four(0, 3);
  const bool two_kinds = std::bernoulli_distribution(0.3)(rng);
  std::vector<Device> list;
  for (std::size_t i = 0; i < devices; ++i) {
    list.push_back({"d" + std::to_string(i), two_kinds && i % 2 ? "k80" : "p100",
                    "n" + std::to_string(i / 4)});
  }
  std::vector<Connection> links;
  const bool uniform = std::bernoulli_distribution(0.5)(rng);
  const double bw = bandwidths[four(rng)];
  const double lat = latencies[four(rng)];
  for (std::size_t i = 0; i < devices; ++i) {
    for (std::size_t j = i + 1; j < devices; ++j) {
      links.push_back({list[i].id, list[j].id, uniform ? bw : bandwidths[four(rng)],
                       uniform ? lat : latencies[four(rng)]});
    }
  }
  return DeviceTopology(std::move(list), std::move(links));
}

// Either the default analytic profile, one where every task takes exactly
// one second (maximizing readyTime ties), or randomized throughputs.
inline CostProfile random_profile(std::mt19937_64& rng) {
  CostProfile profile;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      break;
    case 1:
      profile.set_setting("default-throughput", 1e300);
      profile.set_setting("overhead", 1.0);
      break;
    default:
      profile.set_setting("throughput:p100", std::uniform_real_distribution<double>(1, 1e3)(rng));
      profile.set_setting("throughput:k80", std::uniform_real_distribution<double>(1, 1e3)(rng));
      break;
  }
  return profile;
}

}  // namespace soapsim::testing

#endif  // SOAPSIM_TESTS_TEST_UTIL_H_
