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

// JSON interchange for graphs, topologies, strategies and search reports.
// Every document carries a top-level "format_version"; the schemas are in
// docs/formats.md. Parse functions throw InputError with the source name.

#ifndef SOAPSIM_SERIALIZATION_H_
#define SOAPSIM_SERIALIZATION_H_

#include <string>
#include <string_view>

#include "soapsim/core_model.h"
#include "soapsim/search.h"
#include "soapsim/soap_space.h"

namespace soapsim {

inline constexpr int kFormatVersion = 1;

std::string write_graph(const OperatorGraph& graph);
OperatorGraph parse_graph(std::string_view text, std::string_view source = "<graph>");

std::string write_topology(const DeviceTopology& topology);
DeviceTopology parse_topology(std::string_view text, std::string_view source = "<topology>");

// Strategies refer to ops and devices by id.
std::string write_strategy(const ParallelizationStrategy& strategy, const OperatorGraph& graph,
                           const DeviceTopology& topology);
ParallelizationStrategy parse_strategy(std::string_view text, const OperatorGraph& graph,
                                       const DeviceTopology& topology,
                                       std::string_view source = "<strategy>");

std::string write_report(const SearchReport& report, const OperatorGraph& graph,
                         const DeviceTopology& topology);
SearchReport parse_report(std::string_view text, const OperatorGraph& graph,
                          const DeviceTopology& topology, std::string_view source = "<report>");

// Whole-file helpers; errors name the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

OperatorGraph load_graph(const std::string& path);
DeviceTopology load_topology(const std::string& path);
ParallelizationStrategy load_strategy(const std::string& path, const OperatorGraph& graph,
                                      const DeviceTopology& topology);

}  // namespace soapsim

#endif  // SOAPSIM_SERIALIZATION_H_
