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

// Task and transfer costs.
//
// A CostProfile maps a CostKey (op kind, hyperparameter digest, output block
// sizes, device kind) to an execution time. Misses are filled from an
// analytic FLOP model and memoized, so a key's time never changes once
// observed. The profile file format is documented in docs/formats.md.

#ifndef SOAPSIM_COST_MODEL_H_
#define SOAPSIM_COST_MODEL_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "soapsim/core_model.h"
#include "soapsim/soap_space.h"

namespace soapsim {

struct CostKey {
  OpTag tag = OpTag::kElementWise;
  std::string digest;
  std::vector<Dim> block;  // output-block size per output dimension
  std::string device_kind;

  // "kind;digest;dim=size,...;device-kind", the profile record prefix.
  std::string to_string() const;

  friend bool operator==(const CostKey&, const CostKey&) = default;
};

CostKey make_cost_key(const Operation& op, const TensorRegion& out,
                      std::string_view device_kind);

struct AnalyticCostModel {
  std::map<std::string, double, std::less<>> throughput;  // FLOP/s by kind
  double default_throughput = 1e12;
  double overhead = 0.0;  // seconds added to every task

  double flops(const Operation& op, const TensorRegion& out) const;
  double time(const Operation& op, const TensorRegion& out,
              std::string_view device_kind) const;
};

class CostProfile {
 public:
  CostProfile() = default;
  explicit CostProfile(const AnalyticCostModel& fallback);
  CostProfile(const CostProfile& other);
  CostProfile& operator=(const CostProfile& other);

  // Profile entry if present, otherwise the analytic time, memoized.
  double task_exe_time(const Operation& op, const TensorRegion& out,
                       const Device& device) const;

  // Throws InputError for non-positive or non-finite times.
  void set_entry(const std::string& key, double seconds);
  std::optional<double> find(const std::string& key) const;
  // Snapshot of all entries, sorted by key.
  std::map<std::string, double> entries() const;

  // Settings: "throughput:<kind>", "default-throughput", "overhead".
  void set_setting(const std::string& name, double value);
  const std::map<std::string, double>& settings() const { return settings_; }
  const AnalyticCostModel& fallback() const { return fallback_; }

  // Number of analytic evaluations performed (cache misses).
  std::uint64_t fallback_calls() const { return fallback_calls_.load(); }

  friend bool operator==(const CostProfile& a, const CostProfile& b) {
    return a.entries() == b.entries() && a.settings_ == b.settings_;
  }

 private:
  void rebuild_fallback();

  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, double> entries_;
  std::map<std::string, double> settings_;
  AnalyticCostModel fallback_;
  mutable std::atomic<std::uint64_t> fallback_calls_{0};
};

double task_exe_time(const CostProfile& profile, const Operation& op,
                     const TensorRegion& out, const Device& device);

// latency + bytes / bandwidth.
double comm_time(const Connection& conn, std::int64_t bytes);

CostProfile parse_profile(std::string_view text,
                          std::string_view source = "<profile>");
CostProfile load_profile(const std::string& path);
std::string write_profile(const CostProfile& profile);
// Union of entries and settings; b wins on conflicts.
CostProfile merge_profiles(const CostProfile& a, const CostProfile& b);

}  // namespace soapsim

#endif  // SOAPSIM_COST_MODEL_H_
