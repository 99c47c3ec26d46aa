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

#include "soapsim/cost_model.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "soapsim/error.h"

namespace soapsim {

std::string CostKey::to_string() const {
  std::string s(soapsim::to_string(tag));
  s += ';';
  s += digest;
  s += ';';
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (i) s += ',';
    s += soapsim::to_string(block[i].name);
    s += '=';
    s += std::to_string(block[i].size);
  }
  s += ';';
  s += device_kind;
  return s;
}

CostKey make_cost_key(const Operation& op, const TensorRegion& out,
                      std::string_view device_kind) {
  CostKey key{op.kind.tag, op.kind.digest(), {}, std::string(device_kind)};
  key.block.reserve(op.output_shape.dims.size());
  for (std::size_t i = 0; i < op.output_shape.dims.size(); ++i) {
    key.block.push_back({op.output_shape.dims[i].name, out.ranges[i].length()});
  }
  return key;
}

double AnalyticCostModel::flops(const Operation& op,
                                const TensorRegion& out) const {
  const auto elems = static_cast<double>(out.num_elements());
  auto len = [&](DimName name) -> double {
    auto i = op.output_shape.index_of(name);
    return i ? static_cast<double>(out.ranges[*i].length()) : 1.0;
  };
  double kernel = 1.0;
  for (const Window& w : op.kind.windows) kernel *= static_cast<double>(w.kernel);
  const auto cin = static_cast<double>(op.kind.in_channels);
  switch (op.kind.tag) {
    case OpTag::kMatMul:
      return 2.0 * len(DimName::kSample) * cin * len(DimName::kChannel);
    case OpTag::kConv1D:
    case OpTag::kConv2D:
      return 2.0 * elems * kernel * cin;
    case OpTag::kPool1D:
    case OpTag::kPool2D:
      return elems * kernel;
    case OpTag::kEmbedding:
    case OpTag::kElementWise:
    case OpTag::kConcat:
      return elems;
  }
  throw InputError("unknown operator kind");
}

double AnalyticCostModel::time(const Operation& op, const TensorRegion& out,
                               std::string_view device_kind) const {
  auto it = throughput.find(device_kind);
  const double rate = it == throughput.end() ? default_throughput : it->second;
  return flops(op, out) / rate + overhead;
}

CostProfile::CostProfile(const AnalyticCostModel& fallback) {
  for (const auto& [kind, rate] : fallback.throughput) {
    settings_["throughput:" + kind] = rate;
  }
  settings_["default-throughput"] = fallback.default_throughput;
  settings_["overhead"] = fallback.overhead;
  rebuild_fallback();
}

CostProfile::CostProfile(const CostProfile& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
  settings_ = other.settings_;
  fallback_ = other.fallback_;
}

CostProfile& CostProfile::operator=(const CostProfile& other) {
  if (this == &other) return *this;
  std::unordered_map<std::string, double> entries;
  {
    std::shared_lock lock(other.mutex_);
    entries = other.entries_;
  }
  std::unique_lock lock(mutex_);
  entries_ = std::move(entries);
  settings_ = other.settings_;
  fallback_ = other.fallback_;
  fallback_calls_ = 0;
  return *this;
}

double CostProfile::task_exe_time(const Operation& op, const TensorRegion& out,
                                  const Device& device) const {
  const std::string key = make_cost_key(op, out, device.kind).to_string();
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  const double t = fallback_.time(op, out, device.kind);
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InputError("cost model produced a non-positive time for " + key);
  }
  ++fallback_calls_;
  std::unique_lock lock(mutex_);
  // Another thread may have inserted first; its value wins.
  return entries_.emplace(key, t).first->second;
}

void CostProfile::set_entry(const std::string& key, double seconds) {
  if (!(seconds > 0.0) || !std::isfinite(seconds)) {
    throw InputError("profile time for '" + key + "' must be positive and finite");
  }
  std::unique_lock lock(mutex_);
  entries_[key] = seconds;
}

std::optional<double> CostProfile::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, double> CostProfile::entries() const {
  std::shared_lock lock(mutex_);
  return {entries_.begin(), entries_.end()};
}

void CostProfile::set_setting(const std::string& name, double value) {
  const bool rate = name == "default-throughput" || name.starts_with("throughput:");
  if (rate) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InputError("setting '" + name + "' must be positive");
    }
  } else if (name == "overhead") {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw InputError("overhead must be nonnegative");
    }
  } else {
    throw InputError("unknown profile setting '" + name + "'");
  }
  settings_[name] = value;
  rebuild_fallback();
}

void CostProfile::rebuild_fallback() {
  AnalyticCostModel m;
  for (const auto& [name, value] : settings_) {
    if (name == "default-throughput") {
      m.default_throughput = value;
    } else if (name == "overhead") {
      m.overhead = value;
    } else {
      m.throughput[name.substr(std::string_view("throughput:").size())] = value;
    }
  }
  fallback_ = std::move(m);
}

double task_exe_time(const CostProfile& profile, const Operation& op,
                     const TensorRegion& out, const Device& device) {
  return profile.task_exe_time(op, out, device);
}

double comm_time(const Connection& conn, std::int64_t bytes) {
  return conn.latency + static_cast<double>(bytes) / conn.bandwidth;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view text, const std::string& where) {
  std::string buf(trim(text));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(buf, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != buf.size()) {
    throw InputError(where + ": '" + buf + "' is not a number");
  }
  return v;
}

}  // namespace

CostProfile parse_profile(std::string_view text, std::string_view source) {
  CostProfile profile;
  int line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    auto fields = split(line, ';');
    for (auto& f : fields) f = trim(f);
    try {
      if (line.front() == '@') {
        const std::string_view directive = fields[0].substr(1);
        if (directive == "throughput" && fields.size() == 3) {
          profile.set_setting("throughput:" + std::string(fields[1]),
                              parse_double(fields[2], where));
        } else if ((directive == "overhead" || directive == "default-throughput") &&
                   fields.size() == 2) {
          profile.set_setting(std::string(directive), parse_double(fields[1], where));
        } else {
          throw InputError(where + ": malformed directive '" + std::string(line) + "'");
        }
        continue;
      }
      if (fields.size() != 5) {
        throw InputError(where + ": expected 5 ';'-separated fields, got " +
                         std::to_string(fields.size()));
      }
      auto tag = parse_op_tag(fields[0]);
      if (!tag) {
        throw InputError(where + ": unknown operator kind '" + std::string(fields[0]) + "'");
      }
      CostKey key{*tag, std::string(fields[1]), {}, std::string(fields[3])};
      if (key.digest.empty() || key.device_kind.empty()) {
        throw InputError(where + ": empty digest or device kind");
      }
      for (std::string_view item : split(fields[2], ',')) {
        auto eq = item.find('=');
        auto name = parse_dim_name(trim(item.substr(0, eq)));
        if (eq == std::string_view::npos || !name) {
          throw InputError(where + ": bad dimension entry '" + std::string(item) + "'");
        }
        const double size = parse_double(item.substr(eq + 1), where);
        if (size < 1 || size != std::floor(size)) {
          throw InputError(where + ": dimension size must be a positive integer");
        }
        key.block.push_back({*name, static_cast<std::int64_t>(size)});
      }
      const double seconds = parse_double(fields[4], where);
      if (!(seconds > 0.0) || !std::isfinite(seconds)) {
        throw InputError(where + ": time for '" + key.to_string() +
                         "' must be positive and finite");
      }
      profile.set_entry(key.to_string(), seconds);
    } catch (const InputError& e) {
      std::string msg = e.what();
      if (msg.rfind(where, 0) != 0) msg = where + ": " + msg;
      throw InputError(msg);
    }
  }
  return profile;
}

CostProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open profile '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str(), path);
}

std::string write_profile(const CostProfile& profile) {
  std::ostringstream out;
  out.precision(17);
  out << "# soapsim cost profile\n";
  for (const auto& [name, value] : profile.settings()) {
    if (name.starts_with("throughput:")) {
      out << "@throughput;" << name.substr(11) << ";" << value << "\n";
    } else {
      out << "@" << name << ";" << value << "\n";
    }
  }
  for (const auto& [key, seconds] : profile.entries()) {
    out << key << ";" << seconds << "\n";
  }
  return out.str();
}

CostProfile merge_profiles(const CostProfile& a, const CostProfile& b) {
  CostProfile merged(a);
  for (const auto& [name, value] : b.settings()) merged.set_setting(name, value);
  for (const auto& [key, seconds] : b.entries()) merged.set_entry(key, seconds);
  return merged;
}

}  // namespace soapsim
