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

#ifndef SOAPSIM_ERROR_H_
#define SOAPSIM_ERROR_H_

#include <stdexcept>
#include <string>

namespace soapsim {

// Malformed or inconsistent user input (files, flags, graphs, strategies).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when two communicating devices have no direct connection.
class NoRouteError : public InputError {
 public:
  using InputError::InputError;
};

// Failure while simulating a task graph (cycles, unreachable tasks, misuse).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration was refused because the space exceeds the configured cap.
class CapExceededError : public std::runtime_error {
 public:
  CapExceededError(const std::string& what, double estimated_size)
      : std::runtime_error(what), estimated_size_(estimated_size) {}

  double estimated_size() const { return estimated_size_; }

 private:
  double estimated_size_;
};

}  // namespace soapsim

#endif  // SOAPSIM_ERROR_H_
