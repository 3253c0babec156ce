// Copyright 2026 The pimdse Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pimdse {

// Base of every exception thrown by the library. `kind()` is a short stable
// tag that the CLI puts into its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

struct GraphError : Error {
  explicit GraphError(const std::string& what) : Error("graph", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

// Raised when no mapping satisfies buffer or DRAM-capacity limits.
struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& what) : Error("infeasible", what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

}  // namespace pimdse
