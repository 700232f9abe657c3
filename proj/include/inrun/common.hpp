//
// Copyright 2026 The inrunshap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <stdexcept>
#include <string>

namespace inrun {

// Contract violation: bad shapes, invalid arguments, broken preconditions.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime (overflow, divergence, non-finite values).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration file or invalid key/value.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File I/O failure (missing file, short read, bad magic, malformed row).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace inrun
