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

#include <cstdint>
#include <iosfwd>

namespace inrun {

struct VerifyOptions {
  bool quick = false;            // smaller instance counts
  bool inject_sign_flip = false; // negative control: force one check to fail
  std::uint64_t seed = 20260810;
};

// Runs the full property suite (ghost equivalences, Hessian checks, Shapley
// axioms, closed-form-vs-enumeration, trainer invariants) and prints one
// pass/fail line per check. Returns true iff everything passed.
bool run_verify_suite(std::ostream& os, const VerifyOptions& options);

}  // namespace inrun
