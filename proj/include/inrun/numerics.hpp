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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "inrun/common.hpp"

namespace inrun {

// Dense row-major matrix of 64-bit floats. Plain aggregate; all heavy
// operations are free functions so the layout stays transparent.
struct Matrix2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix2D() = default;
  Matrix2D(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return rows * cols; }
  void fill(double v) { data.assign(rows * cols, v); }
};

// C = A * B. Inner reduction runs in ascending index order so results are
// bit-reproducible; row blocks may be computed in parallel since each output
// row depends only on one row of A.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);

// C += alpha * A * B, same reduction-order guarantees as matmul.
void matmul_accumulate(Matrix2D& c, const Matrix2D& a, const Matrix2D& b,
                       double alpha = 1.0);

// C = A * B^T.
Matrix2D matmul_transposed_b(const Matrix2D& a, const Matrix2D& b);

// C += A^T * B restricted to a contiguous row range [row_begin, row_end) of
// both A and B. Used to form per-sample weight gradients from stacked traces.
void add_at_b_rows(Matrix2D& c, const Matrix2D& a, const Matrix2D& b,
                   std::size_t row_begin, std::size_t row_end);

// Sum_{jk} A_jk * B_jk over matrices of identical shape.
double frobenius_dot(const Matrix2D& a, const Matrix2D& b);

Matrix2D transposed(const Matrix2D& a);

double dot(const std::vector<double>& a, const std::vector<double>& b);

// y += alpha * x
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);

bool all_finite(const Matrix2D& a);

// Counter-based deterministic generator (SplitMix64). The k-th draw after
// seeding is mix64(seed + k * 0x9E3779B97F4A7C15) and depends only on
// (seed, k), so identical seeds give identical streams on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64();

  // Uniform in [0, bound) via 128-bit multiply-shift; consumes one draw.
  std::uint64_t next_below(std::uint64_t bound);

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Standard normal via Box-Muller; consumes two draws, returns one value.
  double next_gaussian();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// Uniform sample of batch_size indices from [0, n) without replacement,
// returned sorted ascending so downstream reductions have a fixed order.
std::vector<std::size_t> sample_batch(SeededRng& rng, std::size_t n,
                                      std::size_t batch_size);

// Thread cap for internal data parallelism; reads INRUN_THREADS once
// (default 1, which keeps every code path trivially bit-reproducible).
unsigned max_threads();

// Runs fn(begin, end) over a partition of [0, n) using at most max_threads()
// threads. Chunks are contiguous, so per-row / per-pair work stays
// bit-identical to the serial order as long as chunks do not share outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace inrun
