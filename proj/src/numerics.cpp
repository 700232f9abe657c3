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

#include "inrun/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace inrun {

namespace {

void check_mul_shapes(const Matrix2D& a, const Matrix2D& b, const char* op) {
  if (a.cols != b.rows) {
    throw ContractError(std::string(op) + ": inner dimensions disagree (" +
                        std::to_string(a.cols) + " vs " + std::to_string(b.rows) + ")");
  }
}

// C[i0:i1,:] += alpha * A[i0:i1,:] * B, i-k-j loop order: the k reduction is
// ascending and the j loop vectorizes over contiguous rows.
void gemm_rows(Matrix2D& c, const Matrix2D& a, const Matrix2D& b, double alpha,
               std::size_t i0, std::size_t i1) {
  const std::size_t n = a.cols;
  const std::size_t m = b.cols;
  for (std::size_t i = i0; i < i1; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = alpha * arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < m; ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
}

}  // namespace

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  check_mul_shapes(a, b, "matmul");
  Matrix2D c(a.rows, b.cols, 0.0);
  parallel_for(a.rows, [&](std::size_t i0, std::size_t i1) {
    gemm_rows(c, a, b, 1.0, i0, i1);
  });
  return c;
}

void matmul_accumulate(Matrix2D& c, const Matrix2D& a, const Matrix2D& b, double alpha) {
  check_mul_shapes(a, b, "matmul_accumulate");
  if (c.rows != a.rows || c.cols != b.cols) {
    throw ContractError("matmul_accumulate: output shape mismatch");
  }
  parallel_for(a.rows, [&](std::size_t i0, std::size_t i1) {
    gemm_rows(c, a, b, alpha, i0, i1);
  });
}

Matrix2D matmul_transposed_b(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols != b.cols) {
    throw ContractError("matmul_transposed_b: inner dimensions disagree");
  }
  Matrix2D c(a.rows, b.rows, 0.0);
  parallel_for(a.rows, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double* arow = a.row_ptr(i);
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < b.rows; ++j) {
        const double* brow = b.row_ptr(j);
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
        crow[j] = s;
      }
    }
  });
  return c;
}

void add_at_b_rows(Matrix2D& c, const Matrix2D& a, const Matrix2D& b,
                   std::size_t row_begin, std::size_t row_end) {
  if (a.cols != c.rows || b.cols != c.cols) {
    throw ContractError("add_at_b_rows: shape mismatch");
  }
  if (row_end > a.rows || row_end > b.rows || row_begin > row_end) {
    throw ContractError("add_at_b_rows: row range out of bounds");
  }
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* arow = a.row_ptr(r);
    const double* brow = b.row_ptr(r);
    for (std::size_t i = 0; i < c.rows; ++i) {
      const double ai = arow[i];
      if (ai == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < c.cols; ++j) crow[j] += ai * brow[j];
    }
  }
}

double frobenius_dot(const Matrix2D& a, const Matrix2D& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ContractError("frobenius_dot: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Matrix2D transposed(const Matrix2D& a) {
  Matrix2D t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(const Matrix2D& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGamma);
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
  if (bound == 0) throw ContractError("SeededRng::next_below: bound must be positive");
  const unsigned __int128 m =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(bound);
  return static_cast<std::uint64_t>(m >> 64);
}

double SeededRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
  // u1 is kept away from 0 so the log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> sample_batch(SeededRng& rng, std::size_t n, std::size_t batch_size) {
  if (batch_size > n) {
    throw ContractError("sample_batch: batch_size " + std::to_string(batch_size) +
                        " exceeds population " + std::to_string(n));
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  // Partial Fisher-Yates: after batch_size swaps the prefix is the sample.
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

unsigned max_threads() {
  static const unsigned cached = [] {
    const char* env = std::getenv("INRUN_THREADS");
    if (env == nullptr) return 1u;
    const long v = std::strtol(env, nullptr, 10);
    if (v < 1) return 1u;
    return static_cast<unsigned>(v);
  }();
  return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const unsigned threads = max_threads();
  if (threads <= 1 || n < 2 * threads) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = std::min(n, static_cast<std::size_t>(t) * chunk);
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace inrun
