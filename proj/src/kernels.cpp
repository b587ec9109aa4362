#include "dearfed/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace dearfed::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

constexpr std::size_t kBlockRows = 4;
constexpr std::size_t kBlockCols = 32;

// C(m x n) += A * B with A(i, p) = a[i * rs + p * cs] and B row-major k x n.
// Each c[i][j] receives a(i, p) * b(p, j) for p = 0, 1, ... in order, exactly
// as the serial references do, so results are bit-identical to them. The
// blocking only keeps a 4 x 32 tile of C in registers across the p loop.
template <std::size_t R, std::size_t C>
inline void tile(const double* a, std::size_t rs, std::size_t cs, const double* b, double* c,
                 std::size_t k, std::size_t n) {
  double acc[R][C];
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t t = 0; t < C; ++t) acc[r][t] = c[r * n + t];
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t r = 0; r < R; ++r) {
      const double av = a[r * rs + p * cs];
      for (std::size_t t = 0; t < C; ++t) acc[r][t] += av * brow[t];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t t = 0; t < C; ++t) c[r * n + t] = acc[r][t];
  }
}

inline void row_tail(const double* a, std::size_t cs, const double* b, double* crow, std::size_t k,
                     std::size_t n, std::size_t j0) {
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * cs];
    const double* brow = b + p * n;
    for (std::size_t j = j0; j < n; ++j) crow[j] += av * brow[j];
  }
}

void blocked_axpy_gemm(const double* a, std::size_t rs, std::size_t cs, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t full_cols = n - n % kBlockCols;
  const auto blocks = static_cast<std::ptrdiff_t>((m + kBlockRows - 1) / kBlockRows);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t bb = 0; bb < blocks; ++bb) {
    const std::size_t i0 = static_cast<std::size_t>(bb) * kBlockRows;
    const std::size_t rows = std::min(kBlockRows, m - i0);
    for (std::size_t j0 = 0; j0 < full_cols; j0 += kBlockCols) {
      const double* ab = a + i0 * rs;
      double* cb = c + i0 * n + j0;
      if (rows == kBlockRows) {
        tile<kBlockRows, kBlockCols>(ab, rs, cs, b + j0, cb, k, n);
      } else {
        for (std::size_t r = 0; r < rows; ++r) tile<1, kBlockCols>(ab + r * rs, rs, cs, b + j0, cb + r * n, k, n);
      }
    }
    if (full_cols < n) {
      for (std::size_t r = 0; r < rows; ++r) {
        row_tail(a + (i0 + r) * rs, cs, b, c + (i0 + r) * n, k, n, full_cols);
      }
    }
  }
}

}  // namespace

void gemm_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  blocked_axpy_gemm(a, k, 1, b, c, m, k, n);
}

void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  blocked_axpy_gemm(a, 1, m, b, c, m, k, n);
}

void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  // Transposing B turns the inner dot product into the axpy form.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  blocked_axpy_gemm(a, k, 1, bt.data(), c, m, k, n);
}

void weighted_sum_reference(std::span<const double> weights, std::span<const double* const> rows,
                            std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * rows[i][j];
    out[j] = acc;
  }
}

void weighted_sum(std::span<const double> weights, std::span<const double* const> rows,
                  std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const std::size_t k = weights.size();
#pragma omp parallel for schedule(static) if (out.size() * k > kParallelWork)
  for (std::ptrdiff_t jj = 0; jj < n; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += weights[i] * rows[i][j];
    out[j] = acc;
  }
}

void set_max_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace dearfed::kernels
