#pragma once

// Dense inner loops used by the autodiff graph and the aggregator.
//
// Every kernel comes in two flavours: a plain serial reference (kept for
// tests and the benchmark) and an OpenMP version. The OpenMP versions
// partition work by output element only, so each output is summed in the
// same order as in the serial loop and results do not depend on the thread
// count.

#include <cstddef>
#include <span>

namespace dearfed::kernels {

/// C(m x n) (+)= A(m x k) * B(k x n).
void gemm_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate);
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

/// C(m x n) += A(k x m)^T * B(k x n).
void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);

/// C(m x n) += A(m x k) * B(n x k)^T.
void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);

/// out[j] = sum_i weights[i] * rows[i][j], summed in ascending i.
void weighted_sum_reference(std::span<const double> weights, std::span<const double* const> rows,
                            std::span<double> out);
void weighted_sum(std::span<const double> weights, std::span<const double* const> rows,
                  std::span<double> out);

/// Caps the OpenMP team size (0 leaves the runtime default).
void set_max_threads(int threads);
int max_threads();

}  // namespace dearfed::kernels
