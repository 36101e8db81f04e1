#pragma once

#include <cstddef>
#include <span>

// Dense inner loops used by the autodiff engine, scoring and LOF.
//
// Every kernel comes in two flavours: a plain serial loop kept as the
// reference, and an OpenMP version that splits the outermost loop across
// threads. Each output element is produced by exactly one thread with the same
// accumulation order as the serial loop, so both flavours are bit-identical.
namespace conad::kernels {

// C[m x n] = A[m x k] * B[k x n]
void matmul_serial(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n);
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// C[m x n] += A[m x k] * B[n x k]^T
void matmul_nt_acc_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k,
                          std::size_t n);
void matmul_nt_acc(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n);

// C[k x n] += A[m x k]^T * B[m x n]
void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k,
                          std::size_t n);
void matmul_tn_acc(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n);

// Full Euclidean distance matrix between the rows of X[n x d] (n x n output).
void pairwise_distances_serial(std::span<const double> x, std::span<double> out,
                               std::size_t n, std::size_t d);
void pairwise_distances(std::span<const double> x, std::span<double> out,
                        std::size_t n, std::size_t d);

// Below this many multiply-adds the parallel flavours run serially.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace conad::kernels
