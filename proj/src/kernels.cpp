#include "conad/kernels.hpp"

#include <cmath>

namespace conad::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c,
                          std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * brow[p];
    c[j] += acc;
  }
}

// Row p of C += A^T B, i.e. sum_i A[i,p] * B[i,:].
inline void matmul_tn_row(const double* a, const double* b, double* c,
                          std::size_t p, std::size_t m, std::size_t k,
                          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    if (av == 0.0) continue;
    const double* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void distance_row(const double* x, double* out, std::size_t i,
                         std::size_t n, std::size_t d) {
  const double* xi = x + i * d;
  for (std::size_t j = 0; j < n; ++j) {
    const double* xj = x + j * d;
    double s = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = xi[q] - xj[q];
      s += diff * diff;
    }
    out[i * n + j] = std::sqrt(s);
  }
}

}  // namespace

void matmul_serial(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  const bool big = m * k * n >= kParallelThreshold;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void matmul_nt_acc_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k,
                          std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_nt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n) {
  const bool big = m * k * n >= kParallelThreshold;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_nt_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k,
                          std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    matmul_tn_row(a.data(), b.data(), c.data() + p * n, p, m, k, n);
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b,
                   std::span<double> c, std::size_t m, std::size_t k,
                   std::size_t n) {
  const bool big = m * k * n >= kParallelThreshold;
  const auto outs = static_cast<long long>(k);
#pragma omp parallel for schedule(static) if (big)
  for (long long p = 0; p < outs; ++p) {
    const auto r = static_cast<std::size_t>(p);
    matmul_tn_row(a.data(), b.data(), c.data() + r * n, r, m, k, n);
  }
}

void pairwise_distances_serial(std::span<const double> x, std::span<double> out,
                               std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) distance_row(x.data(), out.data(), i, n, d);
}

void pairwise_distances(std::span<const double> x, std::span<double> out,
                        std::size_t n, std::size_t d) {
  const bool big = n * n * d >= kParallelThreshold;
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i) {
    distance_row(x.data(), out.data(), static_cast<std::size_t>(i), n, d);
  }
}

}  // namespace conad::kernels
