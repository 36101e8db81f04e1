#include <random>

#include "conad/errors.hpp"
#include "conad/kernels.hpp"
#include "conad/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace conad;

TEST_CASE("tensor construction and access") {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6);
  CHECK(m.row(1)[0] == 4);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK(Tensor().rank() == 0);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(m.item(), ShapeError);
}

TEST_CASE("row views, reshape and gather") {
  const Tensor m = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const Tensor s = m.slice_rows(1, 3);
  CHECK(s == Tensor::matrix(2, 2, {3, 4, 5, 6}));
  const std::vector<std::size_t> idx{2, 0};
  CHECK(m.gather_rows(idx) == Tensor::matrix(2, 2, {5, 6, 1, 2}));
  CHECK(m.reshaped(Shape{6}).shape() == Shape{6});
  CHECK_THROWS_AS(m.reshaped(Shape{4}), ShapeError);
  Tensor bad = m;
  bad[3] = NAN;
  CHECK_FALSE(bad.all_finite());
  CHECK(m.all_finite());
}

TEST_CASE("parallel kernels match serial kernels bit for bit") {
  std::mt19937_64 rng(7);
  for (const std::size_t n : {3u, 17u, 70u}) {
    const std::size_t m = n + 1, k = n + 2;
    const Tensor a = oracle::random_tensor(Shape{m, k}, rng);
    const Tensor b = oracle::random_tensor(Shape{k, n}, rng);
    std::vector<double> c1(m * n), c2(m * n);
    kernels::matmul_serial(a.data(), b.data(), c1, m, k, n);
    kernels::matmul(a.data(), b.data(), c2, m, k, n);
    CHECK(c1 == c2);

    const Tensor bt = oracle::random_tensor(Shape{n, k}, rng);
    std::vector<double> d1(m * n, 0.5), d2(m * n, 0.5);
    kernels::matmul_nt_acc_serial(a.data(), bt.data(), d1, m, k, n);
    kernels::matmul_nt_acc(a.data(), bt.data(), d2, m, k, n);
    CHECK(d1 == d2);

    const Tensor g = oracle::random_tensor(Shape{m, n}, rng);
    std::vector<double> e1(k * n, 0.25), e2(k * n, 0.25);
    kernels::matmul_tn_acc_serial(a.data(), g.data(), e1, m, k, n);
    kernels::matmul_tn_acc(a.data(), g.data(), e2, m, k, n);
    CHECK(e1 == e2);

    std::vector<double> p1(m * m), p2(m * m);
    kernels::pairwise_distances_serial(a.data(), p1, m, k);
    kernels::pairwise_distances(a.data(), p2, m, k);
    CHECK(p1 == p2);
  }
}

TEST_CASE("matmul agrees with a naive triple loop") {
  std::mt19937_64 rng(3);
  const std::size_t m = 5, k = 4, n = 6;
  const Tensor a = oracle::random_tensor(Shape{m, k}, rng);
  const Tensor b = oracle::random_tensor(Shape{k, n}, rng);
  std::vector<double> c(m * n);
  kernels::matmul(a.data(), b.data(), c, m, k, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
  }
}

TEST_CASE("pairwise distances are symmetric with a zero diagonal") {
  std::mt19937_64 rng(5);
  const std::size_t n = 9, d = 3;
  const Tensor x = oracle::random_tensor(Shape{n, d}, rng);
  std::vector<double> p(n * n);
  kernels::pairwise_distances(x.data(), p, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(p[i * n + i] == 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(p[i * n + j] == p[j * n + i]);
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += (x.at(i, t) - x.at(j, t)) * (x.at(i, t) - x.at(j, t));
      CHECK(p[i * n + j] == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
    }
  }
}
