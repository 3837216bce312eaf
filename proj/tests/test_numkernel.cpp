#include <cmath>
#include <limits>
#include <vector>

#include "affectlab/errors.hpp"
#include "affectlab/numkernel.hpp"
#include "affectlab/random.hpp"
#include "doctest.h"

using namespace affectlab;

TEST_CASE("softmax of 1,2,3") {
  const std::vector<double> logits = {1.0, 2.0, 3.0};
  const auto p = softmax(logits);
  // e^x / sum e^x, by hand: e=2.71828, e^2=7.38906, e^3=20.08554, sum 30.19288.
  CHECK(p[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(0.66524).epsilon(1e-4));
}

TEST_CASE("softmax is shift invariant and survives huge logits") {
  const std::vector<double> a = {1000.0, 1001.0, 1002.0};
  const std::vector<double> b = {0.0, 1.0, 2.0};
  const auto pa = softmax(a);
  const auto pb = softmax(b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
  CHECK_THROWS_AS(softmax(std::vector<double>{}), ArgumentError);
}

TEST_CASE("softmax sums to one over random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng.below(30));
    const double mag = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (double& v : x) v = rng.uniform(-mag, mag);
    double sum = 0.0;
    for (double v : softmax(x)) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("cross entropy") {
  const std::vector<double> uniform4(4, 0.25);
  CHECK(cross_entropy(uniform4, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  const std::vector<double> uniform20(20, 0.05);
  CHECK(cross_entropy(uniform20, 0) == doctest::Approx(2.9957).epsilon(1e-4));
  const std::vector<double> sure = {0.0, 1.0};
  CHECK(cross_entropy(sure, 1) == 0.0);
  CHECK(cross_entropy(sure, 0) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(sure, 2), ArgumentError);
}

TEST_CASE("mse") {
  const std::vector<double> p = {1.0, 2.0, 3.0};
  const std::vector<double> t = {1.0, 2.0, 0.0};
  CHECK(mse(p, t) == doctest::Approx(3.0));
  CHECK(mse(p, p) == 0.0);
  CHECK_THROWS_AS(mse(p, std::vector<double>{1.0}), ArgumentError);
}

TEST_CASE("affine and its adjoints") {
  Matrix w(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<double> x = {1, 0, -1};
  const std::vector<double> b = {0.5, -0.5};
  std::vector<double> y(2);
  affine(w, b, x, y);
  CHECK(y[0] == doctest::Approx(-1.5));
  CHECK(y[1] == doctest::Approx(-2.5));

  std::vector<double> back(3, 0.0);
  add_transposed_product(w, std::vector<double>{1.0, 1.0}, back);
  CHECK(back == std::vector<double>{5, 7, 9});

  Matrix g(2, 3);
  add_outer(g, std::vector<double>{1.0, 2.0}, x);
  CHECK(g == Matrix(2, 3, std::vector<double>{1, 0, -1, 2, 0, -2}));
}

TEST_CASE("checksum tracks values and shapes") {
  Matrix a(2, 2, 1.0), b(1, 4, 1.0);
  const Matrix* pa[] = {&a};
  const Matrix* pb[] = {&b};
  CHECK(checksum(pa) != checksum(pb));
  const auto before = checksum(pa);
  a(1, 1) = std::nextafter(1.0, 2.0);
  CHECK(checksum(pa) != before);
}

TEST_CASE("grad_check on a linear softmax head") {
  Matrix w(3, 2, std::vector<double>{0.1, -0.2, 0.3, 0.05, -0.4, 0.2});
  const std::vector<double> x = {0.7, -1.3};
  const LossWithGradient loss = [&](std::vector<Matrix>* grads) {
    std::vector<double> z(3);
    affine(w, {}, x, z);
    const auto p = softmax(z);
    if (grads) {
      std::vector<double> d = p;
      d[1] -= 1.0;
      add_outer((*grads)[0], d, x);
    }
    return cross_entropy(p, 1);
  };
  Matrix* params[] = {&w};
  const auto report = grad_check(loss, params);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-6);
  CHECK_THROWS_AS(grad_check(loss, params, 1e-2), ArgumentError);
  CHECK_THROWS_AS(grad_check(loss, params, 1e-9), ArgumentError);
}

TEST_CASE("grad_check flags a nondeterministic loss") {
  Matrix w(1, 1, 0.5);
  int calls = 0;
  const LossWithGradient loss = [&](std::vector<Matrix>*) { return w[0] * w[0] + (++calls) * 1e-3; };
  Matrix* params[] = {&w};
  CHECK_THROWS_AS(grad_check(loss, params), ContractViolation);
}

TEST_CASE("seeded generator") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  CHECK(a.uniform() != c.uniform());
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));

  Rng n(5);
  double sum = 0.0, sq = 0.0;
  const int k = 20000;
  for (int i = 0; i < k; ++i) {
    const double v = n.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / k) < 0.05);
  CHECK(std::abs(sq / k - 1.0) < 0.05);
}
