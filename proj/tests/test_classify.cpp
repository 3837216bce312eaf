#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "affectlab/classify.hpp"
#include "affectlab/errors.hpp"
#include "affectlab/random.hpp"
#include "doctest.h"

using namespace affectlab;

namespace {

// Gaussian blobs around well separated class means.
void blobs(std::size_t per_class, std::size_t classes, double spread, Matrix& x,
           std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  x = Matrix(per_class * classes, 4);
  y.clear();
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t r = c * per_class + i;
      for (std::size_t d = 0; d < 4; ++d) {
        x(r, d) = (d == c % 4 ? 5.0 : 0.0) + (c >= 4 ? 5.0 : 0.0) * (d == 0) + spread * rng.normal();
      }
      y.push_back(static_cast<int>(c));
    }
  }
}

}  // namespace

TEST_CASE("svm separates easy blobs") {
  Matrix x;
  std::vector<int> y;
  blobs(20, 4, 0.3, x, y, 1);
  const SvmModel m = svm_train(x, y, 1.0);
  CHECK(m.n_classes() == 4);
  CHECK(accuracy(svm_predict(m, x), y) == 1.0);
  CHECK_THROWS_AS(svm_train(x, std::vector<int>(x.rows(), 0), 1.0), ArgumentError);
  Matrix nan = x;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(svm_train(nan, y, 1.0), DataError);
  CHECK_THROWS_AS(svm_train(x, std::vector<int>{0, 1}, 1.0), ArgumentError);
}

TEST_CASE("svm prediction ties go to the lowest class") {
  SvmModel m;
  m.weights = Matrix(3, 1);
  m.bias = {0.0, 0.0, 0.0};
  m.feature_mean = {0.0};
  m.feature_scale = {1.0};
  const auto pred = svm_predict(m, Matrix(2, 1, 3.0));
  CHECK(pred == std::vector<int>{0, 0});
}

TEST_CASE("hinge sub-gradient matches finite differences off the kink") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(8, 3);
    for (double& v : x.values()) v = rng.normal();
    std::vector<int> y(8);
    for (int& v : y) v = rng.uniform() < 0.5 ? -1 : 1;
    std::vector<double> w = {rng.normal(), rng.normal(), rng.normal()};
    double b = rng.normal();
    bool near_kink = false;
    for (std::size_t i = 0; i < 8; ++i) {
      if (std::abs(y[i] * (dot(w, x.row(i)) + b) - 1.0) < 1e-3) near_kink = true;
    }
    if (near_kink) continue;
    std::vector<double> gw(3);
    double gb = 0.0;
    hinge_subgradient(w, b, x, y, 0.7, gw, gb);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < 3; ++k) {
      auto wp = w, wm = w;
      wp[k] += eps;
      wm[k] -= eps;
      const double num = (hinge_objective(wp, b, x, y, 0.7) - hinge_objective(wm, b, x, y, 0.7)) / (2 * eps);
      CHECK(std::abs(num - gw[k]) / std::max(std::abs(num) + std::abs(gw[k]), 1e-8) < 1e-4);
    }
    const double num_b =
        (hinge_objective(w, b + eps, x, y, 0.7) - hinge_objective(w, b - eps, x, y, 0.7)) / (2 * eps);
    CHECK(std::abs(num_b - gb) < 1e-4 * std::max(1.0, std::abs(gb)));
  }
}

TEST_CASE("hinge term is zero at margin exactly one") {
  Matrix x(1, 1, 1.0);
  const std::vector<int> y = {1};
  const std::vector<double> w = {1.0};
  CHECK(hinge_objective(w, 0.0, x, y, 5.0) == doctest::Approx(0.5));
  std::vector<double> gw(1);
  double gb = 0.0;
  hinge_subgradient(w, 0.0, x, y, 5.0, gw, gb);
  CHECK(gw[0] == doctest::Approx(1.0));
  CHECK(gb == 0.0);
}

TEST_CASE("balanced split") {
  std::vector<int> labels;
  for (int c = 0; c < 20; ++c)
    for (int i = 0; i < 10; ++i) labels.push_back(c);
  const SplitSpec spec;
  const Split s = balanced_split(labels, spec, 0);
  CHECK(s.test.size() == 40);
  CHECK(s.train.size() == 160);
  std::vector<int> per_class(20, 0);
  for (auto i : s.test) ++per_class[labels[i]];
  CHECK(std::all_of(per_class.begin(), per_class.end(), [](int n) { return n == 2; }));
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 200);
  CHECK(std::is_sorted(s.test.begin(), s.test.end()));

  CHECK(balanced_split(labels, spec, 0).test == s.test);
  CHECK(balanced_split(labels, spec, 1).test != s.test);

  std::vector<int> starved = labels;
  starved.resize(199);
  SplitSpec big = spec;
  big.per_class_test = 10;
  CHECK_THROWS_AS(balanced_split(starved, big, 0), DataError);
}

TEST_CASE("percentiles and summaries") {
  const std::vector<double> v = {4, 1, 3, 2, 5};
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 5.0);
  CHECK(percentile(v, 0.5) == 3.0);
  CHECK(percentile(v, 0.05) == doctest::Approx(1.2));
  const auto r = summarize_accuracies(v);
  CHECK(r.mean == doctest::Approx(3.0));
  CHECK(r.ci_half_width == doctest::Approx((4.8 - 1.2) / 2));
}

TEST_CASE("accuracy estimates do not depend on worker count") {
  Matrix x;
  std::vector<int> y;
  blobs(10, 6, 2.5, x, y, 3);
  SplitSpec spec;
  spec.n_repeats = 6;
  const auto one = evaluate_accuracy_ci(x, y, spec, 1.0, 1);
  const auto four = evaluate_accuracy_ci(x, y, spec, 1.0, 4);
  CHECK(one.accuracies == four.accuracies);
  CHECK(one.mean > 0.5);

  Rng rng(4);
  std::vector<int> shuffled = y;
  rng.shuffle(std::span<int>(shuffled));
  CHECK(evaluate_accuracy_ci(x, shuffled, spec, 1.0).mean < 0.5);
}

TEST_CASE("accuracy table") {
  AccuracyRow row{"m", "from-text", summarize_accuracies({0.5, 0.5})};
  const std::string t = format_accuracy_table(std::span<const AccuracyRow>(&row, 1));
  CHECK(t.find("from-text") != std::string::npos);
  CHECK(t.find("0.5000") != std::string::npos);
}
