#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "affectlab/numkernel.hpp"

namespace affectlab {

/// One-vs-rest linear SVM. Features are standardized with the training
/// column statistics stored here before the decision values are taken.
struct SvmModel {
  Matrix weights;             // n_classes x dim (standardized space)
  std::vector<double> bias;   // n_classes
  double c = 1.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  std::size_t n_classes() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }
};

struct SvmOptions {
  std::size_t iterations = 300;  // full-batch sub-gradient steps per class
};

// Fits each class against the rest by sub-gradient descent on
// (1/2)|w|^2 + C * sum max(0, 1 - y (w.x + b)). The bias is unregularized.
// Classes are 0 .. max(label).
SvmModel svm_train(const Matrix& features, std::span<const int> labels, double c,
                   const SvmOptions& options = {});
Matrix svm_decision_values(const SvmModel& model, const Matrix& features);
// Argmax of the decision values; ties go to the lowest class index.
std::vector<int> svm_predict(const SvmModel& model, const Matrix& features);

// Binary primal objective and one sub-gradient, for y in {-1, +1}. At a
// margin of exactly 1 the hinge term contributes zero.
double hinge_objective(std::span<const double> w, double b, const Matrix& x,
                       std::span<const int> y, double c);
void hinge_subgradient(std::span<const double> w, double b, const Matrix& x,
                       std::span<const int> y, double c, std::span<double> grad_w,
                       double& grad_b);

struct SplitSpec {
  std::size_t per_class_test = 2;
  std::size_t n_repeats = 30;
  std::uint64_t seed = 1;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Test set: exactly per_class_test examples of every class, drawn without
// replacement from a generator seeded by (seed, repeat_index). Both index
// lists come back sorted.
Split balanced_split(std::span<const int> labels, const SplitSpec& spec, std::size_t repeat_index);

struct AccuracyReport {
  double mean = 0.0;
  double ci_half_width = 0.0;  // half the 5th-95th percentile range
  double lower = 0.0;          // 5th percentile
  double upper = 0.0;          // 95th percentile
  std::vector<double> accuracies;  // indexed by repeat
};

// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);
AccuracyReport summarize_accuracies(std::vector<double> accuracies);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

AccuracyReport evaluate_accuracy_ci(const Matrix& features, std::span<const int> labels,
                                    const SplitSpec& spec, double c, unsigned jobs = 1,
                                    const SvmOptions& options = {});

// For feature spaces that must be rebuilt per split (e.g. heads retrained on
// the training stories only). Returns the feature rows for every example.
using SplitFeatureFn = std::function<Matrix(const Split& split, std::size_t repeat_index)>;
AccuracyReport evaluate_accuracy_ci(const SplitFeatureFn& features, std::span<const int> labels,
                                    const SplitSpec& spec, double c, unsigned jobs = 1,
                                    const SvmOptions& options = {});

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix hconcat(const Matrix& a, const Matrix& b);

struct AccuracyRow {
  std::string model;
  std::string condition;
  AccuracyReport report;
};

// Columns: model, condition, mean, ci, n_repeats.
std::string format_accuracy_table(std::span<const AccuracyRow> rows);

}  // namespace affectlab
