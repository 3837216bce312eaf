#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace affectlab {

/// Dense row-major matrix of doubles.
///
/// Every weight tensor, feature matrix and RDM in the library is stored in
/// one of these. Vectors are 1 x n matrices where a Matrix is needed, and
/// plain std::vector<double> elsewhere.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = W x + b, where W is (out x in) and b has length out (may be empty).
void affine(const Matrix& w, std::span<const double> bias, std::span<const double> x,
            std::span<double> y);
// y += W^T g
void add_transposed_product(const Matrix& w, std::span<const double> g, std::span<double> y);
// W += g x^T
void add_outer(Matrix& w, std::span<const double> g, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

std::vector<double> softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> probs, std::size_t target);
double mse(std::span<const double> prediction, std::span<const double> target);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-column mean and population standard deviation. Constant columns get
// a standard deviation of 1 so dividing by it is always safe.
void column_stats(const Matrix& m, std::vector<double>& mean, std::vector<double>& sd);

/// FNV-1a over the raw bytes of every matrix, in order.
std::uint64_t checksum(std::span<const Matrix* const> params);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter_index = 0;  // flat index across all params
  bool passed = true;
};

/// Loss evaluated at the current parameter values. When `grads` is non-null
/// it has one zeroed matrix per parameter (same shapes) and must receive the
/// analytic gradient.
using LossWithGradient = std::function<double(std::vector<Matrix>* grads)>;

/// Central finite-difference check of an analytic gradient.
///
/// Each parameter entry is perturbed in place by +/- epsilon and restored.
/// Relative error is |g_a - g_n| / max(|g_a| + |g_n|, 1e-8).
GradCheckReport grad_check(const LossWithGradient& loss, std::span<Matrix* const> params,
                           double epsilon = 1e-5, double tolerance = 1e-4);

}  // namespace affectlab
