#include "affectlab/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "affectlab/errors.hpp"

namespace affectlab {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ArgumentError("matrix data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void affine(const Matrix& w, std::span<const double> bias, std::span<const double> x,
            std::span<double> y) {
  const std::size_t out = w.rows();
  const std::size_t in = w.cols();
  for (std::size_t r = 0; r < out; ++r) {
    const double* wr = w.row(r).data();
    double acc = bias.empty() ? 0.0 : bias[r];
    for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void add_transposed_product(const Matrix& w, std::span<const double> g, std::span<double> y) {
  const std::size_t in = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < in; ++c) y[c] += wr[c] * gr;
  }
}

void add_outer(Matrix& w, std::span<const double> g, std::span<const double> x) {
  const std::size_t in = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* wr = w.row(r).data();
    for (std::size_t c = 0; c < in; ++c) wr[c] += gr * x[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) {
    throw ArgumentError("cross_entropy: target " + std::to_string(target) +
                        " out of range for " + std::to_string(probs.size()) + " classes");
  }
  // -log(1) is -0.0; report +0.
  return -std::log(std::max(probs[target], 1e-12)) + 0.0;
}

double mse(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) {
    throw ArgumentError("mse: length mismatch " + std::to_string(prediction.size()) + " vs " +
                        std::to_string(target.size()));
  }
  if (prediction.empty()) return 0.0;
  return squared_distance(prediction, target) / static_cast<double>(prediction.size());
}

void column_stats(const Matrix& m, std::vector<double>& mean, std::vector<double>& sd) {
  mean.assign(m.cols(), 0.0);
  sd.assign(m.cols(), 0.0);
  if (m.rows() == 0) return;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
  for (double& v : mean) v /= static_cast<double>(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = m(r, c) - mean[c];
      sd[c] += d * d;
    }
  for (double& v : sd) {
    v = std::sqrt(v / static_cast<double>(m.rows()));
    if (!(v > 1e-12)) v = 1.0;  // constant column
  }
}

std::uint64_t checksum(std::span<const Matrix* const> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Matrix* m : params) {
    const std::uint64_t shape[2] = {m->rows(), m->cols()};
    feed(shape, sizeof(shape));
    feed(m->values().data(), m->size() * sizeof(double));
  }
  return h;
}

GradCheckReport grad_check(const LossWithGradient& loss, std::span<Matrix* const> params,
                           double epsilon, double tolerance) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ArgumentError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
  auto zeroed = [&] {
    std::vector<Matrix> g;
    g.reserve(params.size());
    for (const Matrix* p : params) g.emplace_back(p->rows(), p->cols());
    return g;
  };

  std::vector<Matrix> analytic = zeroed();
  const double first = loss(&analytic);
  std::vector<Matrix> again = zeroed();
  const double second = loss(&again);
  if (std::memcmp(&first, &second, sizeof(double)) != 0 || analytic != again) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "grad_check: loss is not deterministic (" << first << " vs " << second << ")";
    throw ContractViolation(msg.str());
  }

  GradCheckReport report;
  std::size_t flat = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& m = *params[p];
    for (std::size_t i = 0; i < m.size(); ++i, ++flat) {
      const double saved = m[i];
      m[i] = saved + epsilon;
      const double plus = loss(nullptr);
      m[i] = saved - epsilon;
      const double minus = loss(nullptr);
      m[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter_index = flat;
      }
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace affectlab
