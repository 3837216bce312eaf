#include "affectlab/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "affectlab/errors.hpp"
#include "affectlab/parallel.hpp"
#include "affectlab/random.hpp"

namespace affectlab {

namespace {

void check_features(const Matrix& features) {
  if (!features.all_finite()) throw DataError("feature matrix contains NaN or infinite values");
}

Matrix standardize(const Matrix& x, std::span<const double> mean, std::span<const double> scale) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / scale[c];
  return out;
}

// Full-batch sub-gradient descent with step 1/(lambda t) on the objective
// divided by C n (so lambda = 1/(C n)), returning the average of the second
// half of the iterates.
void fit_binary(const Matrix& x, std::span<const int> y, double c, std::size_t iterations,
                std::span<double> w_out, double& b_out) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> w(d, 0.0), avg_w(d, 0.0), step(d);
  double b = 0.0, avg_b = 0.0;
  std::size_t averaged = 0;
  const std::size_t burn_in = iterations / 2;
  for (std::size_t t = 1; t <= iterations; ++t) {
    std::fill(step.begin(), step.end(), 0.0);
    double step_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      if (y[i] * (dot(w, xi) + b) < 1.0) {
        for (std::size_t k = 0; k < d; ++k) step[k] += y[i] * xi[k];
        step_b += y[i];
      }
    }
    // w <- w - eta (w / (C n) - sum / n) with eta = C n / t.
    const double decay = 1.0 - 1.0 / static_cast<double>(t);
    const double gain = c / static_cast<double>(t);
    for (std::size_t k = 0; k < d; ++k) w[k] = decay * w[k] + gain * step[k];
    b += gain * step_b;
    if (t > burn_in) {
      ++averaged;
      const double a = 1.0 / static_cast<double>(averaged);
      for (std::size_t k = 0; k < d; ++k) avg_w[k] += a * (w[k] - avg_w[k]);
      avg_b += a * (b - avg_b);
    }
  }
  std::copy(avg_w.begin(), avg_w.end(), w_out.begin());
  b_out = avg_b;
}

}  // namespace

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ArgumentError("hconcat: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

double hinge_objective(std::span<const double> w, double b, const Matrix& x, std::span<const int> y,
                       double c) {
  double obj = 0.5 * dot(w, w);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    obj += c * std::max(0.0, 1.0 - y[i] * (dot(w, x.row(i)) + b));
  }
  return obj;
}

void hinge_subgradient(std::span<const double> w, double b, const Matrix& x, std::span<const int> y,
                       double c, std::span<double> grad_w, double& grad_b) {
  std::copy(w.begin(), w.end(), grad_w.begin());
  grad_b = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    if (y[i] * (dot(w, xi) + b) < 1.0) {
      for (std::size_t k = 0; k < w.size(); ++k) grad_w[k] -= c * y[i] * xi[k];
      grad_b -= c * y[i];
    }
  }
}

SvmModel svm_train(const Matrix& features, std::span<const int> labels, double c,
                   const SvmOptions& options) {
  if (features.rows() != labels.size()) {
    throw ArgumentError("svm_train: " + std::to_string(features.rows()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
  if (!(c > 0.0)) throw ArgumentError("svm_train: C must be positive");
  check_features(features);
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ArgumentError("svm_train: negative label");
    max_label = std::max(max_label, l);
  }
  {
    std::vector<int> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      throw ArgumentError("svm_train: need at least two distinct labels");
    }
  }

  const std::size_t n = features.rows(), d = features.cols();
  const auto k = static_cast<std::size_t>(max_label + 1);
  SvmModel model;
  model.c = c;
  model.weights = Matrix(k, d);
  model.bias.assign(k, 0.0);
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += features(r, j);
  for (double& v : model.feature_mean) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = features(r, j) - model.feature_mean[j];
      model.feature_scale[j] += dv * dv;
    }
  for (double& v : model.feature_scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 1e-12)) v = 1.0;
  }

  const Matrix x = standardize(features, model.feature_mean, model.feature_scale);
  std::vector<int> y(n);
  for (std::size_t cls = 0; cls < k; ++cls) {
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<int>(cls) ? 1 : -1;
    fit_binary(x, y, c, options.iterations, model.weights.row(cls), model.bias[cls]);
  }
  return model;
}

Matrix svm_decision_values(const SvmModel& model, const Matrix& features) {
  if (features.cols() != model.dim()) {
    throw ArgumentError("svm: features have dimension " + std::to_string(features.cols()) +
                        ", model expects " + std::to_string(model.dim()));
  }
  check_features(features);
  Matrix out(features.rows(), model.n_classes());
  std::vector<double> x(model.dim());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = (features(r, j) - model.feature_mean[j]) / model.feature_scale[j];
    }
    affine(model.weights, model.bias, x, out.row(r));
  }
  return out;
}

std::vector<int> svm_predict(const SvmModel& model, const Matrix& features) {
  const Matrix scores = svm_decision_values(model, features);
  std::vector<int> out(features.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Split balanced_split(std::span<const int> labels, const SplitSpec& spec, std::size_t repeat_index) {
  if (spec.per_class_test < 1) throw ArgumentError("balanced_split: per_class_test must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, members] : by_class) {
    if (members.size() <= spec.per_class_test) {
      throw DataError("balanced_split: class " + std::to_string(cls) + " has " +
                      std::to_string(members.size()) + " examples; need more than " +
                      std::to_string(spec.per_class_test));
    }
  }
  Rng rng(derive_seed(spec.seed, repeat_index));
  std::vector<bool> is_test(labels.size(), false);
  for (auto& [cls, members] : by_class) {
    // Partial Fisher-Yates: the first per_class_test slots are the sample.
    for (std::size_t i = 0; i < spec.per_class_test; ++i) {
      const std::size_t j = i + rng.below(members.size() - i);
      std::swap(members[i], members[j]);
      is_test[members[i]] = true;
    }
  }
  Split split;
  for (std::size_t i = 0; i < labels.size(); ++i) (is_test[i] ? split.test : split.train).push_back(i);
  return split;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AccuracyReport summarize_accuracies(std::vector<double> accuracies) {
  AccuracyReport r;
  if (accuracies.empty()) throw ArgumentError("no accuracies to summarize");
  double total = 0.0;
  for (double a : accuracies) total += a;
  r.mean = total / static_cast<double>(accuracies.size());
  r.lower = percentile(accuracies, 0.05);
  r.upper = percentile(accuracies, 0.95);
  r.ci_half_width = 0.5 * (r.upper - r.lower);
  r.accuracies = std::move(accuracies);
  return r;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw ArgumentError("accuracy: need equal, nonzero lengths");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

AccuracyReport evaluate_accuracy_ci(const SplitFeatureFn& features, std::span<const int> labels,
                                    const SplitSpec& spec, double c, unsigned jobs,
                                    const SvmOptions& options) {
  if (spec.n_repeats < 1) throw ArgumentError("evaluate_accuracy_ci: n_repeats must be >= 1");
  std::vector<double> accs(spec.n_repeats, 0.0);
  parallel_for(spec.n_repeats, jobs, [&](std::size_t r) {
    const Split split = balanced_split(labels, spec, r);
    const Matrix all = features(split, r);
    if (all.rows() != labels.size()) {
      throw ArgumentError("evaluate_accuracy_ci: feature rows do not match labels");
    }
    std::vector<int> train_y, test_y;
    for (std::size_t i : split.train) train_y.push_back(labels[i]);
    for (std::size_t i : split.test) test_y.push_back(labels[i]);
    const SvmModel model = svm_train(gather_rows(all, split.train), train_y, c, options);
    accs[r] = accuracy(svm_predict(model, gather_rows(all, split.test)), test_y);
  });
  return summarize_accuracies(std::move(accs));
}

AccuracyReport evaluate_accuracy_ci(const Matrix& features, std::span<const int> labels,
                                    const SplitSpec& spec, double c, unsigned jobs,
                                    const SvmOptions& options) {
  if (features.rows() != labels.size()) {
    throw ArgumentError("evaluate_accuracy_ci: " + std::to_string(features.rows()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
  return evaluate_accuracy_ci([&](const Split&, std::size_t) { return features; }, labels, spec, c,
                              jobs, options);
}

std::string format_accuracy_table(std::span<const AccuracyRow> rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s %-16s %8s %8s %9s\n", "model", "condition", "mean", "ci",
                "n_repeats");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %-16s %8.4f %8.4f %9zu\n", row.model.c_str(),
                  row.condition.c_str(), row.report.mean, row.report.ci_half_width,
                  row.report.accuracies.size());
    out += buf;
  }
  return out;
}

}  // namespace affectlab
