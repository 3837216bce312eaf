#include "affectlab/rsa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "affectlab/errors.hpp"
#include "affectlab/parallel.hpp"

namespace affectlab {

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + t + "'");
  }
  if (used != t.size()) throw DataError(where + ": not a number: '" + t + "'");
  if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
  return v;
}

// Merge sort counting inversions (pairs i < j with v[i] > v[j]).
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

void require_same_labels(const Rdm& a, const Rdm& b) {
  if (a.labels != b.labels) {
    throw ArgumentError("RDM label orders differ; refusing to compare");
  }
  if (a.matrix.rows() != a.size() || b.matrix.rows() != b.size()) {
    throw ArgumentError("RDM matrix size does not match its labels");
  }
}

}  // namespace

void Rdm::validate(double symmetry_tolerance) const {
  const std::size_t k = labels.size();
  if (matrix.rows() != k || matrix.cols() != k) {
    throw DataError("RDM is " + std::to_string(matrix.rows()) + "x" +
                    std::to_string(matrix.cols()) + " but has " + std::to_string(k) + " labels");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (matrix(i, i) != 0.0) throw DataError("RDM diagonal entry " + std::to_string(i) + " is not zero");
    for (std::size_t j = 0; j < k; ++j) {
      const double v = matrix(i, j);
      if (!std::isfinite(v)) throw DataError("RDM has a non-finite entry");
      if (v < 0.0) throw DataError("RDM has a negative entry");
      const double u = matrix(j, i);
      if (std::abs(v - u) > symmetry_tolerance * std::max(1.0, std::abs(v))) {
        throw DataError("RDM is not symmetric at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      }
    }
  }
}

std::vector<double> Rdm::upper_triangle() const {
  std::vector<double> out;
  const std::size_t k = size();
  out.reserve(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) out.push_back(matrix(i, j));
  return out;
}

Matrix emotion_centroids(const Matrix& features, std::span<const int> labels,
                         std::size_t n_classes) {
  if (features.rows() != labels.size()) {
    throw ArgumentError("emotion_centroids: " + std::to_string(features.rows()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
  Matrix centroids(n_classes, features.cols());
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int e = labels[r];
    if (e < 0 || static_cast<std::size_t>(e) >= n_classes) {
      throw DataError("emotion_centroids: label " + std::to_string(e) + " out of range");
    }
    auto dst = centroids.row(static_cast<std::size_t>(e));
    auto src = features.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    ++counts[static_cast<std::size_t>(e)];
  }
  for (std::size_t e = 0; e < n_classes; ++e) {
    if (counts[e] == 0) throw DataError("emotion_centroids: class " + std::to_string(e) + " has no stimuli");
    for (double& v : centroids.row(e)) v /= static_cast<double>(counts[e]);
  }
  return centroids;
}

Rdm compute_rdm(const Matrix& centroids, std::vector<std::string> labels) {
  const std::size_t k = centroids.rows();
  if (labels.size() != k) throw ArgumentError("compute_rdm: label count does not match rows");
  if (k < 2) throw ArgumentError("compute_rdm: need at least two conditions");
  Rdm rdm{std::move(labels), Matrix(k, k)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double d = std::sqrt(squared_distance(centroids.row(i), centroids.row(j)));
      rdm.matrix(i, j) = d;
      rdm.matrix(j, i) = d;
    }
  }
  return rdm;
}

double kendall_tau(std::span<const double> x, std::span<const double> y, TauVariant variant) {
  if (x.size() != y.size()) throw ArgumentError("kendall_tau: length mismatch");
  const std::size_t m = x.size();
  if (m < 2) throw ArgumentError("kendall_tau: need at least two values");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const std::int64_t ties_x =
      tied_pairs(m, [&](std::size_t i, std::size_t j) { return x[order[i]] == x[order[j]]; });
  const std::int64_t ties_xy = tied_pairs(m, [&](std::size_t i, std::size_t j) {
    return x[order[i]] == x[order[j]] && y[order[i]] == y[order[j]];
  });

  std::vector<double> ys(m), scratch(m);
  for (std::size_t i = 0; i < m; ++i) ys[i] = y[order[i]];
  // Within an x-tie block y is ascending, so every inversion is a strictly
  // discordant pair.
  const std::int64_t discordant = count_inversions(ys, scratch, 0, m);
  const std::int64_t ties_y = tied_pairs(m, [&](std::size_t i, std::size_t j) { return ys[i] == ys[j]; });

  const std::int64_t total = static_cast<std::int64_t>(m) * static_cast<std::int64_t>(m - 1) / 2;
  const std::int64_t concordant = total - ties_x - ties_y + ties_xy - discordant;
  const std::int64_t score = concordant - discordant;

  if (variant == TauVariant::kTauA) return static_cast<double>(score) / static_cast<double>(total);
  const double denom = std::sqrt(static_cast<double>(total - ties_x) *
                                 static_cast<double>(total - ties_y));
  return denom == 0.0 ? 0.0 : static_cast<double>(score) / denom;
}

double kendall_tau(const Rdm& a, const Rdm& b, TauVariant variant) {
  require_same_labels(a, b);
  const auto x = a.upper_triangle();
  const auto y = b.upper_triangle();
  return kendall_tau(x, y, variant);
}

Rdm mean_rdm(std::span<const Rdm> rdms) {
  if (rdms.empty()) throw ArgumentError("mean_rdm: no RDMs");
  Rdm out{rdms.front().labels, Matrix(rdms.front().size(), rdms.front().size())};
  for (const Rdm& r : rdms) {
    require_same_labels(out, r);
    for (std::size_t i = 0; i < out.matrix.size(); ++i) out.matrix[i] += r.matrix[i];
  }
  for (double& v : out.matrix.values()) v /= static_cast<double>(rdms.size());
  return out;
}

RsaResult group_level_rsa(const Rdm& feature_rdm, const NeuralRdmSet& neural, TauVariant variant,
                          GroupMode mode, unsigned jobs) {
  if (neural.subjects.empty()) {
    throw ArgumentError("group_level_rsa: region '" + neural.region + "' has no subjects");
  }
  RsaResult result;
  result.region = neural.region;
  result.subject_taus.assign(neural.subjects.size(), 0.0);
  parallel_for(neural.subjects.size(), jobs, [&](std::size_t s) {
    result.subject_taus[s] = kendall_tau(feature_rdm, neural.subjects[s], variant);
  });
  if (mode == GroupMode::kTauOfMeanRdm) {
    result.mean_tau = kendall_tau(feature_rdm, mean_rdm(neural.subjects), variant);
  } else {
    double total = 0.0;
    for (double t : result.subject_taus) total += t;
    result.mean_tau = total / static_cast<double>(result.subject_taus.size());
  }
  return result;
}

bool add_tom_region(std::vector<NeuralRdmSet>& sets) {
  for (const auto& s : sets) {
    if (s.region == "ToM") return false;
  }
  if (sets.empty()) return false;
  NeuralRdmSet tom;
  tom.region = "ToM";
  tom.subject_ids = sets.front().subject_ids;
  for (std::size_t s = 0; s < tom.subject_ids.size(); ++s) {
    std::vector<Rdm> per_region;
    for (const auto& set : sets) {
      auto it = std::find(set.subject_ids.begin(), set.subject_ids.end(), tom.subject_ids[s]);
      if (it == set.subject_ids.end()) {
        throw DataError("subject '" + tom.subject_ids[s] + "' missing from region '" +
                        set.region + "'; cannot derive ToM");
      }
      per_region.push_back(set.subjects[static_cast<std::size_t>(it - set.subject_ids.begin())]);
    }
    tom.subjects.push_back(mean_rdm(per_region));
  }
  sets.push_back(std::move(tom));
  return true;
}

std::string format_rdm(const Rdm& rdm) {
  std::string out = "# " + std::string(kRdmFormatTag) + " K=" + std::to_string(rdm.size()) + "\n";
  for (std::size_t i = 0; i < rdm.size(); ++i) {
    if (i) out += ',';
    out += rdm.labels[i];
  }
  out += '\n';
  for (std::size_t i = 0; i < rdm.size(); ++i) {
    for (std::size_t j = 0; j < rdm.size(); ++j) {
      if (j) out += ',';
      out += fmt_real(rdm.matrix(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_rdm(const Rdm& rdm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write RDM file: " + path.string());
  out << format_rdm(rdm);
}

Rdm parse_rdm(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  auto where = [&] { return source_name + ":" + std::to_string(line_no); };

  if (!next_line()) throw DataError(source_name + ": empty RDM file");
  const std::string header_prefix = "# " + std::string(kRdmFormatTag) + " K=";
  if (line.rfind(header_prefix, 0) != 0) {
    throw DataError(where() + ": expected header '" + header_prefix + "<k>'");
  }
  std::size_t k = 0;
  try {
    k = std::stoul(line.substr(header_prefix.size()));
  } catch (const std::exception&) {
    throw DataError(where() + ": bad K in header");
  }
  if (!next_line()) throw DataError(where() + ": missing label line");
  Rdm rdm;
  for (auto& l : split(line, ',')) rdm.labels.push_back(trim(l));
  if (rdm.labels.size() != k) {
    throw DataError(where() + ": expected " + std::to_string(k) + " labels, got " +
                    std::to_string(rdm.labels.size()));
  }
  rdm.matrix = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!next_line()) throw DataError(where() + ": expected " + std::to_string(k) + " matrix rows");
    const auto fields = split(line, ',');
    if (fields.size() != k) {
      throw DataError(where() + ": expected " + std::to_string(k) + " values, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < k; ++j) rdm.matrix(i, j) = parse_real(fields[j], where());
  }
  if (next_line()) throw DataError(where() + ": unexpected trailing content");
  try {
    rdm.validate();
  } catch (const DataError& e) {
    throw DataError(source_name + ": " + e.what());
  }
  return rdm;
}

Rdm read_rdm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read RDM file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rdm(buf.str(), path.string());
}

std::string render_rdm_table(const Rdm& rdm) {
  std::size_t label_width = 1;
  for (const auto& l : rdm.labels) label_width = std::max(label_width, l.size());
  const std::size_t width = std::max<std::size_t>(label_width, 15) + 1;
  auto pad = [&](const std::string& s) { return std::string(width - std::min(width, s.size()), ' ') + s; };

  std::string out = pad("");
  for (const auto& l : rdm.labels) out += pad(l);
  out += '\n';
  for (std::size_t i = 0; i < rdm.size(); ++i) {
    out += pad(rdm.labels[i]);
    for (std::size_t j = 0; j < rdm.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.9g", rdm.matrix(i, j));
      out += pad(buf);
    }
    out += '\n';
  }
  return out;
}

Rdm parse_rdm_table(const std::string& table) {
  std::istringstream in(table);
  std::string line;
  if (!std::getline(in, line)) throw DataError("RDM table: empty");
  Rdm rdm;
  {
    std::istringstream header(line);
    std::string label;
    while (header >> label) rdm.labels.push_back(label);
  }
  const std::size_t k = rdm.labels.size();
  rdm.matrix = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::getline(in, line)) throw DataError("RDM table: missing row " + std::to_string(i));
    std::istringstream row(line);
    std::string label;
    row >> label;
    if (label != rdm.labels[i]) throw DataError("RDM table: row label mismatch at row " + std::to_string(i));
    for (std::size_t j = 0; j < k; ++j) {
      std::string cell;
      if (!(row >> cell)) throw DataError("RDM table: short row " + std::to_string(i));
      rdm.matrix(i, j) = parse_real(cell, "RDM table row " + std::to_string(i));
    }
  }
  return rdm;
}

std::string render_rdm_ppm(const Rdm& rdm, std::size_t cell) {
  const std::size_t k = rdm.size();
  const std::size_t side = k * cell;
  double lo = 0.0, hi = 0.0;
  if (!rdm.matrix.empty()) {
    lo = *std::min_element(rdm.matrix.values().begin(), rdm.matrix.values().end());
    hi = *std::max_element(rdm.matrix.values().begin(), rdm.matrix.values().end());
  }
  const double range = hi - lo;

  std::string out = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + side * side * 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double v = rdm.matrix(y / cell, x / cell);
      const double t = range > 0.0 ? (v - lo) / range : 0.0;
      // Blue (similar) to yellow (dissimilar).
      const auto r = static_cast<unsigned char>(std::lround(255.0 * t));
      const auto g = static_cast<unsigned char>(std::lround(40.0 + 175.0 * t));
      const auto b = static_cast<unsigned char>(std::lround(200.0 * (1.0 - t)));
      const std::size_t p = header + (y * side + x) * 3;
      out[p] = static_cast<char>(r);
      out[p + 1] = static_cast<char>(g);
      out[p + 2] = static_cast<char>(b);
    }
  }
  return out;
}

}  // namespace affectlab
