#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affectlab/numkernel.hpp"

namespace affectlab {

inline constexpr const char* kRdmFormatTag = "rdm v1";

/// Representational dissimilarity matrix over K labelled conditions.
struct Rdm {
  std::vector<std::string> labels;
  Matrix matrix;  // K x K, symmetric, zero diagonal, nonnegative

  std::size_t size() const { return labels.size(); }
  // Throws DataError describing the first violated invariant.
  void validate(double symmetry_tolerance = 1e-9) const;
  // Upper-triangle entries (i < j), row by row.
  std::vector<double> upper_triangle() const;
};

struct NeuralRdmSet {
  std::string region;
  std::vector<std::string> subject_ids;
  std::vector<Rdm> subjects;
};

struct RsaResult {
  std::string region;
  double mean_tau = 0.0;
  std::vector<double> subject_taus;
};

enum class TauVariant { kTauA, kTauB };

// Group level = mean of per-subject taus, or one tau against the subject-mean RDM.
enum class GroupMode { kMeanOfSubjectTaus, kTauOfMeanRdm };

// Row e is the mean of the rows of `features` labelled e, for e in [0, n_classes).
Matrix emotion_centroids(const Matrix& features, std::span<const int> labels,
                         std::size_t n_classes);

Rdm compute_rdm(const Matrix& centroids, std::vector<std::string> labels);

// O(m log m) Kendall tau over the upper triangles. Pairs tied in either input
// count as neither concordant nor discordant.
double kendall_tau(const Rdm& a, const Rdm& b, TauVariant variant = TauVariant::kTauA);
double kendall_tau(std::span<const double> x, std::span<const double> y,
                   TauVariant variant = TauVariant::kTauA);

RsaResult group_level_rsa(const Rdm& feature_rdm, const NeuralRdmSet& neural,
                          TauVariant variant = TauVariant::kTauA,
                          GroupMode mode = GroupMode::kMeanOfSubjectTaus, unsigned jobs = 1);

// Entrywise mean of several RDMs sharing one label order.
Rdm mean_rdm(std::span<const Rdm> rdms);

// Appends a "ToM" set (per-subject mean over the other regions) when none is
// present. Subjects must appear in every region. Returns true if one was added.
bool add_tom_region(std::vector<NeuralRdmSet>& sets);

// `# rdm v1 K=<k>`, a comma-separated label line, then K rows of K values.
void write_rdm(const Rdm& rdm, const std::filesystem::path& path);
std::string format_rdm(const Rdm& rdm);
Rdm parse_rdm(const std::string& text, const std::string& source_name);
Rdm read_rdm(const std::filesystem::path& path);

// Aligned text grid with row/column labels, and a parser for it.
std::string render_rdm_table(const Rdm& rdm);
Rdm parse_rdm_table(const std::string& table);

// Binary PPM (P6) heat map, min-max normalized, `cell` pixels per entry.
std::string render_rdm_ppm(const Rdm& rdm, std::size_t cell = 12);

}  // namespace affectlab
