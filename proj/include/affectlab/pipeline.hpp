#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affectlab/classify.hpp"
#include "affectlab/data.hpp"
#include "affectlab/model.hpp"
#include "affectlab/rsa.hpp"

namespace affectlab {

// Names of the feature spaces that appear in the reports.
namespace space {
inline constexpr const char* kChance = "chance";
inline constexpr const char* kBow = "bow_average";
inline constexpr const char* kEncoder = "emoji_encoder";
inline constexpr const char* kMultitask = "multitask";
inline constexpr const char* kAppraisals = "appraisals";
}  // namespace space

inline constexpr const char* kWithAppraisals = "with-appraisals";
inline constexpr const char* kFromText = "from-text";

struct ExperimentConfig {
  ModelConfig model;
  SplitSpec split;
  double svm_c = 0.03;
  SvmOptions svm;
  TauVariant tau = TauVariant::kTauA;
  GroupMode group = GroupMode::kMeanOfSubjectTaus;
  unsigned jobs = 1;  // affects speed only, never results
};

struct ExperimentInputs {
  std::vector<StoryExample> stories;
  std::vector<TweetExample> tweets;
  std::vector<NeuralRdmSet> neural;   // may be empty (RSA rows then skipped)
  std::vector<std::string> emotion_names;
  std::optional<Rdm> truth_rdm;       // known only for synthetic worlds
};

struct RsaRow {
  std::string space;
  std::vector<RsaResult> regions;  // same order as ExperimentInputs::neural (+ ToM)
};

struct ExperimentResult {
  std::vector<AccuracyRow> table1;
  std::vector<RsaRow> table2;
  std::map<std::string, Rdm> feature_rdms;  // keyed by space name
  double multitask_vs_appraisal_tau = 0.0;  // model RDM vs human-rating RDM
  std::optional<double> multitask_vs_truth_tau;
  TrainReport pretrain_report;
  TrainReport multitask_report;
  Checkpoint checkpoint;  // encoder + heads trained on every story
};

// Feature spaces derived from one trained encoder.
struct FeatureSet {
  Matrix concat;     // stories x concat_dim
  Matrix tweet_concat;
  Matrix ratings;    // stories x n_appraisals
  std::vector<int> emotions;
  std::vector<int> emojis;
};

FeatureSet build_feature_set(const ExperimentInputs& inputs, const Checkpoint& encoder_ckpt,
                             unsigned jobs);

// Vocabulary over tweets + stories, emoji pretraining, multitask heads, the
// Table-1-style classification grid and Table-2-style RSA.
ExperimentResult run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& config);

ExperimentInputs inputs_from_world(const SynthWorld& world);

// Master seed -> component seeds.
ModelConfig seeded_model_config(ModelConfig base, std::uint64_t master_seed);
SplitSpec seeded_split_spec(SplitSpec base, std::uint64_t master_seed);

std::string format_rsa_table(const std::vector<RsaRow>& rows);

}  // namespace affectlab
