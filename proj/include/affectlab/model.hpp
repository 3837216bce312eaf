#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affectlab/data.hpp"
#include "affectlab/numkernel.hpp"
#include "affectlab/textproc.hpp"

namespace affectlab {

inline constexpr const char* kCheckpointFormatTag = "affectlab-ckpt-v1";

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t lstm_hidden = 32;  // per direction
  std::size_t n_appraisals = kNumAppraisals;
  std::size_t n_emotions = kNumEmotions;
  std::size_t n_emojis = kNumEmojis;
  std::size_t max_len = 64;
  std::size_t min_count = 2;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::size_t epochs = 8;             // emoji pretraining
  std::size_t multitask_epochs = 120;  // head training
  double appraisal_weight = 1.0;      // weight of the appraisal MSE on story batches
  std::uint64_t seed = 1;

  std::size_t concat_dim() const { return embed_dim + 4 * lstm_hidden; }
  void validate() const;
};

/// One LSTM direction. Gate rows are stacked input, forget, output, candidate;
/// each step reads [x_t || h_prev].
struct LstmParams {
  Matrix weights;  // 4H x (input + H)
  Matrix bias;     // 1 x 4H

  std::size_t hidden() const { return bias.cols() / 4; }
  std::size_t input_dim() const { return weights.cols() - hidden(); }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  friend bool operator==(const BiLstmParams&, const BiLstmParams&) = default;
};

struct EncoderParams {
  Matrix embedding;  // vocab_size x embed_dim
  BiLstmParams layer1;
  BiLstmParams layer2;  // input is [embedding_t || layer1_t]

  std::size_t embed_dim() const { return embedding.cols(); }
  std::size_t hidden() const { return layer1.forward.hidden(); }
  std::size_t concat_dim() const { return embed_dim() + 4 * hidden(); }

  // Zero-valued parameters with the given shapes.
  static EncoderParams zeros(std::size_t vocab_size, std::size_t embed_dim, std::size_t hidden);
  static EncoderParams init(const ModelConfig& config, std::uint64_t seed);

  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;
  static std::vector<std::string> block_names();
  std::uint64_t checksum() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct AffineParams {
  Matrix weights;  // out x in
  Matrix bias;     // 1 x out

  static AffineParams zeros(std::size_t out, std::size_t in);
  void forward(std::span<const double> x, std::span<double> y) const;

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

/// Appraisal layer plus the emotion and emoji softmax heads.
///
/// Inputs are standardized with `input_mean` / `input_scale` before the
/// appraisal layer (empty vectors mean identity). The appraisal layer emits
/// z-scored ratings; `target_mean` / `target_sd` map them back to the
/// rating scale. Both softmax heads read [standardized rep || appraisals].
struct HeadParams {
  AffineParams appraisal;  // A x D
  AffineParams emotion;    // E x (D + A)
  AffineParams emoji;      // M x (D + A)
  std::vector<double> input_mean;
  std::vector<double> input_scale;
  std::vector<double> target_mean;
  std::vector<double> target_sd;

  std::size_t input_dim() const { return appraisal.weights.cols(); }
  std::size_t n_appraisals() const { return appraisal.weights.rows(); }

  static HeadParams zeros(std::size_t input_dim, std::size_t n_appraisals, std::size_t n_emotions,
                          std::size_t n_emojis);
  static HeadParams init(const ModelConfig& config, std::uint64_t seed);

  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;
  static std::vector<std::string> block_names();

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

enum class TaskKind : char { kEmoji = 'E', kStory = 'S' };

struct TrainReport {
  std::vector<double> emoji_loss;      // mean cross-entropy per epoch
  std::vector<double> emotion_loss;    // mean cross-entropy per epoch
  std::vector<double> appraisal_loss;  // mean squared error per epoch (z-scored targets)
  std::vector<TaskKind> schedule;      // one entry per optimizer step
  std::uint64_t snapshot = 0;          // checksum of the returned parameters
  std::uint64_t seed = 0;
};

struct HeadOutputs {
  std::vector<double> appraisals;  // z-scored scale
  std::vector<double> emotion_probs;
  std::vector<double> emoji_probs;
};

using ConcatRepresentation = std::vector<double>;

// Pooled [embedding || layer1 || layer2] over the non-PAD positions.
ConcatRepresentation encoder_forward(const EncodedText& text, const EncoderParams& params);
HeadOutputs heads_forward(std::span<const double> rep, const HeadParams& heads);

// Mean emoji cross-entropy over a batch through encoder + an emoji head that
// reads the Concat representation directly. Gradients are accumulated into
// the non-null outputs (which must be zero-initialised with matching shapes).
double pretrain_batch_loss(const EncoderParams& encoder, const AffineParams& head,
                           std::span<const EncodedText> texts, std::span<const int> emojis,
                           EncoderParams* encoder_grads, AffineParams* head_grads);

// Story batch: mean of CE(emotion) + weight * MSE(appraisals, z-scored targets).
// Row r of `reps`/`targets` is one example.
double story_batch_loss(const HeadParams& heads, const Matrix& reps, const Matrix& targets,
                        std::span<const int> emotions, double appraisal_weight,
                        HeadParams* grads, double* emotion_part = nullptr,
                        double* appraisal_part = nullptr);
double emoji_batch_loss(const HeadParams& heads, const Matrix& reps, std::span<const int> emojis,
                        HeadParams* grads);

struct PretrainResult {
  EncoderParams encoder;
  AffineParams emoji_head;
  TrainReport report;
};

PretrainResult pretrain_emoji(std::span<const TweetExample> tweets, const Vocab& vocab,
                              ModelConfig config);

struct MultitaskResult {
  HeadParams heads;
  TrainReport report;
};

MultitaskResult multitask_train(const EncoderParams& encoder, std::span<const StoryExample> stories,
                                std::span<const TweetExample> tweets, const Vocab& vocab,
                                const ModelConfig& config);

// Head training on precomputed Concat rows; the encoder never participates.
// `story_ratings` are raw (unnormalized) appraisal ratings.
MultitaskResult train_heads(const Matrix& story_reps, const Matrix& story_ratings,
                            std::span<const int> emotions, const Matrix& tweet_reps,
                            std::span<const int> emojis, const ModelConfig& config);

enum class FeatureMode { kConcat, kAppraisalLayer, kConcatPlusAppraisal, kBowAverage };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& name);

Matrix encode_all(std::span<const EncodedText> texts, const EncoderParams& encoder,
                  unsigned jobs = 1);
Matrix extract_features(std::span<const EncodedText> texts, const EncoderParams& encoder,
                        const HeadParams* heads, FeatureMode mode, unsigned jobs = 1);
// Same, starting from already-computed Concat rows (bow_average is the
// leading embed_dim columns).
Matrix features_from_concat(const Matrix& concat, std::size_t embed_dim, const HeadParams* heads,
                            FeatureMode mode);

std::vector<EncodedText> encode_texts(std::span<const StoryExample> stories, const Vocab& vocab,
                                      std::size_t max_len);
std::vector<EncodedText> encode_texts(std::span<const TweetExample> tweets, const Vocab& vocab,
                                      std::size_t max_len);

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  EncoderParams encoder;
  std::optional<HeadParams> heads;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace affectlab
