#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affectlab/numkernel.hpp"
#include "affectlab/rsa.hpp"

namespace affectlab {

inline constexpr std::size_t kNumAppraisals = 38;
inline constexpr std::size_t kNumEmotions = 20;
inline constexpr std::size_t kNumEmojis = 64;
inline constexpr std::size_t kEmojiBits = 6;

// Default emotion label names, in index order.
const std::vector<std::string>& default_emotion_names();

struct StoryExample {
  std::string id;
  std::string text;
  std::vector<double> appraisals;  // raw ratings
  int emotion = 0;

  friend bool operator==(const StoryExample&, const StoryExample&) = default;
};

struct TweetExample {
  std::string id;
  std::string text;
  int emoji = 0;

  friend bool operator==(const TweetExample&, const TweetExample&) = default;
};

// Line-delimited JSON records, one per line:
//   story: {"id": str, "text": str, "emotion": int, "appraisals": [38 reals]}
//   tweet: {"id": str, "text": str, "emoji": int}
std::vector<StoryExample> load_stories(const std::filesystem::path& path,
                                       std::size_t n_appraisals = kNumAppraisals,
                                       std::size_t n_emotions = kNumEmotions);
std::vector<TweetExample> load_tweets(const std::filesystem::path& path,
                                      std::size_t n_emojis = kNumEmojis);
void write_stories(std::span<const StoryExample> stories, const std::filesystem::path& path);
void write_tweets(std::span<const TweetExample> tweets, const std::filesystem::path& path);

// Reads every `<region>.<subject-id>.rdm` file in `dir`. Regions and subjects
// come back sorted by name; all files must share one label order.
std::vector<NeuralRdmSet> load_neural_rdms(const std::filesystem::path& dir);
void write_neural_rdms(std::span<const NeuralRdmSet> sets, const std::filesystem::path& dir);

struct SynthConfig {
  std::size_t n_stories = 200;
  std::size_t n_tweets = 2000;
  std::size_t n_emotions = kNumEmotions;
  std::size_t n_appraisals = kNumAppraisals;
  std::size_t n_emojis = kNumEmojis;
  std::size_t vocab_size_signal = 1;   // signal tokens owned by each appraisal dimension
  std::size_t noise_vocab = 40;        // shared filler vocabulary
  double noise_token_rate = 0.2;       // fraction of emitted tokens that are filler
  double signal_scale = 2.0;           // expected tokens per dimension = scale * sigmoid(gain * latent)
  double signal_gain = 1.0;
  double appraisal_noise_sd = 0.5;     // story latent = prototype + N(0, sd^2)
  double tweet_spread_sd = 1.0;        // tweet latent = prototype + N(0, sd^2)
  std::size_t n_subjects = 22;
  double neural_noise_sd = 3.7;
  std::vector<std::string> regions = {"DMPFC", "MMPFC", "RTPJ"};
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthWorld {
  std::vector<StoryExample> stories;
  std::vector<TweetExample> tweets;
  std::vector<std::string> emotion_names;
  Matrix prototypes;        // n_emotions x n_appraisals
  Matrix emoji_projection;  // 6 x n_appraisals
  Rdm appraisal_rdm;        // ground-truth prototype RDM
  std::vector<NeuralRdmSet> neural;
};

// Emoji index from a 6-dim projection: element 0 is the most significant bit,
// positive values set the bit. (+,+,-,+,-,-) -> 0b110100 = 52.
int emoji_cell(std::span<const double> projection);

// Signal token for appraisal dimension d, synonym k.
std::string signal_token(std::size_t dimension, std::size_t synonym);

SynthWorld generate_synthetic(const SynthConfig& config);

// Writes stories.jsonl, tweets.jsonl, neural/<region>.<subject>.rdm and
// truth/appraisal.rdm under `dir`.
void write_world(const SynthWorld& world, const std::filesystem::path& dir);

}  // namespace affectlab
