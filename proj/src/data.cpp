#include "affectlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "affectlab/errors.hpp"
#include "affectlab/random.hpp"
#include "json.hpp"

namespace affectlab {

namespace {

using nlohmann::json;

// Stream ids for derive_seed.
enum : std::uint64_t {
  kStreamPrototypes = 1,
  kStreamProjection,
  kStreamStories,
  kStreamTweets,
  kStreamNeural,
};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Calls fn(record, where) for each non-blank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed record: " + e.what());
    }
    if (!record.is_object()) throw DataError(where + ": record is not an object");
    try {
      fn(record, where);
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
}

std::string require_string(const json& r, const char* key, const std::string& where) {
  if (!r.contains(key) || !r[key].is_string()) {
    throw DataError(where + ": field '" + key + "' missing or not a string");
  }
  return r[key].get<std::string>();
}

int require_index(const json& r, const char* key, std::size_t limit, const std::string& where) {
  if (!r.contains(key) || !r[key].is_number_integer()) {
    throw DataError(where + ": field '" + key + "' missing or not an integer");
  }
  const auto v = r[key].get<std::int64_t>();
  if (v < 0 || static_cast<std::size_t>(v) >= limit) {
    throw DataError(where + ": " + key + " " + std::to_string(v) + " outside [0, " +
                    std::to_string(limit) + ")");
  }
  return static_cast<int>(v);
}

std::string subject_name(std::size_t s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02zu", s + 1);
  return buf;
}

// Story/tweet text from a latent appraisal vector.
std::string generate_text(std::span<const double> latent, const SynthConfig& cfg, Rng& rng) {
  std::vector<std::string> tokens;
  for (std::size_t d = 0; d < latent.size(); ++d) {
    const double expected = cfg.signal_scale * sigmoid(cfg.signal_gain * latent[d]);
    auto count = static_cast<std::size_t>(std::floor(expected));
    if (rng.uniform() < expected - std::floor(expected)) ++count;
    for (std::size_t i = 0; i < count; ++i) {
      tokens.push_back(signal_token(d, rng.below(cfg.vocab_size_signal)));
    }
  }
  const double filler = static_cast<double>(tokens.size()) * cfg.noise_token_rate /
                        (1.0 - cfg.noise_token_rate);
  auto n_filler = static_cast<std::size_t>(std::floor(filler));
  if (rng.uniform() < filler - std::floor(filler)) ++n_filler;
  for (std::size_t i = 0; i < n_filler; ++i) {
    tokens.push_back("w" + std::to_string(rng.below(cfg.noise_vocab)));
  }
  if (tokens.empty()) tokens.push_back("w0");
  rng.shuffle(std::span<std::string>(tokens));
  std::string text;
  for (const auto& t : tokens) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  return text + ".";
}

}  // namespace

const std::vector<std::string>& default_emotion_names() {
  static const std::vector<std::string> names = {
      "grateful",  "joyful",   "hopeful",      "excited",    "proud",
      "impressed", "content",  "nostalgic",    "surprised",  "lonely",
      "furious",   "terrified", "apprehensive", "annoyed",   "guilty",
      "disgusted", "embarrassed", "devastated", "disappointed", "jealous"};
  return names;
}

std::vector<StoryExample> load_stories(const std::filesystem::path& path, std::size_t n_appraisals,
                                       std::size_t n_emotions) {
  std::vector<StoryExample> out;
  for_each_record(path, [&](const json& r, const std::string& where) {
    StoryExample s;
    s.id = require_string(r, "id", where);
    s.text = require_string(r, "text", where);
    if (s.text.empty()) throw DataError(where + ": empty text");
    s.emotion = require_index(r, "emotion", n_emotions, where);
    if (!r.contains("appraisals") || !r["appraisals"].is_array()) {
      throw DataError(where + ": field 'appraisals' missing or not an array");
    }
    const auto& a = r["appraisals"];
    if (a.size() != n_appraisals) {
      throw DataError(where + ": expected " + std::to_string(n_appraisals) + " appraisals, got " +
                      std::to_string(a.size()));
    }
    for (const auto& v : a) {
      if (!v.is_number()) throw DataError(where + ": appraisal is not a number");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError(where + ": non-finite appraisal");
      s.appraisals.push_back(x);
    }
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<TweetExample> load_tweets(const std::filesystem::path& path, std::size_t n_emojis) {
  std::vector<TweetExample> out;
  for_each_record(path, [&](const json& r, const std::string& where) {
    TweetExample t;
    t.id = require_string(r, "id", where);
    t.text = require_string(r, "text", where);
    if (t.text.empty()) throw DataError(where + ": empty text");
    t.emoji = require_index(r, "emoji", n_emojis, where);
    out.push_back(std::move(t));
  });
  return out;
}

void write_stories(std::span<const StoryExample> stories, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& s : stories) {
    json r = {{"id", s.id}, {"text", s.text}, {"emotion", s.emotion}, {"appraisals", s.appraisals}};
    out << r.dump() << '\n';
  }
}

void write_tweets(std::span<const TweetExample> tweets, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& t : tweets) {
    json r = {{"id", t.id}, {"text", t.text}, {"emoji", t.emoji}};
    out << r.dump() << '\n';
  }
}

std::vector<NeuralRdmSet> load_neural_rdms(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("neural RDM directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".rdm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::map<std::string, Rdm>> grouped;
  std::vector<std::string> reference_labels;
  std::filesystem::path reference_file;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();  // <region>.<subject>
    const auto dot = stem.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == stem.size()) {
      throw DataError(f.string() + ": file name must be <region>.<subject-id>.rdm");
    }
    Rdm rdm = read_rdm(f);
    if (reference_file.empty()) {
      reference_labels = rdm.labels;
      reference_file = f;
    } else if (rdm.labels != reference_labels) {
      throw DataError("label order in " + f.string() + " differs from " + reference_file.string());
    }
    grouped[stem.substr(0, dot)][stem.substr(dot + 1)] = std::move(rdm);
  }

  std::vector<NeuralRdmSet> sets;
  for (auto& [region, subjects] : grouped) {
    NeuralRdmSet set;
    set.region = region;
    for (auto& [id, rdm] : subjects) {
      set.subject_ids.push_back(id);
      set.subjects.push_back(std::move(rdm));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void write_neural_rdms(std::span<const NeuralRdmSet> sets, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& set : sets) {
    for (std::size_t s = 0; s < set.subjects.size(); ++s) {
      write_rdm(set.subjects[s], dir / (set.region + "." + set.subject_ids[s] + ".rdm"));
    }
  }
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("synth config: " + m); };
  if (n_stories < 1 || n_emotions < 2 || n_appraisals < kEmojiBits) fail("counts too small");
  if (n_emojis != (std::size_t{1} << kEmojiBits)) fail("n_emojis must be 64 (6 sign bits)");
  if (vocab_size_signal < 1 || noise_vocab < 1) fail("vocabulary sizes must be >= 1");
  if (!(noise_token_rate >= 0.0 && noise_token_rate < 1.0)) fail("noise_token_rate must be in [0,1)");
  if (!(signal_scale > 0.0)) fail("signal_scale must be positive");
  if (!(signal_gain > 0.0)) fail("signal_gain must be positive");
  if (!(appraisal_noise_sd >= 0.0) || !(tweet_spread_sd >= 0.0) || !(neural_noise_sd >= 0.0)) {
    fail("noise levels must be nonnegative");
  }
  if (n_subjects < 1 || regions.empty()) fail("need at least one subject and one region");
  if (n_emotions > default_emotion_names().size()) fail("at most 20 emotions have names");
}

int emoji_cell(std::span<const double> projection) {
  if (projection.size() != kEmojiBits) throw ArgumentError("emoji_cell: need a 6-dim projection");
  int cell = 0;
  for (double p : projection) cell = (cell << 1) | (p > 0.0 ? 1 : 0);
  return cell;
}

std::string signal_token(std::size_t dimension, std::size_t synonym) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "a%02zux%zu", dimension, synonym);
  return buf;
}

SynthWorld generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthWorld world;
  const auto& all_names = default_emotion_names();
  world.emotion_names.assign(all_names.begin(), all_names.begin() + static_cast<std::ptrdiff_t>(cfg.n_emotions));

  {
    Rng rng(derive_seed(cfg.seed, kStreamPrototypes));
    world.prototypes = Matrix(cfg.n_emotions, cfg.n_appraisals);
    for (double& v : world.prototypes.values()) v = rng.normal();
  }
  {
    Rng rng(derive_seed(cfg.seed, kStreamProjection));
    world.emoji_projection = Matrix(kEmojiBits, cfg.n_appraisals);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.n_appraisals));
    for (double& v : world.emoji_projection.values()) v = scale * rng.normal();
  }
  world.appraisal_rdm = compute_rdm(world.prototypes, world.emotion_names);

  {
    Rng rng(derive_seed(cfg.seed, kStreamStories));
    // Balanced labels in shuffled order; any remainder is drawn uniformly.
    std::vector<int> emotions(cfg.n_stories);
    for (std::size_t i = 0; i < cfg.n_stories; ++i) {
      emotions[i] = static_cast<int>(i % cfg.n_emotions);
    }
    const std::size_t balanced = cfg.n_stories - cfg.n_stories % cfg.n_emotions;
    for (std::size_t i = balanced; i < cfg.n_stories; ++i) {
      emotions[i] = static_cast<int>(rng.below(cfg.n_emotions));
    }
    rng.shuffle(std::span<int>(emotions));
    for (std::size_t i = 0; i < cfg.n_stories; ++i) {
      StoryExample s;
      s.id = "story" + std::to_string(i);
      s.emotion = emotions[i];
      const auto proto = world.prototypes.row(static_cast<std::size_t>(s.emotion));
      s.appraisals.resize(cfg.n_appraisals);
      for (std::size_t d = 0; d < cfg.n_appraisals; ++d) {
        s.appraisals[d] = proto[d] + cfg.appraisal_noise_sd * rng.normal();
      }
      s.text = generate_text(s.appraisals, cfg, rng);
      world.stories.push_back(std::move(s));
    }
  }

  {
    Rng rng(derive_seed(cfg.seed, kStreamTweets));
    std::vector<double> latent(cfg.n_appraisals);
    std::array<double, kEmojiBits> proj{};
    for (std::size_t i = 0; i < cfg.n_tweets; ++i) {
      const auto proto = world.prototypes.row(rng.below(cfg.n_emotions));
      for (std::size_t d = 0; d < cfg.n_appraisals; ++d) {
        latent[d] = proto[d] + cfg.tweet_spread_sd * rng.normal();
      }
      affine(world.emoji_projection, {}, latent, proj);
      TweetExample t;
      t.id = "tweet" + std::to_string(i);
      t.emoji = emoji_cell(proj);
      t.text = generate_text(latent, cfg, rng);
      world.tweets.push_back(std::move(t));
    }
  }

  {
    Rng rng(derive_seed(cfg.seed, kStreamNeural));
    const std::size_t k = cfg.n_emotions;
    for (const auto& region : cfg.regions) {
      NeuralRdmSet set;
      set.region = region;
      for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        Rdm rdm{world.emotion_names, Matrix(k, k)};
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = i + 1; j < k; ++j) {
            const double v =
                std::max(0.0, world.appraisal_rdm.matrix(i, j) + cfg.neural_noise_sd * rng.normal());
            rdm.matrix(i, j) = v;
            rdm.matrix(j, i) = v;
          }
        }
        set.subject_ids.push_back(subject_name(s));
        set.subjects.push_back(std::move(rdm));
      }
      world.neural.push_back(std::move(set));
    }
  }
  return world;
}

void write_world(const SynthWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "truth");
  write_stories(world.stories, dir / "stories.jsonl");
  write_tweets(world.tweets, dir / "tweets.jsonl");
  write_neural_rdms(world.neural, dir / "neural");
  write_rdm(world.appraisal_rdm, dir / "truth" / "appraisal.rdm");
}

}  // namespace affectlab
