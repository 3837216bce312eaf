#include "affectlab/pipeline.hpp"

#include <cstdio>

#include "affectlab/errors.hpp"
#include "affectlab/random.hpp"

namespace affectlab {

namespace {

enum : std::uint64_t { kStreamModel = 1001, kStreamSplit, kStreamChance };

Matrix ratings_matrix(const std::vector<StoryExample>& stories, std::size_t n_appraisals) {
  Matrix out(stories.size(), n_appraisals);
  for (std::size_t i = 0; i < stories.size(); ++i) {
    if (stories[i].appraisals.size() != n_appraisals) {
      throw DataError("story '" + stories[i].id + "': expected " + std::to_string(n_appraisals) +
                      " appraisals");
    }
    std::copy(stories[i].appraisals.begin(), stories[i].appraisals.end(), out.row(i).begin());
  }
  return out;
}

Vocab vocab_for(const ExperimentInputs& inputs, std::size_t min_count) {
  std::vector<Tokens> corpus;
  corpus.reserve(inputs.tweets.size() + inputs.stories.size());
  for (const auto& t : inputs.tweets) corpus.push_back(tokenize(t.text));
  for (const auto& s : inputs.stories) corpus.push_back(tokenize(s.text));
  return build_vocab(corpus, min_count);
}

}  // namespace

ModelConfig seeded_model_config(ModelConfig base, std::uint64_t master_seed) {
  base.seed = derive_seed(master_seed, kStreamModel);
  return base;
}

SplitSpec seeded_split_spec(SplitSpec base, std::uint64_t master_seed) {
  base.seed = derive_seed(master_seed, kStreamSplit);
  return base;
}

ExperimentInputs inputs_from_world(const SynthWorld& world) {
  ExperimentInputs in;
  in.stories = world.stories;
  in.tweets = world.tweets;
  in.neural = world.neural;
  in.emotion_names = world.emotion_names;
  in.truth_rdm = world.appraisal_rdm;
  return in;
}

FeatureSet build_feature_set(const ExperimentInputs& inputs, const Checkpoint& ckpt, unsigned jobs) {
  FeatureSet fs;
  const std::size_t max_len = ckpt.config.max_len;
  fs.concat = encode_all(encode_texts(inputs.stories, ckpt.vocab, max_len), ckpt.encoder, jobs);
  fs.tweet_concat = encode_all(encode_texts(inputs.tweets, ckpt.vocab, max_len), ckpt.encoder, jobs);
  fs.ratings = ratings_matrix(inputs.stories, ckpt.config.n_appraisals);
  for (const auto& s : inputs.stories) fs.emotions.push_back(s.emotion);
  for (const auto& t : inputs.tweets) fs.emojis.push_back(t.emoji);
  return fs;
}

ExperimentResult run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& config) {
  if (inputs.stories.empty()) throw DataError("experiment: no stories");
  if (inputs.tweets.empty()) throw DataError("experiment: no tweets to pretrain on");
  ExperimentResult result;

  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config.model;
  ckpt.vocab = vocab_for(inputs, config.model.min_count);
  ckpt.config.vocab_size = ckpt.vocab.size();
  {
    auto pre = pretrain_emoji(inputs.tweets, ckpt.vocab, ckpt.config);
    ckpt.encoder = std::move(pre.encoder);
    result.pretrain_report = std::move(pre.report);
  }

  const FeatureSet fs = build_feature_set(inputs, ckpt, config.jobs);
  {
    auto mt = train_heads(fs.concat, fs.ratings, fs.emotions, fs.tweet_concat, fs.emojis, ckpt.config);
    ckpt.heads = std::move(mt.heads);
    result.multitask_report = std::move(mt.report);
  }

  const std::size_t e = ckpt.config.embed_dim;
  const Matrix bow = features_from_concat(fs.concat, e, nullptr, FeatureMode::kBowAverage);
  const Matrix appraisal_layer =
      features_from_concat(fs.concat, e, &*ckpt.heads, FeatureMode::kAppraisalLayer);

  // Table 1 analog.
  const auto& labels = fs.emotions;
  auto eval = [&](const Matrix& x, std::span<const int> y) {
    return evaluate_accuracy_ci(x, y, config.split, config.svm_c, config.jobs, config.svm);
  };
  std::vector<int> shuffled = labels;
  {
    Rng rng(derive_seed(config.split.seed, kStreamChance));
    rng.shuffle(std::span<int>(shuffled));
  }
  auto& t1 = result.table1;
  t1.push_back({space::kChance, kWithAppraisals, eval(fs.ratings, shuffled)});
  t1.push_back({space::kChance, kFromText, eval(fs.concat, shuffled)});
  t1.push_back({space::kBow, kWithAppraisals, eval(hconcat(bow, fs.ratings), labels)});
  t1.push_back({space::kBow, kFromText, eval(bow, labels)});
  t1.push_back({space::kEncoder, kWithAppraisals, eval(hconcat(fs.concat, fs.ratings), labels)});
  t1.push_back({space::kEncoder, kFromText, eval(fs.concat, labels)});

  // Multitask heads are retrained on each split's training stories so test
  // labels and ratings never reach the heads.
  auto multitask_features = [&](bool with_ratings) {
    return [&, with_ratings](const Split& split, std::size_t) {
      const Matrix train_reps = gather_rows(fs.concat, split.train);
      const Matrix train_ratings = gather_rows(fs.ratings, split.train);
      std::vector<int> train_emotions;
      for (std::size_t i : split.train) train_emotions.push_back(labels[i]);
      const auto mt = train_heads(train_reps, train_ratings, train_emotions, fs.tweet_concat,
                                  fs.emojis, ckpt.config);
      Matrix x = features_from_concat(fs.concat, e, &mt.heads, FeatureMode::kConcatPlusAppraisal);
      return with_ratings ? hconcat(x, fs.ratings) : x;
    };
  };
  t1.push_back({space::kMultitask, kWithAppraisals,
                evaluate_accuracy_ci(multitask_features(true), labels, config.split, config.svm_c,
                                     config.jobs, config.svm)});
  t1.push_back({space::kMultitask, kFromText,
                evaluate_accuracy_ci(multitask_features(false), labels, config.split, config.svm_c,
                                     config.jobs, config.svm)});
  t1.push_back({space::kAppraisals, kWithAppraisals, eval(fs.ratings, labels)});

  // Table 2 analog.
  const std::size_t k = ckpt.config.n_emotions;
  std::vector<std::string> names = inputs.emotion_names;
  if (names.size() != k) {
    names.clear();
    for (std::size_t i = 0; i < k; ++i) names.push_back("emotion" + std::to_string(i));
  }
  auto rdm_of = [&](const Matrix& x) { return compute_rdm(emotion_centroids(x, labels, k), names); };
  result.feature_rdms[space::kAppraisals] = rdm_of(fs.ratings);
  result.feature_rdms[space::kEncoder] = rdm_of(fs.concat);
  result.feature_rdms[space::kMultitask] = rdm_of(appraisal_layer);
  result.feature_rdms[space::kBow] = rdm_of(bow);

  result.multitask_vs_appraisal_tau = kendall_tau(result.feature_rdms[space::kMultitask],
                                                  result.feature_rdms[space::kAppraisals], config.tau);
  if (inputs.truth_rdm) {
    result.multitask_vs_truth_tau =
        kendall_tau(result.feature_rdms[space::kMultitask], *inputs.truth_rdm, config.tau);
  }

  if (!inputs.neural.empty()) {
    std::vector<NeuralRdmSet> regions = inputs.neural;
    add_tom_region(regions);
    for (const char* s : {space::kAppraisals, space::kEncoder, space::kMultitask, space::kBow}) {
      RsaRow row{s, {}};
      for (const auto& region : regions) {
        row.regions.push_back(
            group_level_rsa(result.feature_rdms[s], region, config.tau, config.group, config.jobs));
      }
      result.table2.push_back(std::move(row));
    }
  }
  return result;
}

std::string format_rsa_table(const std::vector<RsaRow>& rows) {
  if (rows.empty()) return "(no neural RDMs)\n";
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-10s", "region");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), " %15s", row.space.c_str());
    out += buf;
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.front().regions.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%-10s", rows.front().regions[r].region.c_str());
    out += buf;
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof(buf), " %15.4f", row.regions[r].mean_tau);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace affectlab
