// Appraisal layer, emotion/emoji softmax heads, and alternating multitask
// training on top of a frozen encoder.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affectlab/errors.hpp"
#include "affectlab/model.hpp"
#include "affectlab/random.hpp"

namespace affectlab {

namespace {

enum : std::uint64_t { kStreamHeadInit = 201, kStreamStoryOrder, kStreamTweetOrder };

void fill_uniform(Matrix& m, Rng& rng) {
  for (double& v : m.values()) v = rng.uniform(-0.1, 0.1);
}

// Per-example activations shared by the two batch losses.
struct HeadPass {
  std::vector<double> input;       // standardized rep (D)
  std::vector<double> joint;       // [input || appraisals] (D + A)
  std::vector<double> appraisals;  // A
};

void standardize(const HeadParams& heads, std::span<const double> rep, std::span<double> out) {
  const bool scaled = !heads.input_mean.empty();
  for (std::size_t i = 0; i < rep.size(); ++i) {
    out[i] = scaled ? (rep[i] - heads.input_mean[i]) / heads.input_scale[i] : rep[i];
  }
}

void run_trunk(const HeadParams& heads, std::span<const double> rep, HeadPass& pass) {
  const std::size_t d = heads.input_dim();
  const std::size_t a = heads.n_appraisals();
  if (rep.size() != d) {
    throw ArgumentError("heads: representation has dimension " + std::to_string(rep.size()) +
                        ", expected " + std::to_string(d));
  }
  pass.input.resize(d);
  pass.appraisals.resize(a);
  pass.joint.resize(d + a);
  standardize(heads, rep, pass.input);
  heads.appraisal.forward(pass.input, pass.appraisals);
  std::copy(pass.input.begin(), pass.input.end(), pass.joint.begin());
  std::copy(pass.appraisals.begin(), pass.appraisals.end(), pass.joint.begin() + static_cast<std::ptrdiff_t>(d));
}

void check_head_shapes(const HeadParams& h) {
  const std::size_t d = h.input_dim(), a = h.n_appraisals();
  if (h.appraisal.bias.cols() != a || h.emotion.weights.cols() != d + a ||
      h.emoji.weights.cols() != d + a || h.emotion.bias.cols() != h.emotion.weights.rows() ||
      h.emoji.bias.cols() != h.emoji.weights.rows()) {
    throw ArgumentError("heads: inconsistent parameter shapes");
  }
  if (!h.input_mean.empty() && (h.input_mean.size() != d || h.input_scale.size() != d)) {
    throw ArgumentError("heads: input normalization has the wrong length");
  }
}

// Softmax head step: returns CE, adds head gradients, and adds the gradient
// w.r.t. the appraisal layer output into d_appraisals.
double softmax_head_step(const AffineParams& head, const HeadPass& pass, int label, double scale,
                         AffineParams* grads, std::vector<double>* d_appraisals) {
  std::vector<double> logits(head.weights.rows());
  head.forward(pass.joint, logits);
  auto probs = softmax(logits);
  const auto target = static_cast<std::size_t>(label);
  if (target >= probs.size()) {
    throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) + ")");
  }
  const double ce = cross_entropy(probs, target);
  if (!grads) return ce;
  probs[target] -= 1.0;
  for (double& v : probs) v *= scale;
  add_outer(grads->weights, probs, pass.joint);
  for (std::size_t c = 0; c < probs.size(); ++c) grads->bias[c] += probs[c];
  std::vector<double> d_joint(pass.joint.size(), 0.0);
  add_transposed_product(head.weights, probs, d_joint);
  const std::size_t d = pass.input.size();
  for (std::size_t k = 0; k < d_appraisals->size(); ++k) (*d_appraisals)[k] += d_joint[d + k];
  return ce;
}

void appraisal_backward(const HeadPass& pass, std::span<const double> d_appraisals, AffineParams& grads) {
  add_outer(grads.weights, d_appraisals, pass.input);
  for (std::size_t k = 0; k < d_appraisals.size(); ++k) grads.bias[k] += d_appraisals[k];
}

void sgd_step(HeadParams& heads, const HeadParams& grads, double lr) {
  auto p = heads.blocks();
  auto g = grads.blocks();
  for (std::size_t b = 0; b < p.size(); ++b) {
    auto pv = p[b]->values();
    auto gv = g[b]->values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= lr * gv[i];
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

HeadParams HeadParams::zeros(std::size_t input_dim, std::size_t n_appraisals, std::size_t n_emotions,
                             std::size_t n_emojis) {
  HeadParams h;
  h.appraisal = AffineParams::zeros(n_appraisals, input_dim);
  h.emotion = AffineParams::zeros(n_emotions, input_dim + n_appraisals);
  h.emoji = AffineParams::zeros(n_emojis, input_dim + n_appraisals);
  return h;
}

HeadParams HeadParams::init(const ModelConfig& config, std::uint64_t seed) {
  HeadParams h = zeros(config.concat_dim(), config.n_appraisals, config.n_emotions, config.n_emojis);
  Rng rng(seed);
  for (Matrix* m : h.blocks()) fill_uniform(*m, rng);
  return h;
}

std::vector<Matrix*> HeadParams::blocks() {
  return {&appraisal.weights, &appraisal.bias, &emotion.weights,
          &emotion.bias,      &emoji.weights,  &emoji.bias};
}

std::vector<const Matrix*> HeadParams::blocks() const {
  auto mut = const_cast<HeadParams*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> HeadParams::block_names() {
  return {"appraisal.weights", "appraisal.bias", "emotion.weights",
          "emotion.bias",      "emoji.weights",  "emoji.bias"};
}

HeadOutputs heads_forward(std::span<const double> rep, const HeadParams& heads) {
  check_head_shapes(heads);
  HeadPass pass;
  run_trunk(heads, rep, pass);
  HeadOutputs out;
  out.appraisals = pass.appraisals;
  std::vector<double> logits(heads.emotion.weights.rows());
  heads.emotion.forward(pass.joint, logits);
  out.emotion_probs = softmax(logits);
  logits.resize(heads.emoji.weights.rows());
  heads.emoji.forward(pass.joint, logits);
  out.emoji_probs = softmax(logits);
  return out;
}

double story_batch_loss(const HeadParams& heads, const Matrix& reps, const Matrix& targets,
                        std::span<const int> emotions, double appraisal_weight, HeadParams* grads,
                        double* emotion_part, double* appraisal_part) {
  check_head_shapes(heads);
  const std::size_t b = reps.rows();
  if (b == 0 || targets.rows() != b || emotions.size() != b) {
    throw ArgumentError("story_batch_loss: batch shapes disagree");
  }
  const std::size_t a = heads.n_appraisals();
  if (targets.cols() != a) {
    throw DataError("story_batch_loss: appraisal targets have " + std::to_string(targets.cols()) +
                    " dimensions, expected " + std::to_string(a));
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  HeadPass pass;
  std::vector<double> d_app(a);
  double ce_total = 0.0, mse_total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    run_trunk(heads, reps.row(i), pass);
    std::fill(d_app.begin(), d_app.end(), 0.0);
    ce_total += softmax_head_step(heads.emotion, pass, emotions[i], inv_b,
                                  grads ? &grads->emotion : nullptr, &d_app);
    const auto target = targets.row(i);
    mse_total += mse(pass.appraisals, target);
    if (grads) {
      const double k = appraisal_weight * 2.0 / static_cast<double>(a) * inv_b;
      for (std::size_t j = 0; j < a; ++j) d_app[j] += k * (pass.appraisals[j] - target[j]);
      appraisal_backward(pass, d_app, grads->appraisal);
    }
  }
  if (emotion_part) *emotion_part = ce_total * inv_b;
  if (appraisal_part) *appraisal_part = mse_total * inv_b;
  return (ce_total + appraisal_weight * mse_total) * inv_b;
}

double emoji_batch_loss(const HeadParams& heads, const Matrix& reps, std::span<const int> emojis,
                        HeadParams* grads) {
  check_head_shapes(heads);
  const std::size_t b = reps.rows();
  if (b == 0 || emojis.size() != b) throw ArgumentError("emoji_batch_loss: batch shapes disagree");
  const double inv_b = 1.0 / static_cast<double>(b);
  HeadPass pass;
  std::vector<double> d_app(heads.n_appraisals());
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    run_trunk(heads, reps.row(i), pass);
    std::fill(d_app.begin(), d_app.end(), 0.0);
    total += softmax_head_step(heads.emoji, pass, emojis[i], inv_b, grads ? &grads->emoji : nullptr,
                               &d_app);
    if (grads) appraisal_backward(pass, d_app, grads->appraisal);
  }
  return total * inv_b;
}

MultitaskResult train_heads(const Matrix& story_reps, const Matrix& story_ratings,
                            std::span<const int> emotions, const Matrix& tweet_reps,
                            std::span<const int> emojis, const ModelConfig& config) {
  if (story_reps.rows() == 0) throw DataError("multitask training needs at least one story");
  if (story_ratings.rows() != story_reps.rows() || emotions.size() != story_reps.rows()) {
    throw ArgumentError("train_heads: story arrays disagree in length");
  }
  if (tweet_reps.rows() != emojis.size()) throw ArgumentError("train_heads: tweet arrays disagree in length");
  if (tweet_reps.rows() > 0 && tweet_reps.cols() != story_reps.cols()) {
    throw ArgumentError("train_heads: story and tweet representations differ in width");
  }
  if (story_ratings.cols() != config.n_appraisals) {
    throw DataError("appraisal vectors have " + std::to_string(story_ratings.cols()) +
                    " entries, expected " + std::to_string(config.n_appraisals));
  }
  for (std::size_t i = 0; i < emotions.size(); ++i) {
    if (emotions[i] < 0 || static_cast<std::size_t>(emotions[i]) >= config.n_emotions) {
      throw DataError("story " + std::to_string(i) + ": emotion label " + std::to_string(emotions[i]) +
                      " outside [0, " + std::to_string(config.n_emotions) + ")");
    }
  }
  for (std::size_t i = 0; i < emojis.size(); ++i) {
    if (emojis[i] < 0 || static_cast<std::size_t>(emojis[i]) >= config.n_emojis) {
      throw DataError("tweet " + std::to_string(i) + ": emoji label " + std::to_string(emojis[i]) +
                      " outside [0, " + std::to_string(config.n_emojis) + ")");
    }
  }

  ModelConfig cfg = config;
  const std::size_t d = story_reps.cols();
  MultitaskResult result;
  {
    Rng rng(derive_seed(cfg.seed, kStreamHeadInit));
    result.heads = HeadParams::zeros(d, cfg.n_appraisals, cfg.n_emotions, cfg.n_emojis);
    for (Matrix* m : result.heads.blocks()) fill_uniform(*m, rng);
  }
  HeadParams& heads = result.heads;

  // Input statistics over every representation the heads will see in training.
  {
    Matrix all(story_reps.rows() + tweet_reps.rows(), d);
    std::copy(story_reps.values().begin(), story_reps.values().end(), all.values().begin());
    std::copy(tweet_reps.values().begin(), tweet_reps.values().end(),
              all.values().begin() + static_cast<std::ptrdiff_t>(story_reps.size()));
    column_stats(all, heads.input_mean, heads.input_scale);
  }
  column_stats(story_ratings, heads.target_mean, heads.target_sd);
  Matrix z_targets = story_ratings;
  for (std::size_t r = 0; r < z_targets.rows(); ++r)
    for (std::size_t c = 0; c < z_targets.cols(); ++c)
      z_targets(r, c) = (z_targets(r, c) - heads.target_mean[c]) / heads.target_sd[c];

  HeadParams grads = HeadParams::zeros(d, cfg.n_appraisals, cfg.n_emotions, cfg.n_emojis);
  Rng story_rng(derive_seed(cfg.seed, kStreamStoryOrder));
  Rng tweet_rng(derive_seed(cfg.seed, kStreamTweetOrder));
  std::vector<std::size_t> story_order(story_reps.rows()), tweet_order(tweet_reps.rows());
  std::iota(story_order.begin(), story_order.end(), 0);
  std::iota(tweet_order.begin(), tweet_order.end(), 0);
  tweet_rng.shuffle(std::span<std::size_t>(tweet_order));
  std::size_t tweet_cursor = 0;

  const bool with_tweets = !tweet_order.empty();
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  result.report.seed = cfg.seed;
  for (std::size_t epoch = 0; epoch < cfg.multitask_epochs; ++epoch) {
    story_rng.shuffle(std::span<std::size_t>(story_order));
    double emoji_sum = 0.0, emotion_sum = 0.0, appraisal_sum = 0.0;
    std::size_t emoji_n = 0, story_n = 0;
    for (std::size_t start = 0; start < story_order.size(); start += cfg.batch_size) {
      if (with_tweets) {
        idx.clear();
        labels.clear();
        while (idx.size() < cfg.batch_size && idx.size() < tweet_order.size()) {
          if (tweet_cursor == tweet_order.size()) {
            tweet_rng.shuffle(std::span<std::size_t>(tweet_order));
            tweet_cursor = 0;
          }
          idx.push_back(tweet_order[tweet_cursor]);
          labels.push_back(emojis[tweet_order[tweet_cursor]]);
          ++tweet_cursor;
        }
        for (Matrix* m : grads.blocks()) m->fill(0.0);
        const double loss = emoji_batch_loss(heads, gather_rows(tweet_reps, idx), labels, &grads);
        sgd_step(heads, grads, cfg.learning_rate);
        emoji_sum += loss * static_cast<double>(idx.size());
        emoji_n += idx.size();
        result.report.schedule.push_back(TaskKind::kEmoji);
      }

      const std::size_t end = std::min(story_order.size(), start + cfg.batch_size);
      idx.assign(story_order.begin() + static_cast<std::ptrdiff_t>(start),
                 story_order.begin() + static_cast<std::ptrdiff_t>(end));
      labels.clear();
      for (std::size_t i : idx) labels.push_back(emotions[i]);
      for (Matrix* m : grads.blocks()) m->fill(0.0);
      double ce = 0.0, err = 0.0;
      story_batch_loss(heads, gather_rows(story_reps, idx), gather_rows(z_targets, idx), labels,
                       cfg.appraisal_weight, &grads, &ce, &err);
      sgd_step(heads, grads, cfg.learning_rate);
      emotion_sum += ce * static_cast<double>(idx.size());
      appraisal_sum += err * static_cast<double>(idx.size());
      story_n += idx.size();
      result.report.schedule.push_back(TaskKind::kStory);
    }
    if (with_tweets) result.report.emoji_loss.push_back(emoji_sum / static_cast<double>(emoji_n));
    result.report.emotion_loss.push_back(emotion_sum / static_cast<double>(story_n));
    result.report.appraisal_loss.push_back(appraisal_sum / static_cast<double>(story_n));
  }
  const auto blocks = heads.blocks();
  result.report.snapshot = checksum(blocks);
  return result;
}

MultitaskResult multitask_train(const EncoderParams& encoder, std::span<const StoryExample> stories,
                                std::span<const TweetExample> tweets, const Vocab& vocab,
                                const ModelConfig& config) {
  if (encoder.embedding.rows() != vocab.size()) {
    throw ArgumentError("multitask_train: encoder vocabulary size " +
                        std::to_string(encoder.embedding.rows()) + " != vocab size " +
                        std::to_string(vocab.size()));
  }
  for (const auto& s : stories) {
    if (s.appraisals.size() != config.n_appraisals) {
      throw DataError("story '" + s.id + "': " + std::to_string(s.appraisals.size()) +
                      " appraisals, expected " + std::to_string(config.n_appraisals));
    }
    if (s.emotion < 0 || static_cast<std::size_t>(s.emotion) >= config.n_emotions) {
      throw DataError("story '" + s.id + "': emotion label " + std::to_string(s.emotion) +
                      " outside [0, " + std::to_string(config.n_emotions) + ")");
    }
  }
  const std::uint64_t before = encoder.checksum();
  const Matrix story_reps = encode_all(encode_texts(stories, vocab, config.max_len), encoder);
  const Matrix tweet_reps = encode_all(encode_texts(tweets, vocab, config.max_len), encoder);

  Matrix ratings(stories.size(), config.n_appraisals);
  std::vector<int> emotions, emojis;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    std::copy(stories[i].appraisals.begin(), stories[i].appraisals.end(), ratings.row(i).begin());
    emotions.push_back(stories[i].emotion);
  }
  for (const auto& t : tweets) emojis.push_back(t.emoji);

  auto result = train_heads(story_reps, ratings, emotions, tweet_reps, emojis, config);
  if (encoder.checksum() != before) throw ContractViolation("multitask_train modified the encoder");
  return result;
}

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kConcat:
      return "concat";
    case FeatureMode::kAppraisalLayer:
      return "appraisal_layer";
    case FeatureMode::kConcatPlusAppraisal:
      return "concat_plus_appraisal";
    case FeatureMode::kBowAverage:
      return "bow_average";
  }
  return "?";
}

FeatureMode parse_feature_mode(const std::string& name) {
  for (auto m : {FeatureMode::kConcat, FeatureMode::kAppraisalLayer,
                 FeatureMode::kConcatPlusAppraisal, FeatureMode::kBowAverage}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown feature mode '" + name + "'");
}

Matrix features_from_concat(const Matrix& concat, std::size_t embed_dim, const HeadParams* heads,
                            FeatureMode mode) {
  const bool needs_heads =
      mode == FeatureMode::kAppraisalLayer || mode == FeatureMode::kConcatPlusAppraisal;
  if (needs_heads && !heads) {
    throw ArgumentError("feature mode " + to_string(mode) + " requires trained heads");
  }
  switch (mode) {
    case FeatureMode::kConcat:
      return concat;
    case FeatureMode::kBowAverage: {
      Matrix out(concat.rows(), embed_dim);
      for (std::size_t r = 0; r < concat.rows(); ++r) {
        std::copy_n(concat.row(r).begin(), embed_dim, out.row(r).begin());
      }
      return out;
    }
    case FeatureMode::kAppraisalLayer:
    case FeatureMode::kConcatPlusAppraisal: {
      const std::size_t a = heads->n_appraisals();
      const std::size_t lead = mode == FeatureMode::kAppraisalLayer ? 0 : concat.cols();
      Matrix out(concat.rows(), lead + a);
      HeadPass pass;
      check_head_shapes(*heads);
      for (std::size_t r = 0; r < concat.rows(); ++r) {
        run_trunk(*heads, concat.row(r), pass);
        auto dst = out.row(r);
        std::copy_n(concat.row(r).begin(), lead, dst.begin());
        std::copy(pass.appraisals.begin(), pass.appraisals.end(), dst.begin() + static_cast<std::ptrdiff_t>(lead));
      }
      return out;
    }
  }
  throw ArgumentError("unknown feature mode");
}

Matrix extract_features(std::span<const EncodedText> texts, const EncoderParams& encoder,
                        const HeadParams* heads, FeatureMode mode, unsigned jobs) {
  if ((mode == FeatureMode::kAppraisalLayer || mode == FeatureMode::kConcatPlusAppraisal) && !heads) {
    throw ArgumentError("feature mode " + to_string(mode) + " requires trained heads");
  }
  if (mode == FeatureMode::kBowAverage) {
    const std::size_t e = encoder.embed_dim();
    Matrix out(texts.size(), e);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::size_t n = 0;
      auto dst = out.row(i);
      for (std::int32_t id : texts[i].ids) {
        if (id == kPadId) continue;
        if (id < 0 || static_cast<std::size_t>(id) >= encoder.embedding.rows()) {
          throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary");
        }
        auto row = encoder.embedding.row(static_cast<std::size_t>(id));
        for (std::size_t k = 0; k < e; ++k) dst[k] += row[k];
        ++n;
      }
      if (n == 0) throw ArgumentError("bow_average: text " + std::to_string(i) + " has no tokens");
      for (double& v : dst) v /= static_cast<double>(n);
    }
    return out;
  }
  return features_from_concat(encode_all(texts, encoder, jobs), encoder.embed_dim(), heads, mode);
}

}  // namespace affectlab
