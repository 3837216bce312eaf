#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "affectlab/data.hpp"
#include "affectlab/errors.hpp"
#include "affectlab/model.hpp"
#include "affectlab/random.hpp"
#include "doctest.h"

using namespace affectlab;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Single-unit LSTM run written out gate by gate. w[g] = {w_x..., w_h}, gates i, f, o, g.
std::vector<double> hand_lstm(const std::vector<std::vector<double>>& xs,
                              const double w[4][8], const double b[4], bool reverse) {
  const std::size_t n = xs.size();
  const std::size_t in = xs[0].size();
  std::vector<double> out(n);
  double h = 0.0, c = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    double z[4];
    for (int g = 0; g < 4; ++g) {
      z[g] = b[g] + w[g][in] * h;
      for (std::size_t k = 0; k < in; ++k) z[g] += w[g][k] * xs[t][k];
    }
    const double i = sig(z[0]), f = sig(z[1]), o = sig(z[2]), cand = std::tanh(z[3]);
    c = f * c + i * cand;
    h = o * std::tanh(c);
    out[t] = h;
  }
  return out;
}

void load(LstmParams& p, const double w[4][8], const double b[4]) {
  const std::size_t cols = p.weights.cols();
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t k = 0; k < cols; ++k) p.weights(g, k) = w[g][k];
    p.bias[g] = b[g];
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

ModelConfig tiny_config(std::size_t vocab) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = 4;
  c.lstm_hidden = 3;
  c.max_len = 12;
  c.min_count = 1;
  return c;
}

}  // namespace

TEST_CASE("encoder matches a hand-rolled LSTM on a two-token input") {
  EncoderParams p = EncoderParams::zeros(3, 2, 1);
  p.embedding(1, 0) = 0.5;
  p.embedding(1, 1) = -0.3;
  p.embedding(2, 0) = -0.2;
  p.embedding(2, 1) = 0.8;
  const double w1f[4][8] = {{0.1, 0.2, 0.3}, {-0.1, 0.4, 0.2}, {0.3, -0.2, 0.1}, {0.5, 0.6, -0.4}};
  const double b1f[4] = {0.0, 1.0, 0.1, -0.1};
  const double w1b[4][8] = {{0.2, -0.1, 0.1}, {0.3, 0.3, -0.3}, {-0.4, 0.2, 0.2}, {0.7, -0.5, 0.3}};
  const double b1b[4] = {0.1, 1.0, -0.1, 0.05};
  const double w2f[4][8] = {{0.1, 0.1, 0.2, -0.2, 0.3}, {0.2, -0.3, 0.1, 0.4, 0.1},
                            {0.3, 0.2, -0.1, 0.1, 0.2}, {-0.6, 0.4, 0.5, 0.2, -0.3}};
  const double b2f[4] = {0.0, 1.0, 0.0, 0.2};
  const double w2b[4][8] = {{-0.2, 0.3, 0.1, 0.1, 0.1}, {0.1, 0.1, -0.2, 0.3, 0.2},
                            {0.2, -0.1, 0.3, 0.2, -0.1}, {0.4, 0.3, -0.5, 0.6, 0.2}};
  const double b2b[4] = {-0.1, 1.0, 0.1, 0.0};
  load(p.layer1.forward, w1f, b1f);
  load(p.layer1.backward, w1b, b1b);
  load(p.layer2.forward, w2f, b2f);
  load(p.layer2.backward, w2b, b2b);

  const std::vector<std::vector<double>> x = {{0.5, -0.3}, {-0.2, 0.8}};
  const auto h1f = hand_lstm(x, w1f, b1f, false);
  const auto h1b = hand_lstm(x, w1b, b1b, true);
  std::vector<std::vector<double>> x2;
  for (std::size_t t = 0; t < 2; ++t) x2.push_back({x[t][0], x[t][1], h1f[t], h1b[t]});
  const auto h2f = hand_lstm(x2, w2f, b2f, false);
  const auto h2b = hand_lstm(x2, w2b, b2b, true);

  const EncodedText text{{1, 2, 0, 0}, 2};
  const auto rep = encoder_forward(text, p);
  REQUIRE(rep.size() == 6);
  CHECK(rep[0] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(rep[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rep[2] == doctest::Approx(mean(h1f)).epsilon(1e-12));
  CHECK(rep[3] == doctest::Approx(mean(h1b)).epsilon(1e-12));
  CHECK(rep[4] == doctest::Approx(mean(h2f)).epsilon(1e-12));
  CHECK(rep[5] == doctest::Approx(mean(h2b)).epsilon(1e-12));
}

TEST_CASE("padding does not change the representation") {
  const ModelConfig cfg = tiny_config(6);
  const EncoderParams p = EncoderParams::init(cfg, 3);
  const EncodedText short_pad{{2, 3, 4, 0}, 3};
  const EncodedText long_pad{{2, 3, 4, 0, 0, 0, 0, 0}, 3};
  CHECK(encoder_forward(short_pad, p) == encoder_forward(long_pad, p));
  CHECK_THROWS_AS(encoder_forward(EncodedText{{0, 0}, 0}, p), ArgumentError);
  CHECK_THROWS_AS(encoder_forward(EncodedText{{9}, 1}, p), ArgumentError);
}

TEST_CASE("init follows the documented ranges") {
  const ModelConfig cfg = tiny_config(10);
  const EncoderParams p = EncoderParams::init(cfg, 5);
  CHECK(p.layer2.forward.input_dim() == cfg.embed_dim + 2 * cfg.lstm_hidden);
  for (const Matrix* m : p.blocks())
    for (double v : m->values()) CHECK(((std::abs(v) <= 0.1) || v == 1.0));
  for (std::size_t h = 0; h < cfg.lstm_hidden; ++h) CHECK(p.layer1.forward.bias[cfg.lstm_hidden + h] == 1.0);
  CHECK(EncoderParams::init(cfg, 5) == p);
  CHECK_FALSE(EncoderParams::init(cfg, 6) == p);
}

TEST_CASE("zero heads give uniform probabilities") {
  const HeadParams h = HeadParams::zeros(5, 38, 20, 64);
  const std::vector<double> rep = {1, 2, 3, 4, 5};
  const auto out = heads_forward(rep, h);
  for (double a : out.appraisals) CHECK(a == 0.0);
  for (double p : out.emotion_probs) CHECK(p == doctest::Approx(1.0 / 20));
  for (double p : out.emoji_probs) CHECK(p == doctest::Approx(1.0 / 64));
}

TEST_CASE("pretraining memorizes a small tweet set") {
  SynthConfig sc;
  sc.n_tweets = 50;
  sc.n_stories = 20;
  sc.n_subjects = 1;
  const SynthWorld w = generate_synthetic(sc);
  std::vector<Tokens> corpus;
  for (const auto& t : w.tweets) corpus.push_back(tokenize(t.text));
  const Vocab v = build_vocab(corpus, 1);
  ModelConfig cfg = tiny_config(v.size());
  cfg.epochs = 30;
  cfg.learning_rate = 0.5;
  cfg.max_len = 64;
  const auto a = pretrain_emoji(w.tweets, v, cfg);
  REQUIRE(a.report.emoji_loss.size() == 30);
  CHECK(a.report.emoji_loss.back() < a.report.emoji_loss.front());
  const auto b = pretrain_emoji(w.tweets, v, cfg);
  CHECK(a.encoder == b.encoder);
  CHECK(a.report.emoji_loss == b.report.emoji_loss);
}

TEST_CASE("multitask training freezes the encoder and alternates tasks") {
  SynthConfig sc;
  sc.n_tweets = 60;
  sc.n_stories = 40;
  sc.n_subjects = 1;
  const SynthWorld w = generate_synthetic(sc);
  std::vector<Tokens> corpus;
  for (const auto& t : w.tweets) corpus.push_back(tokenize(t.text));
  for (const auto& s : w.stories) corpus.push_back(tokenize(s.text));
  const Vocab v = build_vocab(corpus, 1);
  ModelConfig cfg = tiny_config(v.size());
  cfg.max_len = 64;
  cfg.multitask_epochs = 20;
  const EncoderParams enc = EncoderParams::init(cfg, 9);
  const EncoderParams copy = enc;
  const auto r = multitask_train(enc, w.stories, w.tweets, v, cfg);
  CHECK(enc == copy);
  REQUIRE(r.report.schedule.size() >= 2);
  for (std::size_t i = 0; i < r.report.schedule.size(); ++i) {
    CHECK(r.report.schedule[i] == (i % 2 == 0 ? TaskKind::kEmoji : TaskKind::kStory));
  }
  CHECK(r.report.emotion_loss.back() < r.report.emotion_loss.front());
  CHECK(r.report.appraisal_loss.back() < r.report.appraisal_loss.front());
  CHECK(r.report.emoji_loss.back() < r.report.emoji_loss.front());
}

TEST_CASE("feature modes have the documented widths") {
  const ModelConfig cfg = tiny_config(8);
  const EncoderParams enc = EncoderParams::init(cfg, 1);
  ModelConfig hc = cfg;
  const HeadParams heads = HeadParams::init(hc, 2);
  const std::vector<EncodedText> texts = {EncodedText{{2, 3, 0}, 2}, EncodedText{{4, 0, 0}, 1},
                                          EncodedText{{5, 6, 7}, 3}};
  const std::size_t d = cfg.concat_dim();
  CHECK(extract_features(texts, enc, nullptr, FeatureMode::kConcat).cols() == d);
  CHECK(extract_features(texts, enc, nullptr, FeatureMode::kBowAverage).cols() == cfg.embed_dim);
  CHECK(extract_features(texts, enc, &heads, FeatureMode::kAppraisalLayer).cols() == 38);
  CHECK(extract_features(texts, enc, &heads, FeatureMode::kConcatPlusAppraisal).cols() == d + 38);
  CHECK_THROWS_AS(extract_features(texts, enc, nullptr, FeatureMode::kAppraisalLayer), ArgumentError);
  CHECK(extract_features(texts, enc, nullptr, FeatureMode::kConcat, 3) ==
        extract_features(texts, enc, nullptr, FeatureMode::kConcat, 1));
  for (auto m : {FeatureMode::kConcat, FeatureMode::kAppraisalLayer,
                 FeatureMode::kConcatPlusAppraisal, FeatureMode::kBowAverage}) {
    CHECK(parse_feature_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_feature_mode("nope"), ArgumentError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Vocab v = build_vocab(std::vector<Tokens>{{"a", "b", "c", "d"}}, 1);
  ModelConfig cfg = tiny_config(v.size());
  cfg.learning_rate = 0.1 + 1e-17;
  Checkpoint ck{cfg, v, EncoderParams::init(cfg, 4), std::nullopt};
  const auto path = std::filesystem::temp_directory_path() / "affectlab_ckpt_test.txt";
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.encoder == ck.encoder);
  CHECK(back.vocab == ck.vocab);
  CHECK(back.config.learning_rate == cfg.learning_rate);
  CHECK_FALSE(back.heads.has_value());

  HeadParams h = HeadParams::init(cfg, 5);
  h.input_mean.assign(cfg.concat_dim(), 0.25);
  h.input_scale.assign(cfg.concat_dim(), 3.0);
  h.target_mean.assign(38, -1.0 / 3.0);
  h.target_sd.assign(38, 2.0);
  ck.heads = h;
  save_checkpoint(ck, path);
  back = load_checkpoint(path);
  REQUIRE(back.heads.has_value());
  CHECK(*back.heads == h);

  {
    std::ofstream(path) << "something else\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}
