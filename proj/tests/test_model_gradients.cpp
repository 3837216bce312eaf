#include <string>
#include <vector>

#include "affectlab/model.hpp"
#include "affectlab/random.hpp"
#include "doctest.h"

using namespace affectlab;

namespace {

ModelConfig micro_config() {
  ModelConfig c;
  c.vocab_size = 7;
  c.embed_dim = 2;
  c.lstm_hidden = 2;
  c.n_appraisals = 3;
  c.n_emotions = 4;
  c.n_emojis = 5;
  c.max_len = 6;
  return c;
}

std::vector<EncodedText> micro_texts() {
  return {EncodedText{{2, 3, 4, 0, 0, 0}, 3}, EncodedText{{5, 2, 6, 6, 3, 0}, 5},
          EncodedText{{4, 0, 0, 0, 0, 0}, 1}};
}

// Weights a few times the init range: away from both the linear regime and
// saturation, where some gradient entries shrink to roundoff size.
void scale_up(std::vector<Matrix*> blocks, double factor) {
  for (Matrix* m : blocks)
    for (double& v : m->values()) v *= factor;
}

}  // namespace

TEST_CASE("pretraining loss gradient is exact for every encoder block") {
  const ModelConfig cfg = micro_config();
  EncoderParams enc = EncoderParams::init(cfg, 11);
  scale_up(enc.blocks(), 3.0);
  AffineParams head = AffineParams::zeros(cfg.n_emojis, cfg.concat_dim());
  Rng rng(5);
  for (double& v : head.weights.values()) v = rng.uniform(-1.0, 1.0);
  for (double& v : head.bias.values()) v = rng.uniform(-1.0, 1.0);
  const auto texts = micro_texts();
  const std::vector<int> labels = {1, 4, 0};

  auto params = enc.blocks();
  params.push_back(&head.weights);
  params.push_back(&head.bias);
  auto names = EncoderParams::block_names();
  names.push_back("emoji_head.weights");
  names.push_back("emoji_head.bias");

  const LossWithGradient loss = [&](std::vector<Matrix>* grads) {
    if (!grads) return pretrain_batch_loss(enc, head, texts, labels, nullptr, nullptr);
    EncoderParams eg = EncoderParams::zeros(cfg.vocab_size, cfg.embed_dim, cfg.lstm_hidden);
    AffineParams hg = AffineParams::zeros(cfg.n_emojis, cfg.concat_dim());
    const double l = pretrain_batch_loss(enc, head, texts, labels, &eg, &hg);
    auto gb = eg.blocks();
    gb.push_back(&hg.weights);
    gb.push_back(&hg.bias);
    for (std::size_t i = 0; i < gb.size(); ++i) (*grads)[i] = *gb[i];
    return l;
  };

  for (std::size_t b = 0; b < params.size(); ++b) {
    CAPTURE(names[b]);
    Matrix* one[] = {params[b]};
    const LossWithGradient block_loss = [&](std::vector<Matrix>* grads) {
      if (!grads) return loss(nullptr);
      std::vector<Matrix> all;
      for (Matrix* p : params) all.emplace_back(p->rows(), p->cols());
      const double l = loss(&all);
      (*grads)[0] = all[b];
      return l;
    };
    const auto report = grad_check(block_loss, one, 1e-5, 1e-4);
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("story and emoji losses have exact head gradients") {
  ModelConfig cfg = micro_config();
  const std::size_t d = 4;
  HeadParams heads = HeadParams::zeros(d, cfg.n_appraisals, cfg.n_emotions, cfg.n_emojis);
  Rng rng(9);
  for (Matrix* m : heads.blocks())
    for (double& v : m->values()) v = rng.uniform(-0.8, 0.8);
  heads.input_mean = {0.1, -0.2, 0.0, 0.3};
  heads.input_scale = {1.5, 0.5, 1.0, 2.0};
  Matrix reps(3, d), targets(3, cfg.n_appraisals);
  for (double& v : reps.values()) v = rng.normal();
  for (double& v : targets.values()) v = rng.normal();
  const std::vector<int> emotions = {0, 3, 2};
  const std::vector<int> emojis = {4, 1, 1};

  auto params = heads.blocks();
  const auto names = HeadParams::block_names();
  auto run = [&](bool story) {
    return LossWithGradient([&, story](std::vector<Matrix>* grads) {
      HeadParams* g = nullptr;
      HeadParams tmp;
      if (grads) {
        tmp = HeadParams::zeros(d, cfg.n_appraisals, cfg.n_emotions, cfg.n_emojis);
        g = &tmp;
      }
      const double l = story ? story_batch_loss(heads, reps, targets, emotions, 0.7, g)
                             : emoji_batch_loss(heads, reps, emojis, g);
      if (grads) {
        auto gb = tmp.blocks();
        for (std::size_t i = 0; i < gb.size(); ++i) (*grads)[i] = *gb[i];
      }
      return l;
    });
  };
  SUBCASE("story batch") {
    const auto report = grad_check(run(true), params, 1e-5, 1e-4);
    CAPTURE(names[0]);
    CHECK(report.passed);
  }
  SUBCASE("emoji batch") {
    const auto report = grad_check(run(false), params, 1e-5, 1e-4);
    CHECK(report.passed);
  }
}

TEST_CASE("grad_check rejects a doubled gradient") {
  Matrix w(1, 3);
  w[0] = 0.3;
  w[1] = -0.7;
  w[2] = 0.2;
  const std::vector<double> x = {1.0, 2.0, -1.0};
  const LossWithGradient loss = [&](std::vector<Matrix>* grads) {
    std::vector<double> logits = {dot(w.row(0), x), 0.0};
    const double l = cross_entropy(softmax(logits), 0);
    if (grads) {
      const double p0 = softmax(logits)[0];
      for (std::size_t i = 0; i < 3; ++i) (*grads)[0][i] = 2.0 * (p0 - 1.0) * x[i];
    }
    return l;
  };
  Matrix* params[] = {&w};
  CHECK_FALSE(grad_check(loss, params, 1e-5, 1e-4).passed);
}
