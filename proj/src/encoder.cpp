// Embedding + two bidirectional LSTM layers with mean pooling, and the
// emoji pretraining loop that trains them.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affectlab/errors.hpp"
#include "affectlab/model.hpp"
#include "affectlab/parallel.hpp"
#include "affectlab/random.hpp"

namespace affectlab {

namespace {

constexpr double kPretrainScaleFloor = 0.02;

enum : std::uint64_t { kStreamEncoderInit = 101, kStreamPretrainHead, kStreamPretrainOrder };

void fill_uniform(Matrix& m, Rng& rng) {
  for (double& v : m.values()) v = rng.uniform(-0.1, 0.1);
}

LstmParams make_lstm(std::size_t input, std::size_t hidden, Rng* rng) {
  LstmParams p{Matrix(4 * hidden, input + hidden), Matrix(1, 4 * hidden)};
  if (rng) {
    fill_uniform(p.weights, *rng);
    fill_uniform(p.bias, *rng);
    for (std::size_t h = 0; h < hidden; ++h) p.bias[hidden + h] = 1.0;  // forget gate
  }
  return p;
}

// Activations of one LSTM direction, indexed by sequence position.
struct DirectionTrace {
  std::vector<double> gates;  // n x 4H: i, f, o, g (post-activation)
  std::vector<double> cell;   // n x H
  std::vector<double> cell_tanh;
  std::vector<double> hidden;  // n x H
};

void run_direction(const LstmParams& p, const std::vector<double>& inputs, std::size_t n,
                   bool reverse, DirectionTrace& tr) {
  const std::size_t hid = p.hidden();
  const std::size_t in = p.input_dim();
  tr.gates.assign(n * 4 * hid, 0.0);
  tr.cell.assign(n * hid, 0.0);
  tr.cell_tanh.assign(n * hid, 0.0);
  tr.hidden.assign(n * hid, 0.0);

  std::vector<double> xh(in + hid, 0.0);
  std::vector<double> c_prev(hid, 0.0);
  std::vector<double> z(4 * hid);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(t * in), in, xh.begin());
    affine(p.weights, p.bias.values(), xh, z);
    double* g = tr.gates.data() + t * 4 * hid;
    double* c = tr.cell.data() + t * hid;
    double* tc = tr.cell_tanh.data() + t * hid;
    double* h = tr.hidden.data() + t * hid;
    for (std::size_t k = 0; k < hid; ++k) {
      const double ig = sigmoid(z[k]);
      const double fg = sigmoid(z[hid + k]);
      const double og = sigmoid(z[2 * hid + k]);
      const double cand = std::tanh(z[3 * hid + k]);
      g[k] = ig;
      g[hid + k] = fg;
      g[2 * hid + k] = og;
      g[3 * hid + k] = cand;
      c[k] = fg * c_prev[k] + ig * cand;
      tc[k] = std::tanh(c[k]);
      h[k] = og * tc[k];
    }
    std::copy_n(c, hid, c_prev.begin());
    std::copy_n(h, hid, xh.begin() + static_cast<std::ptrdiff_t>(in));
  }
}

// Backpropagation through time for one direction. `d_hidden` is the external
// gradient on each position's output (n x H); input gradients are added to
// `d_inputs` (n x input).
void backprop_direction(const LstmParams& p, const std::vector<double>& inputs, std::size_t n,
                        bool reverse, const DirectionTrace& tr,
                        const std::vector<double>& d_hidden, LstmParams& grads,
                        std::vector<double>& d_inputs) {
  const std::size_t hid = p.hidden();
  const std::size_t in = p.input_dim();
  std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0);
  std::vector<double> dz(4 * hid), xh(in + hid), dxh(in + hid);
  for (std::size_t s = n; s-- > 0;) {
    const std::size_t t = reverse ? n - 1 - s : s;
    const bool has_prev = s > 0;
    const std::size_t tp = reverse ? t + 1 : t - 1;

    const double* g = tr.gates.data() + t * 4 * hid;
    const double* tc = tr.cell_tanh.data() + t * hid;
    const double* dh_ext = d_hidden.data() + t * hid;
    for (std::size_t k = 0; k < hid; ++k) {
      const double ig = g[k], fg = g[hid + k], og = g[2 * hid + k], cand = g[3 * hid + k];
      const double c_prev = has_prev ? tr.cell[tp * hid + k] : 0.0;
      const double dh = dh_ext[k] + dh_next[k];
      const double d_out = dh * tc[k];
      const double dc = dh * og * (1.0 - tc[k] * tc[k]) + dc_next[k];
      dz[k] = dc * cand * ig * (1.0 - ig);
      dz[hid + k] = dc * c_prev * fg * (1.0 - fg);
      dz[2 * hid + k] = d_out * og * (1.0 - og);
      dz[3 * hid + k] = dc * ig * (1.0 - cand * cand);
      dc_next[k] = dc * fg;
    }

    std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(t * in), in, xh.begin());
    for (std::size_t k = 0; k < hid; ++k) xh[in + k] = has_prev ? tr.hidden[tp * hid + k] : 0.0;
    add_outer(grads.weights, dz, xh);
    for (std::size_t k = 0; k < 4 * hid; ++k) grads.bias[k] += dz[k];

    std::fill(dxh.begin(), dxh.end(), 0.0);
    add_transposed_product(p.weights, dz, dxh);
    for (std::size_t k = 0; k < in; ++k) d_inputs[t * in + k] += dxh[k];
    for (std::size_t k = 0; k < hid; ++k) dh_next[k] = dxh[in + k];
  }
}

struct EncoderTrace {
  std::vector<std::int32_t> tokens;
  std::vector<double> embedded;  // n x E
  DirectionTrace l1f, l1b;
  std::vector<double> layer2_in;  // n x (E + 2H)
  DirectionTrace l2f, l2b;
  ConcatRepresentation rep;
};

std::vector<std::int32_t> content_tokens(const EncodedText& text, std::size_t vocab_size) {
  std::vector<std::int32_t> tokens;
  tokens.reserve(text.ids.size());
  for (std::int32_t id : text.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(vocab_size));
    }
    if (id != kPadId) tokens.push_back(id);
  }
  if (tokens.empty()) throw ArgumentError("encoder_forward: input has no non-PAD tokens");
  return tokens;
}

void mean_pool(const std::vector<double>& rows, std::size_t n, std::size_t width,
               std::size_t stride, std::size_t offset, double* out) {
  std::fill(out, out + width, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double* r = rows.data() + t * stride + offset;
    for (std::size_t k = 0; k < width; ++k) out[k] += r[k];
  }
  for (std::size_t k = 0; k < width; ++k) out[k] /= static_cast<double>(n);
}

EncoderTrace forward_trace(const EncodedText& text, const EncoderParams& p) {
  EncoderTrace tr;
  tr.tokens = content_tokens(text, p.embedding.rows());
  const std::size_t n = tr.tokens.size();
  const std::size_t e = p.embed_dim();
  const std::size_t h = p.hidden();

  tr.embedded.resize(n * e);
  for (std::size_t t = 0; t < n; ++t) {
    auto row = p.embedding.row(static_cast<std::size_t>(tr.tokens[t]));
    std::copy(row.begin(), row.end(), tr.embedded.begin() + static_cast<std::ptrdiff_t>(t * e));
  }

  run_direction(p.layer1.forward, tr.embedded, n, false, tr.l1f);
  run_direction(p.layer1.backward, tr.embedded, n, true, tr.l1b);

  const std::size_t in2 = e + 2 * h;
  tr.layer2_in.resize(n * in2);
  for (std::size_t t = 0; t < n; ++t) {
    double* dst = tr.layer2_in.data() + t * in2;
    std::copy_n(tr.embedded.data() + t * e, e, dst);
    std::copy_n(tr.l1f.hidden.data() + t * h, h, dst + e);
    std::copy_n(tr.l1b.hidden.data() + t * h, h, dst + e + h);
  }
  run_direction(p.layer2.forward, tr.layer2_in, n, false, tr.l2f);
  run_direction(p.layer2.backward, tr.layer2_in, n, true, tr.l2b);

  tr.rep.assign(p.concat_dim(), 0.0);
  double* out = tr.rep.data();
  mean_pool(tr.embedded, n, e, e, 0, out);
  mean_pool(tr.l1f.hidden, n, h, h, 0, out + e);
  mean_pool(tr.l1b.hidden, n, h, h, 0, out + e + h);
  mean_pool(tr.l2f.hidden, n, h, h, 0, out + e + 2 * h);
  mean_pool(tr.l2b.hidden, n, h, h, 0, out + e + 3 * h);
  return tr;
}

void backward_trace(const EncoderTrace& tr, const EncoderParams& p, std::span<const double> d_rep,
                    EncoderParams& grads) {
  const std::size_t n = tr.tokens.size();
  const std::size_t e = p.embed_dim();
  const std::size_t h = p.hidden();
  const std::size_t in2 = e + 2 * h;
  const double inv_n = 1.0 / static_cast<double>(n);

  // Pooling spreads each pooled gradient evenly over positions.
  auto spread = [&](std::size_t offset) {
    std::vector<double> d(n * h);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < h; ++k) d[t * h + k] = d_rep[offset + k] * inv_n;
    return d;
  };

  std::vector<double> d_in2(n * in2, 0.0);
  backprop_direction(p.layer2.forward, tr.layer2_in, n, false, tr.l2f, spread(e + 2 * h),
                     grads.layer2.forward, d_in2);
  backprop_direction(p.layer2.backward, tr.layer2_in, n, true, tr.l2b, spread(e + 3 * h),
                     grads.layer2.backward, d_in2);

  std::vector<double> d_l1f = spread(e), d_l1b = spread(e + h);
  std::vector<double> d_emb(n * e);
  for (std::size_t t = 0; t < n; ++t) {
    const double* src = d_in2.data() + t * in2;
    for (std::size_t k = 0; k < e; ++k) d_emb[t * e + k] = d_rep[k] * inv_n + src[k];
    for (std::size_t k = 0; k < h; ++k) {
      d_l1f[t * h + k] += src[e + k];
      d_l1b[t * h + k] += src[e + h + k];
    }
  }
  backprop_direction(p.layer1.forward, tr.embedded, n, false, tr.l1f, d_l1f, grads.layer1.forward,
                     d_emb);
  backprop_direction(p.layer1.backward, tr.embedded, n, true, tr.l1b, d_l1b, grads.layer1.backward,
                     d_emb);

  for (std::size_t t = 0; t < n; ++t) {
    auto row = grads.embedding.row(static_cast<std::size_t>(tr.tokens[t]));
    for (std::size_t k = 0; k < e; ++k) row[k] += d_emb[t * e + k];
  }
}

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, double lr) {
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b]->values();
    auto g = grads[b]->values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("model config: " + m); };
  if (vocab_size < 3) fail("vocab_size must be at least 3 (PAD, UNK and one token)");
  if (embed_dim < 1 || lstm_hidden < 1 || n_appraisals < 1 || n_emotions < 2 || n_emojis < 2) {
    fail("dimensions must be >= 1 (>= 2 for class counts)");
  }
  if (max_len < 1 || batch_size < 1 || min_count < 1) fail("max_len, batch_size and min_count must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(appraisal_weight >= 0.0) || !std::isfinite(appraisal_weight)) fail("appraisal_weight must be >= 0");
}

EncoderParams EncoderParams::zeros(std::size_t vocab_size, std::size_t embed_dim, std::size_t hidden) {
  EncoderParams p;
  p.embedding = Matrix(vocab_size, embed_dim);
  p.layer1 = {make_lstm(embed_dim, hidden, nullptr), make_lstm(embed_dim, hidden, nullptr)};
  p.layer2 = {make_lstm(embed_dim + 2 * hidden, hidden, nullptr),
              make_lstm(embed_dim + 2 * hidden, hidden, nullptr)};
  return p;
}

EncoderParams EncoderParams::init(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  EncoderParams p;
  p.embedding = Matrix(config.vocab_size, config.embed_dim);
  fill_uniform(p.embedding, rng);
  const std::size_t e = config.embed_dim, h = config.lstm_hidden;
  p.layer1.forward = make_lstm(e, h, &rng);
  p.layer1.backward = make_lstm(e, h, &rng);
  p.layer2.forward = make_lstm(e + 2 * h, h, &rng);
  p.layer2.backward = make_lstm(e + 2 * h, h, &rng);
  return p;
}

std::vector<Matrix*> EncoderParams::blocks() {
  return {&embedding,
          &layer1.forward.weights,  &layer1.forward.bias,
          &layer1.backward.weights, &layer1.backward.bias,
          &layer2.forward.weights,  &layer2.forward.bias,
          &layer2.backward.weights, &layer2.backward.bias};
}

std::vector<const Matrix*> EncoderParams::blocks() const {
  auto mut = const_cast<EncoderParams*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> EncoderParams::block_names() {
  return {"embedding",
          "lstm1.fwd.weights", "lstm1.fwd.bias", "lstm1.bwd.weights", "lstm1.bwd.bias",
          "lstm2.fwd.weights", "lstm2.fwd.bias", "lstm2.bwd.weights", "lstm2.bwd.bias"};
}

std::uint64_t EncoderParams::checksum() const {
  const auto b = blocks();
  return affectlab::checksum(b);
}

AffineParams AffineParams::zeros(std::size_t out, std::size_t in) {
  return {Matrix(out, in), Matrix(1, out)};
}

void AffineParams::forward(std::span<const double> x, std::span<double> y) const {
  if (x.size() != weights.cols() || y.size() != weights.rows()) {
    throw ArgumentError("affine layer: expected input " + std::to_string(weights.cols()) +
                        ", got " + std::to_string(x.size()));
  }
  affine(weights, bias.values(), x, y);
}

ConcatRepresentation encoder_forward(const EncodedText& text, const EncoderParams& params) {
  return forward_trace(text, params).rep;
}

double pretrain_batch_loss(const EncoderParams& encoder, const AffineParams& head,
                           std::span<const EncodedText> texts, std::span<const int> emojis,
                           EncoderParams* encoder_grads, AffineParams* head_grads) {
  if (texts.size() != emojis.size() || texts.empty()) {
    throw ArgumentError("pretrain_batch_loss: need equal, nonzero numbers of texts and labels");
  }
  const double inv_b = 1.0 / static_cast<double>(texts.size());
  const std::size_t classes = head.weights.rows();
  std::vector<double> logits(classes), d_rep(encoder.concat_dim());
  double total = 0.0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const EncoderTrace tr = forward_trace(texts[i], encoder);
    head.forward(tr.rep, logits);
    auto probs = softmax(logits);
    const auto target = static_cast<std::size_t>(emojis[i]);
    total += cross_entropy(probs, target);
    if (!encoder_grads && !head_grads) continue;

    probs[target] -= 1.0;
    for (double& v : probs) v *= inv_b;
    if (head_grads) {
      add_outer(head_grads->weights, probs, tr.rep);
      for (std::size_t c = 0; c < classes; ++c) head_grads->bias[c] += probs[c];
    }
    if (encoder_grads) {
      std::fill(d_rep.begin(), d_rep.end(), 0.0);
      add_transposed_product(head.weights, probs, d_rep);
      backward_trace(tr, encoder, d_rep, *encoder_grads);
    }
  }
  return total * inv_b;
}

PretrainResult pretrain_emoji(std::span<const TweetExample> tweets, const Vocab& vocab,
                              ModelConfig config) {
  config.vocab_size = vocab.size();
  config.validate();
  if (tweets.empty()) throw DataError("pretrain_emoji: no tweets");
  for (const auto& t : tweets) {
    if (t.emoji < 0 || static_cast<std::size_t>(t.emoji) >= config.n_emojis) {
      throw DataError("tweet '" + t.id + "': emoji label " + std::to_string(t.emoji) +
                      " outside [0, " + std::to_string(config.n_emojis) + ")");
    }
  }
  const auto texts = encode_texts(tweets, vocab, config.max_len);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].content_length() == 0) throw DataError("tweet '" + tweets[i].id + "': no tokens");
  }

  PretrainResult result;
  result.encoder = EncoderParams::init(config, derive_seed(config.seed, kStreamEncoderInit));
  {
    Rng rng(derive_seed(config.seed, kStreamPretrainHead));
    result.emoji_head = AffineParams::zeros(config.n_emojis, config.concat_dim());
    fill_uniform(result.emoji_head.weights, rng);
    fill_uniform(result.emoji_head.bias, rng);
  }
  result.report.seed = config.seed;

  // The temporary head is trained in standardized coordinates; column
  // statistics of the tweet representations are refreshed every epoch and held
  // fixed within it. Scales are floored because early Concat columns are
  // nearly constant and dividing by their spread makes the first steps blow up. `emoji_head` is the same map folded back onto raw Concat.
  AffineParams std_head = result.emoji_head;
  std::vector<double> mean(config.concat_dim(), 0.0), scale(config.concat_dim(), 1.0);
  auto fold = [&] {
    AffineParams h = std_head;
    for (std::size_t r = 0; r < h.weights.rows(); ++r) {
      for (std::size_t c = 0; c < h.weights.cols(); ++c) {
        h.weights(r, c) = std_head.weights(r, c) / scale[c];
        h.bias[r] -= h.weights(r, c) * mean[c];
      }
    }
    return h;
  };

  EncoderParams enc_grads = EncoderParams::zeros(config.vocab_size, config.embed_dim, config.lstm_hidden);
  AffineParams head_grads = AffineParams::zeros(config.n_emojis, config.concat_dim());
  auto params = result.encoder.blocks();
  params.push_back(&std_head.weights);
  params.push_back(&std_head.bias);
  auto grads_mut = enc_grads.blocks();
  grads_mut.push_back(&head_grads.weights);
  grads_mut.push_back(&head_grads.bias);
  const std::vector<const Matrix*> grads(grads_mut.begin(), grads_mut.end());

  Rng order_rng(derive_seed(config.seed, kStreamPretrainOrder));
  std::vector<std::size_t> order(texts.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EncodedText> batch_texts;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    column_stats(encode_all(texts, result.encoder), mean, scale);
    for (double& v : scale) v = std::max(v, kPretrainScaleFloor);
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_texts.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_texts.push_back(texts[order[k]]);
        batch_labels.push_back(tweets[order[k]].emoji);
      }
      for (Matrix* g : grads_mut) g->fill(0.0);
      const double loss = pretrain_batch_loss(result.encoder, fold(), batch_texts, batch_labels,
                                              &enc_grads, &head_grads);
      // Chain rule from the folded head back to the standardized one.
      for (std::size_t r = 0; r < head_grads.weights.rows(); ++r) {
        for (std::size_t c = 0; c < head_grads.weights.cols(); ++c) {
          head_grads.weights(r, c) = (head_grads.weights(r, c) - head_grads.bias[r] * mean[c]) / scale[c];
        }
      }
      sgd_step(params, grads, config.learning_rate);
      epoch_loss += loss * static_cast<double>(end - start);
      result.report.schedule.push_back(TaskKind::kEmoji);
    }
    result.report.emoji_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  result.emoji_head = fold();
  result.report.snapshot = result.encoder.checksum();
  return result;
}

Matrix encode_all(std::span<const EncodedText> texts, const EncoderParams& encoder, unsigned jobs) {
  Matrix out(texts.size(), encoder.concat_dim());
  parallel_for(texts.size(), jobs, [&](std::size_t i) {
    const auto rep = encoder_forward(texts[i], encoder);
    std::copy(rep.begin(), rep.end(), out.row(i).begin());
  });
  return out;
}

std::vector<EncodedText> encode_texts(std::span<const StoryExample> stories, const Vocab& vocab,
                                      std::size_t max_len) {
  std::vector<EncodedText> out;
  out.reserve(stories.size());
  for (const auto& s : stories) out.push_back(encode(tokenize(s.text), vocab, max_len));
  return out;
}

std::vector<EncodedText> encode_texts(std::span<const TweetExample> tweets, const Vocab& vocab,
                                      std::size_t max_len) {
  std::vector<EncodedText> out;
  out.reserve(tweets.size());
  for (const auto& t : tweets) out.push_back(encode(tokenize(t.text), vocab, max_len));
  return out;
}

}  // namespace affectlab
