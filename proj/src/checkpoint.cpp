#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "affectlab/errors.hpp"
#include "affectlab/model.hpp"

namespace affectlab {

// Text container:
//   affectlab-ckpt-v1
//   config <key> <value>          (one line per field)
//   vocab <n>                     followed by n token lines
//   matrix <name> <rows> <cols>   followed by `rows` lines of values
//   vector <name> <n>             followed by one line of values (none if n = 0)
//   end
// Reals are printed with 17 significant digits so a reload is bit-exact.

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void put_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << real(m(r, c));
    out << '\n';
  }
}

void put_vector(std::ostream& out, const std::string& name, const std::vector<double>& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  if (v.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << real(v[i]);
  out << '\n';
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  std::string require() {
    std::string line;
    if (!next(line)) fail("unexpected end of file");
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

  std::vector<double> reals(std::size_t expected) {
    std::istringstream row(require());
    std::vector<double> out;
    std::string tok;
    while (row >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) fail("bad number '" + tok + "'");
      } catch (const std::logic_error&) {
        fail("bad number '" + tok + "'");
      }
    }
    if (out.size() != expected) {
      fail("expected " + std::to_string(expected) + " values, got " + std::to_string(out.size()));
    }
    return out;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

std::map<std::string, std::string> config_fields(const ModelConfig& c) {
  return {{"vocab_size", std::to_string(c.vocab_size)},
          {"embed_dim", std::to_string(c.embed_dim)},
          {"lstm_hidden", std::to_string(c.lstm_hidden)},
          {"n_appraisals", std::to_string(c.n_appraisals)},
          {"n_emotions", std::to_string(c.n_emotions)},
          {"n_emojis", std::to_string(c.n_emojis)},
          {"max_len", std::to_string(c.max_len)},
          {"min_count", std::to_string(c.min_count)},
          {"learning_rate", real(c.learning_rate)},
          {"batch_size", std::to_string(c.batch_size)},
          {"epochs", std::to_string(c.epochs)},
          {"multitask_epochs", std::to_string(c.multitask_epochs)},
          {"appraisal_weight", real(c.appraisal_weight)},
          {"seed", std::to_string(c.seed)}};
}

void set_config_field(ModelConfig& c, const std::string& key, const std::string& value,
                      const Reader& reader) {
  try {
    if (key == "vocab_size") c.vocab_size = std::stoull(value);
    else if (key == "embed_dim") c.embed_dim = std::stoull(value);
    else if (key == "lstm_hidden") c.lstm_hidden = std::stoull(value);
    else if (key == "n_appraisals") c.n_appraisals = std::stoull(value);
    else if (key == "n_emotions") c.n_emotions = std::stoull(value);
    else if (key == "n_emojis") c.n_emojis = std::stoull(value);
    else if (key == "max_len") c.max_len = std::stoull(value);
    else if (key == "min_count") c.min_count = std::stoull(value);
    else if (key == "learning_rate") c.learning_rate = std::stod(value);
    else if (key == "batch_size") c.batch_size = std::stoull(value);
    else if (key == "epochs") c.epochs = std::stoull(value);
    else if (key == "multitask_epochs") c.multitask_epochs = std::stoull(value);
    else if (key == "appraisal_weight") c.appraisal_weight = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else reader.fail("unknown config key '" + key + "'");
  } catch (const std::logic_error&) {
    reader.fail("bad value for config key '" + key + "'");
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << kCheckpointFormatTag << '\n';
  for (const auto& [k, v] : config_fields(ckpt.config)) out << "config " << k << ' ' << v << '\n';
  out << "vocab " << ckpt.vocab.regular_tokens().size() << '\n';
  for (const auto& t : ckpt.vocab.regular_tokens()) out << t << '\n';

  const auto enc_names = EncoderParams::block_names();
  const auto enc_blocks = ckpt.encoder.blocks();
  for (std::size_t i = 0; i < enc_blocks.size(); ++i) put_matrix(out, "encoder." + enc_names[i], *enc_blocks[i]);
  if (ckpt.heads) {
    const auto head_names = HeadParams::block_names();
    const auto head_blocks = ckpt.heads->blocks();
    for (std::size_t i = 0; i < head_blocks.size(); ++i) put_matrix(out, "heads." + head_names[i], *head_blocks[i]);
    put_vector(out, "heads.input_mean", ckpt.heads->input_mean);
    put_vector(out, "heads.input_scale", ckpt.heads->input_scale);
    put_vector(out, "heads.target_mean", ckpt.heads->target_mean);
    put_vector(out, "heads.target_sd", ckpt.heads->target_sd);
  }
  out << "end\n";
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path.string());
  Reader reader(in, path.string());
  if (reader.require() != kCheckpointFormatTag) {
    reader.fail(std::string("not a checkpoint (expected format tag ") + kCheckpointFormatTag + ")");
  }

  Checkpoint ckpt;
  std::map<std::string, Matrix> matrices;
  std::map<std::string, std::vector<double>> vectors;
  bool ended = false;
  std::string line;
  while (!ended && reader.next(line)) {
    std::istringstream head(line);
    std::string kind;
    head >> kind;
    if (kind == "config") {
      std::string key, value;
      head >> key >> value;
      set_config_field(ckpt.config, key, value, reader);
    } else if (kind == "vocab") {
      std::size_t n = 0;
      if (!(head >> n)) reader.fail("bad vocab header");
      std::vector<std::string> tokens;
      for (std::size_t i = 0; i < n; ++i) tokens.push_back(reader.require());
      ckpt.vocab = Vocab::from_tokens(std::move(tokens), ckpt.config.min_count);
    } else if (kind == "matrix") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(head >> name >> rows >> cols)) reader.fail("bad matrix header");
      Matrix m(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto vals = reader.reals(cols);
        std::copy(vals.begin(), vals.end(), m.row(r).begin());
      }
      matrices[name] = std::move(m);
    } else if (kind == "vector") {
      std::string name;
      std::size_t n = 0;
      if (!(head >> name >> n)) reader.fail("bad vector header");
      vectors[name] = n ? reader.reals(n) : std::vector<double>{};
    } else if (kind == "end") {
      ended = true;
    } else {
      reader.fail("unknown record '" + kind + "'");
    }
  }
  if (!ended) reader.fail("missing 'end' record (truncated file?)");

  auto take = [&](const std::string& name) {
    auto it = matrices.find(name);
    if (it == matrices.end()) throw DataError(path.string() + ": missing matrix " + name);
    return it->second;
  };
  const auto enc_names = EncoderParams::block_names();
  ckpt.encoder = EncoderParams::zeros(ckpt.config.vocab_size, ckpt.config.embed_dim, ckpt.config.lstm_hidden);
  auto enc_blocks = ckpt.encoder.blocks();
  for (std::size_t i = 0; i < enc_blocks.size(); ++i) {
    Matrix m = take("encoder." + enc_names[i]);
    if (m.rows() != enc_blocks[i]->rows() || m.cols() != enc_blocks[i]->cols()) {
      throw DataError(path.string() + ": matrix encoder." + enc_names[i] + " has the wrong shape");
    }
    *enc_blocks[i] = std::move(m);
  }
  if (ckpt.encoder.embedding.rows() != ckpt.vocab.size()) {
    throw DataError(path.string() + ": vocabulary size does not match the embedding");
  }
  if (matrices.contains("heads.appraisal.weights")) {
    HeadParams heads;
    const auto names = HeadParams::block_names();
    auto blocks = heads.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) *blocks[i] = take("heads." + names[i]);
    heads.input_mean = vectors["heads.input_mean"];
    heads.input_scale = vectors["heads.input_scale"];
    heads.target_mean = vectors["heads.target_mean"];
    heads.target_sd = vectors["heads.target_sd"];
    ckpt.heads = std::move(heads);
  }
  return ckpt;
}

}  // namespace affectlab
