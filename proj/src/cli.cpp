#include "affectlab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "affectlab/errors.hpp"
#include "affectlab/pipeline.hpp"
#include "affectlab/random.hpp"
#include "json.hpp"

namespace affectlab {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

// Everything a subcommand may read. Flags and config-file keys land here.
struct Settings {
  std::uint64_t seed = 7;
  unsigned jobs = 1;
  SynthConfig synth;
  ModelConfig model;
  SplitSpec split;
  double svm_c = ExperimentConfig{}.svm_c;
  SvmOptions svm;
  std::string tau = "a";
  std::string group = "mean-of-subjects";

  std::string out;
  std::string stories;
  std::string tweets;
  std::string neural;
  std::string truth;
  std::string checkpoint;
  std::string features;
  std::string data;
  std::string mode = "concat";
  std::string condition = kFromText;
  bool use_synth = false;
  bool shuffle_labels = false;
};

TauVariant tau_variant(const Settings& s) {
  if (s.tau == "a") return TauVariant::kTauA;
  if (s.tau == "b") return TauVariant::kTauB;
  throw ArgumentError("--tau must be 'a' or 'b'");
}

GroupMode group_mode(const Settings& s) {
  if (s.group == "mean-of-subjects") return GroupMode::kMeanOfSubjectTaus;
  if (s.group == "mean-rdm") return GroupMode::kTauOfMeanRdm;
  throw ArgumentError("--group must be 'mean-of-subjects' or 'mean-rdm'");
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Resolved settings as ordered key/value pairs. Worker count and output
// location are left out so reports do not depend on them.
std::vector<std::pair<std::string, std::string>> resolved(const Settings& s, const std::string& cmd) {
  const ModelConfig m = seeded_model_config(s.model, s.seed);
  const SplitSpec sp = seeded_split_spec(s.split, s.seed);
  std::vector<std::pair<std::string, std::string>> kv = {
      {"command", cmd},
      {"version", kVersion},
      {"seed", std::to_string(s.seed)},
      {"model.embed_dim", std::to_string(m.embed_dim)},
      {"model.lstm_hidden", std::to_string(m.lstm_hidden)},
      {"model.max_len", std::to_string(m.max_len)},
      {"model.min_count", std::to_string(m.min_count)},
      {"model.learning_rate", real(m.learning_rate)},
      {"model.batch_size", std::to_string(m.batch_size)},
      {"model.epochs", std::to_string(m.epochs)},
      {"model.multitask_epochs", std::to_string(m.multitask_epochs)},
      {"model.appraisal_weight", real(m.appraisal_weight)},
      {"model.seed", std::to_string(m.seed)},
      {"split.per_class_test", std::to_string(sp.per_class_test)},
      {"split.n_repeats", std::to_string(sp.n_repeats)},
      {"split.seed", std::to_string(sp.seed)},
      {"svm.c", real(s.svm_c)},
      {"svm.iterations", std::to_string(s.svm.iterations)},
      {"rsa.tau", s.tau},
      {"rsa.group", s.group},
  };
  if (s.use_synth || cmd == "synth") {
    const SynthConfig& c = s.synth;
    kv.insert(kv.end(), {{"synth.n_stories", std::to_string(c.n_stories)},
                         {"synth.n_tweets", std::to_string(c.n_tweets)},
                         {"synth.vocab_size_signal", std::to_string(c.vocab_size_signal)},
                         {"synth.noise_vocab", std::to_string(c.noise_vocab)},
                         {"synth.noise_token_rate", real(c.noise_token_rate)},
                         {"synth.signal_scale", real(c.signal_scale)},
                         {"synth.signal_gain", real(c.signal_gain)},
                         {"synth.appraisal_noise_sd", real(c.appraisal_noise_sd)},
                         {"synth.tweet_spread_sd", real(c.tweet_spread_sd)},
                         {"synth.n_subjects", std::to_string(c.n_subjects)},
                         {"synth.neural_noise_sd", real(c.neural_noise_sd)},
                         {"synth.seed", std::to_string(s.seed)}});
  } else {
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"input.data", s.data}, {"input.stories", s.stories}, {"input.tweets", s.tweets},
             {"input.neural", s.neural}, {"input.checkpoint", s.checkpoint},
             {"input.features", s.features}}) {
      if (!v.empty()) kv.emplace_back(k, v);
    }
  }
  if (cmd == "classify") {
    kv.emplace_back("condition", s.condition);
    kv.emplace_back("shuffle_labels", s.shuffle_labels ? "true" : "false");
  }
  if (cmd == "extract") kv.emplace_back("mode", s.mode);
  return kv;
}

std::string text_header(const Settings& s, const std::string& cmd) {
  std::string h;
  for (const auto& [k, v] : resolved(s, cmd)) h += "# " + k + " = " + v + "\n";
  return h + "#\n";
}

ordered_json json_header(const Settings& s, const std::string& cmd) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : resolved(s, cmd)) j[k] = v;
  return j;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path require_out(const Settings& s) {
  if (s.out.empty()) throw ArgumentError("--out is required");
  return s.out;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ArgumentError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw DataError(path + ": no such file or directory");
}

ordered_json accuracy_json(const AccuracyRow& row) {
  return {{"model", row.model},
          {"condition", row.condition},
          {"mean", row.report.mean},
          {"ci_half_width", row.report.ci_half_width},
          {"p05", row.report.lower},
          {"p95", row.report.upper},
          {"accuracies", row.report.accuracies}};
}

void write_table1(const Settings& s, const std::string& cmd, std::span<const AccuracyRow> rows,
                  const fs::path& dir, std::ostream& out) {
  const std::string table = format_accuracy_table(rows);
  write_file(dir / "table1.txt", text_header(s, cmd) + table);
  ordered_json j = {{"config", json_header(s, cmd)}, {"rows", ordered_json::array()}};
  for (const auto& r : rows) j["rows"].push_back(accuracy_json(r));
  write_file(dir / "table1.json", j.dump(2) + "\n");
  out << table;
}

void write_table2(const Settings& s, const std::string& cmd, const std::vector<RsaRow>& rows,
                  const fs::path& dir, std::ostream& out) {
  const std::string table = format_rsa_table(rows);
  write_file(dir / "table2.txt", text_header(s, cmd) + table);
  ordered_json j = {{"config", json_header(s, cmd)}, {"rows", ordered_json::array()}};
  for (const auto& row : rows) {
    for (const auto& r : row.regions) {
      j["rows"].push_back({{"space", row.space},
                           {"region", r.region},
                           {"mean_tau", r.mean_tau},
                           {"subject_taus", r.subject_taus}});
    }
  }
  write_file(dir / "table2.json", j.dump(2) + "\n");
  out << table;
}

void write_rdm_artifacts(const Rdm& rdm, const fs::path& stem) {
  fs::create_directories(stem.parent_path());
  write_rdm(rdm, stem.string() + ".rdm");
  write_file(stem.string() + ".txt", render_rdm_table(rdm));
  write_file(stem.string() + ".ppm", render_rdm_ppm(rdm));
}

// Feature files.

void write_features(const Matrix& x, const std::vector<std::string>& ids, const std::string& mode,
                    const fs::path& path) {
  std::string body = std::string("# ") + kFeatureFormatTag + " rows=" + std::to_string(x.rows()) +
                     " cols=" + std::to_string(x.cols()) + " mode=" + mode + "\n";
  for (std::size_t r = 0; r < x.rows(); ++r) {
    body += ids[r];
    for (double v : x.row(r)) body += " " + real(v);
    body += '\n';
  }
  write_file(path, body);
}

Matrix read_features(const fs::path& path, std::vector<std::string>& ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open feature file");
  std::string line;
  auto fail = [&](std::size_t line_no, const std::string& msg) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) fail(1, "empty feature file");
  const std::string prefix = std::string("# ") + kFeatureFormatTag + " rows=";
  if (line.rfind(prefix, 0) != 0) fail(1, std::string("expected header '") + prefix + "...'");
  std::size_t rows = 0, cols = 0;
  if (std::sscanf(line.c_str() + prefix.size(), "%zu cols=%zu", &rows, &cols) != 2) fail(1, "bad header");
  Matrix x(rows, cols);
  ids.clear();
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) fail(r + 2, "expected " + std::to_string(rows) + " rows");
    std::istringstream row(line);
    std::string id;
    row >> id;
    ids.push_back(id);
    for (std::size_t c = 0; c < cols; ++c) {
      std::string tok;
      if (!(row >> tok)) fail(r + 2, "expected " + std::to_string(cols) + " values");
      try {
        std::size_t used = 0;
        x(r, c) = std::stod(tok, &used);
        if (used != tok.size()) fail(r + 2, "bad number '" + tok + "'");
      } catch (const std::logic_error&) {
        fail(r + 2, "bad number '" + tok + "'");
      }
    }
    std::string extra;
    if (row >> extra) fail(r + 2, "too many values");
  }
  return x;
}

Matrix ratings_of(std::span<const StoryExample> stories) {
  Matrix m(stories.size(), kNumAppraisals);
  for (std::size_t i = 0; i < stories.size(); ++i) {
    std::copy(stories[i].appraisals.begin(), stories[i].appraisals.end(), m.row(i).begin());
  }
  return m;
}

std::vector<std::string> story_ids(std::span<const StoryExample> stories) {
  std::vector<std::string> ids;
  for (const auto& s : stories) ids.push_back(s.id);
  return ids;
}

void check_alignment(const std::vector<std::string>& feature_ids, std::span<const StoryExample> stories,
                     const std::string& feature_path) {
  if (feature_ids.size() != stories.size()) {
    throw DataError(feature_path + ": " + std::to_string(feature_ids.size()) + " rows but " +
                    std::to_string(stories.size()) + " stories");
  }
  for (std::size_t i = 0; i < stories.size(); ++i) {
    if (feature_ids[i] != stories[i].id) {
      throw DataError(feature_path + ": row " + std::to_string(i + 1) + " has id '" + feature_ids[i] +
                      "' but story is '" + stories[i].id + "'");
    }
  }
}

std::vector<std::string> emotion_names_for(std::size_t k) {
  if (k == kNumEmotions) return default_emotion_names();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back("emotion" + std::to_string(i));
  return names;
}

Vocab corpus_vocab(std::span<const TweetExample> tweets, std::span<const StoryExample> stories,
                   std::size_t min_count) {
  std::vector<Tokens> corpus;
  for (const auto& t : tweets) corpus.push_back(tokenize(t.text));
  for (const auto& s : stories) corpus.push_back(tokenize(s.text));
  return build_vocab(corpus, min_count);
}

// Subcommands.

void cmd_synth(const Settings& s, std::ostream& out) {
  SynthConfig c = s.synth;
  c.seed = s.seed;
  const SynthWorld w = generate_synthetic(c);
  const fs::path dir = require_out(s);
  write_world(w, dir);
  write_file(dir / "config.txt", text_header(s, "synth"));
  out << "wrote " << w.stories.size() << " stories, " << w.tweets.size() << " tweets, "
      << w.neural.size() << " regions to " << dir.string() << "\n";
}

void cmd_pretrain(const Settings& s, std::ostream& out) {
  require_file(s.tweets, "--tweets");
  const auto tweets = load_tweets(s.tweets);
  std::vector<StoryExample> stories;
  if (!s.stories.empty()) {
    require_file(s.stories, "--stories");
    stories = load_stories(s.stories);
  }
  Checkpoint ck;
  ck.config = seeded_model_config(s.model, s.seed);
  ck.vocab = corpus_vocab(tweets, stories, ck.config.min_count);
  ck.config.vocab_size = ck.vocab.size();
  auto pre = pretrain_emoji(tweets, ck.vocab, ck.config);
  ck.encoder = std::move(pre.encoder);
  const fs::path path = require_out(s);
  save_checkpoint(ck, path);
  out << "pretrained on " << tweets.size() << " tweets; emoji loss";
  for (double l : pre.report.emoji_loss) out << ' ' << real(l).substr(0, 6);
  out << "\nwrote " << path.string() << "\n";
}

void cmd_multitask(const Settings& s, std::ostream& out) {
  require_file(s.checkpoint, "--checkpoint");
  require_file(s.stories, "--stories");
  require_file(s.tweets, "--tweets");
  Checkpoint ck = load_checkpoint(s.checkpoint);
  const auto stories = load_stories(s.stories);
  const auto tweets = load_tweets(s.tweets);
  ModelConfig cfg = ck.config;
  cfg.multitask_epochs = s.model.multitask_epochs;
  cfg.learning_rate = s.model.learning_rate;
  cfg.appraisal_weight = s.model.appraisal_weight;
  cfg.batch_size = s.model.batch_size;
  cfg.seed = seeded_model_config(s.model, s.seed).seed;
  auto mt = multitask_train(ck.encoder, stories, tweets, ck.vocab, cfg);
  ck.heads = std::move(mt.heads);
  const fs::path path = require_out(s);
  save_checkpoint(ck, path);
  out << "trained heads for " << mt.report.schedule.size() << " alternating steps\nwrote "
      << path.string() << "\n";
}

void cmd_extract(const Settings& s, std::ostream& out) {
  require_file(s.checkpoint, "--checkpoint");
  require_file(s.stories, "--stories");
  const Checkpoint ck = load_checkpoint(s.checkpoint);
  const auto stories = load_stories(s.stories);
  const FeatureMode mode = parse_feature_mode(s.mode);
  const auto texts = encode_texts(stories, ck.vocab, ck.config.max_len);
  const Matrix x = extract_features(texts, ck.encoder, ck.heads ? &*ck.heads : nullptr, mode, s.jobs);
  const fs::path path = require_out(s);
  write_features(x, story_ids(stories), to_string(mode), path);
  out << "wrote " << x.rows() << " x " << x.cols() << " " << to_string(mode) << " features to "
      << path.string() << "\n";
}

void cmd_classify(const Settings& s, std::ostream& out) {
  require_file(s.features, "--features");
  require_file(s.stories, "--stories");
  if (s.condition != kWithAppraisals && s.condition != kFromText) {
    throw ArgumentError("--condition must be 'with-appraisals' or 'from-text'");
  }
  std::vector<std::string> ids;
  Matrix x = read_features(s.features, ids);
  const auto stories = load_stories(s.stories);
  check_alignment(ids, stories, s.features);
  if (s.condition == kWithAppraisals) x = hconcat(x, ratings_of(stories));
  std::vector<int> labels;
  for (const auto& st : stories) labels.push_back(st.emotion);
  const SplitSpec spec = seeded_split_spec(s.split, s.seed);
  if (s.shuffle_labels) {
    Rng rng(derive_seed(spec.seed, 1003));
    rng.shuffle(std::span<int>(labels));
  }
  const AccuracyRow row{fs::path(s.features).stem().string(), s.condition,
                        evaluate_accuracy_ci(x, labels, spec, s.svm_c, s.jobs, s.svm)};
  const fs::path dir = require_out(s);
  write_table1(s, "classify", std::span<const AccuracyRow>(&row, 1), dir, out);
}

void cmd_rsa(const Settings& s, std::ostream& out) {
  require_file(s.features, "--features");
  require_file(s.stories, "--stories");
  require_file(s.neural, "--neural");
  std::vector<std::string> ids;
  const Matrix x = read_features(s.features, ids);
  const auto stories = load_stories(s.stories);
  check_alignment(ids, stories, s.features);
  std::vector<int> labels;
  for (const auto& st : stories) labels.push_back(st.emotion);
  std::vector<NeuralRdmSet> neural = load_neural_rdms(s.neural);
  if (neural.empty()) throw DataError(s.neural + ": no .rdm files");
  const std::size_t k = neural.front().subjects.front().size();
  const Rdm rdm = compute_rdm(emotion_centroids(x, labels, k), neural.front().subjects.front().labels);
  add_tom_region(neural);
  RsaRow row{fs::path(s.features).stem().string(), {}};
  for (const auto& region : neural) {
    row.regions.push_back(group_level_rsa(rdm, region, tau_variant(s), group_mode(s), s.jobs));
  }
  const fs::path dir = require_out(s);
  write_rdm_artifacts(rdm, dir / "rdm" / row.space);
  write_table2(s, "rsa", {row}, dir, out);
}

ExperimentInputs load_inputs(const Settings& s) {
  ExperimentInputs in;
  if (s.use_synth) {
    SynthConfig c = s.synth;
    c.seed = s.seed;
    return inputs_from_world(generate_synthetic(c));
  }
  if (s.data.empty()) throw ArgumentError("pipeline needs --synth or --data <dir>");
  const fs::path dir = s.data;
  require_file((dir / "stories.jsonl").string(), "--data");
  require_file((dir / "tweets.jsonl").string(), "--data");
  in.stories = load_stories(dir / "stories.jsonl");
  in.tweets = load_tweets(dir / "tweets.jsonl");
  if (fs::is_directory(dir / "neural")) in.neural = load_neural_rdms(dir / "neural");
  if (fs::exists(dir / "truth" / "appraisal.rdm")) in.truth_rdm = read_rdm(dir / "truth" / "appraisal.rdm");
  in.emotion_names = in.neural.empty() ? emotion_names_for(kNumEmotions)
                                       : in.neural.front().subjects.front().labels;
  return in;
}

void cmd_pipeline(const Settings& s, std::ostream& out) {
  const fs::path dir = require_out(s);
  const ExperimentInputs inputs = load_inputs(s);
  ExperimentConfig ec;
  ec.model = seeded_model_config(s.model, s.seed);
  ec.split = seeded_split_spec(s.split, s.seed);
  ec.svm_c = s.svm_c;
  ec.svm = s.svm;
  ec.tau = tau_variant(s);
  ec.group = group_mode(s);
  ec.jobs = s.jobs;
  const ExperimentResult r = run_experiment(inputs, ec);

  out << "Table 1 (emotion classification accuracy)\n";
  write_table1(s, "pipeline", r.table1, dir, out);
  out << "\nTable 2 (group-level Kendall tau with neural RDMs)\n";
  write_table2(s, "pipeline", r.table2, dir, out);

  for (const auto& [name, rdm] : r.feature_rdms) write_rdm_artifacts(rdm, dir / "rdm" / name);
  save_checkpoint(r.checkpoint, dir / "model.ckpt");

  const FeatureSet fs_ = build_feature_set(inputs, r.checkpoint, s.jobs);
  const std::size_t e = r.checkpoint.config.embed_dim;
  for (FeatureMode m : {FeatureMode::kConcat, FeatureMode::kAppraisalLayer,
                        FeatureMode::kConcatPlusAppraisal, FeatureMode::kBowAverage}) {
    const Matrix x = features_from_concat(fs_.concat, e, &*r.checkpoint.heads, m);
    write_features(x, story_ids(inputs.stories), to_string(m), dir / "features" / (to_string(m) + ".txt"));
  }

  ordered_json summary = {{"config", json_header(s, "pipeline")},
                          {"pretrain_emoji_loss", r.pretrain_report.emoji_loss},
                          {"multitask_emotion_loss", r.multitask_report.emotion_loss},
                          {"multitask_appraisal_loss", r.multitask_report.appraisal_loss},
                          {"multitask_emoji_loss", r.multitask_report.emoji_loss},
                          {"multitask_vs_appraisal_tau", r.multitask_vs_appraisal_tau}};
  if (r.multitask_vs_truth_tau) summary["multitask_vs_truth_tau"] = *r.multitask_vs_truth_tau;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  out << "\nappraisal-layer RDM vs rating RDM tau: " << real(r.multitask_vs_appraisal_tau).substr(0, 6)
      << "\n";
  if (r.multitask_vs_truth_tau) {
    out << "appraisal-layer RDM vs ground-truth RDM tau: " << real(*r.multitask_vs_truth_tau).substr(0, 6)
        << "\n";
  }
  out << "reports written to " << dir.string() << "\n";
}

// Option registration.

void add_options(CLI::App& app, Settings& s) {
  app.add_option("--seed", s.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", s.jobs, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  app.add_option("--out", s.out, "Output file or directory");

  auto* m = &s.model;
  app.add_option("--embed-dim", m->embed_dim)->capture_default_str()->group("Model");
  app.add_option("--lstm-hidden", m->lstm_hidden)->capture_default_str()->group("Model");
  app.add_option("--max-len", m->max_len)->capture_default_str()->group("Model");
  app.add_option("--min-count", m->min_count)->capture_default_str()->group("Model");
  app.add_option("--learning-rate", m->learning_rate)->capture_default_str()->group("Model");
  app.add_option("--batch-size", m->batch_size)->capture_default_str()->group("Model");
  app.add_option("--epochs", m->epochs, "Emoji pretraining epochs")->capture_default_str()->group("Model");
  app.add_option("--multitask-epochs", m->multitask_epochs)->capture_default_str()->group("Model");
  app.add_option("--appraisal-weight", m->appraisal_weight)->capture_default_str()->group("Model");

  app.add_option("--per-class-test", s.split.per_class_test)->capture_default_str()->group("Evaluation");
  app.add_option("--repeats", s.split.n_repeats)->capture_default_str()->group("Evaluation");
  app.add_option("--svm-c", s.svm_c)->capture_default_str()->group("Evaluation");
  app.add_option("--svm-iterations", s.svm.iterations)->capture_default_str()->group("Evaluation");
  app.add_option("--tau", s.tau, "Kendall tau variant: a or b")->capture_default_str()->group("Evaluation");
  app.add_option("--group", s.group, "Group RSA: mean-of-subjects or mean-rdm")
      ->capture_default_str()
      ->group("Evaluation");

  auto* c = &s.synth;
  app.add_option("--n-stories", c->n_stories)->capture_default_str()->group("Synthetic world");
  app.add_option("--n-tweets", c->n_tweets)->capture_default_str()->group("Synthetic world");
  app.add_option("--signal-tokens", c->vocab_size_signal)->capture_default_str()->group("Synthetic world");
  app.add_option("--noise-vocab", c->noise_vocab)->capture_default_str()->group("Synthetic world");
  app.add_option("--noise-token-rate", c->noise_token_rate)->capture_default_str()->group("Synthetic world");
  app.add_option("--signal-scale", c->signal_scale)->capture_default_str()->group("Synthetic world");
  app.add_option("--signal-gain", c->signal_gain)->capture_default_str()->group("Synthetic world");
  app.add_option("--appraisal-noise-sd", c->appraisal_noise_sd)->capture_default_str()->group("Synthetic world");
  app.add_option("--tweet-spread-sd", c->tweet_spread_sd)->capture_default_str()->group("Synthetic world");
  app.add_option("--n-subjects", c->n_subjects)->capture_default_str()->group("Synthetic world");
  app.add_option("--neural-noise-sd", c->neural_noise_sd)->capture_default_str()->group("Synthetic world");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Appraisal-informed emotion representations: training, evaluation and RSA."};
  app.name("affectlab");
  app.set_config("--config", "", "Read options from a file of `key = value` lines");
  app.set_version_flag("--version",
                       std::string("affectlab ") + kVersion + "\ncheckpoint format: " +
                           kCheckpointFormatTag + "\nrdm format: " + kRdmFormatTag +
                           "\nfeature format: " + kFeatureFormatTag);
  app.require_subcommand(1);
  add_options(app, s);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic world directory");
  auto* pretrain = app.add_subcommand("pretrain", "Train the encoder on emoji prediction");
  pretrain->add_option("--tweets", s.tweets, "Tweet JSONL file");
  pretrain->add_option("--stories", s.stories, "Story JSONL file (adds story words to the vocabulary)");
  auto* multitask = app.add_subcommand("multitask", "Train appraisal, emotion and emoji heads");
  multitask->add_option("--checkpoint", s.checkpoint, "Pretrained checkpoint");
  multitask->add_option("--stories", s.stories, "Story JSONL file");
  multitask->add_option("--tweets", s.tweets, "Tweet JSONL file");
  auto* extract = app.add_subcommand("extract", "Write story features");
  extract->add_option("--checkpoint", s.checkpoint, "Checkpoint");
  extract->add_option("--stories", s.stories, "Story JSONL file");
  extract->add_option("--mode", s.mode, "concat, appraisal_layer, concat_plus_appraisal or bow_average")
      ->capture_default_str();
  auto* classify = app.add_subcommand("classify", "Repeated-split SVM emotion accuracy");
  classify->add_option("--features", s.features, "Feature file from `extract`");
  classify->add_option("--stories", s.stories, "Story JSONL file (labels and ratings)");
  classify->add_option("--condition", s.condition, "with-appraisals or from-text")->capture_default_str();
  classify->add_flag("--shuffle-labels", s.shuffle_labels, "Chance control");
  auto* rsa = app.add_subcommand("rsa", "Compare a feature space with neural RDMs");
  rsa->add_option("--features", s.features, "Feature file from `extract`");
  rsa->add_option("--stories", s.stories, "Story JSONL file (labels)");
  rsa->add_option("--neural", s.neural, "Directory of <region>.<subject>.rdm files");
  auto* pipeline = app.add_subcommand("pipeline", "Run the full experiment and write both tables");
  pipeline->add_flag("--synth", s.use_synth, "Generate a synthetic world from --seed");
  pipeline->add_option("--data", s.data, "Directory with stories.jsonl, tweets.jsonl, neural/");
  for (auto* sub : {synth, pretrain, multitask, extract, classify, rsa, pipeline}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    ModelConfig check = s.model;
    check.vocab_size = 3;  // the real size is known only once a vocabulary exists
    check.validate();
    s.synth.validate();
    tau_variant(s);
    group_mode(s);
    if (synth->parsed()) cmd_synth(s, out);
    else if (pretrain->parsed()) cmd_pretrain(s, out);
    else if (multitask->parsed()) cmd_multitask(s, out);
    else if (extract->parsed()) cmd_extract(s, out);
    else if (classify->parsed()) cmd_classify(s, out);
    else if (rsa->parsed()) cmd_rsa(s, out);
    else if (pipeline->parsed()) cmd_pipeline(s, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace affectlab
