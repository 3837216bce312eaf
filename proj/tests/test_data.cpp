#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "affectlab/classify.hpp"
#include "affectlab/data.hpp"
#include "affectlab/errors.hpp"
#include "doctest.h"

using namespace affectlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("affectlab_data_" + name);
  fs::remove_all(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

SynthConfig small_config() {
  SynthConfig c;
  c.n_stories = 60;
  c.n_tweets = 40;
  c.n_subjects = 3;
  return c;
}

}  // namespace

TEST_CASE("emoji cell bit order, by enumeration") {
  const std::array<double, 6> example = {+1, +1, -1, +1, -1, -1};
  CHECK(emoji_cell(example) == 52);
  std::set<int> seen;
  for (int pattern = 0; pattern < 64; ++pattern) {
    std::array<double, 6> proj{};
    for (int b = 0; b < 6; ++b) proj[b] = (pattern >> (5 - b)) & 1 ? 0.5 : -0.5;
    CHECK(emoji_cell(proj) == pattern);
    seen.insert(emoji_cell(proj));
  }
  CHECK(seen.size() == 64);
}

TEST_CASE("story and tweet files round trip") {
  const SynthWorld w = generate_synthetic(small_config());
  const fs::path dir = scratch("roundtrip");
  fs::create_directories(dir);
  write_stories(w.stories, dir / "s.jsonl");
  write_tweets(w.tweets, dir / "t.jsonl");
  CHECK(load_stories(dir / "s.jsonl") == w.stories);
  CHECK(load_tweets(dir / "t.jsonl") == w.tweets);

  write_text(dir / "empty.jsonl", "");
  CHECK(load_stories(dir / "empty.jsonl").empty());
  CHECK(load_tweets(dir / "empty.jsonl").empty());
  fs::remove_all(dir);
}

TEST_CASE("malformed records name the line") {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  std::string short_story = R"({"id":"a","text":"x","emotion":0,"appraisals":[)";
  for (int i = 0; i < 37; ++i) short_story += (i ? ",0" : "0");
  short_story += "]}";
  write_text(dir / "s.jsonl", "\n" + short_story + "\n");
  try {
    load_stories(dir / "s.jsonl");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  write_text(dir / "t.jsonl", R"({"id":"a","text":"x","emoji":64})" "\n");
  CHECK_THROWS_AS(load_tweets(dir / "t.jsonl"), DataError);
  write_text(dir / "junk.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_tweets(dir / "junk.jsonl"), DataError);
  CHECK_THROWS_AS(load_tweets(dir / "missing.jsonl"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("neural rdm directories") {
  SynthConfig c = small_config();
  c.regions = {"A", "B"};
  const SynthWorld w = generate_synthetic(c);
  const fs::path dir = scratch("neural");
  write_neural_rdms(w.neural, dir);
  const auto sets = load_neural_rdms(dir);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].region == "A");
  CHECK(sets[1].subjects.size() == 3);
  CHECK(sets[1].subjects[2].matrix == w.neural[1].subjects[2].matrix);

  Rdm swapped = sets[0].subjects[0];
  std::swap(swapped.labels[0], swapped.labels[1]);
  write_rdm(swapped, dir / "A.s01.rdm");
  try {
    load_neural_rdms(dir);
    FAIL("expected a label mismatch");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("A.s01.rdm") != std::string::npos);
  }

  write_text(dir / "A.s01.rdm", "# rdm v1 K=2\nx,y\n0 1\n2 0\n");
  CHECK_THROWS_AS(load_neural_rdms(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic world is deterministic and well formed") {
  const SynthConfig c = small_config();
  const SynthWorld a = generate_synthetic(c);
  const SynthWorld b = generate_synthetic(c);
  CHECK(a.stories == b.stories);
  CHECK(a.tweets == b.tweets);
  CHECK(a.prototypes == b.prototypes);
  SynthConfig other = c;
  other.seed = c.seed + 1;
  CHECK_FALSE(generate_synthetic(other).stories == a.stories);

  CHECK(a.stories.size() == c.n_stories);
  CHECK(a.tweets.size() == c.n_tweets);
  CHECK(a.neural.size() == c.regions.size());
  CHECK_NOTHROW(a.appraisal_rdm.validate());
  for (const auto& set : a.neural) {
    CHECK(set.subjects.size() == c.n_subjects);
    for (const auto& r : set.subjects) CHECK_NOTHROW(r.validate());
  }
  for (const auto& t : a.tweets) {
    std::vector<double> proj(kEmojiBits, 0.0);
    CHECK(t.emoji >= 0);
    CHECK(t.emoji < 64);
  }
  SynthConfig bad = c;
  bad.noise_token_rate = 1.0;
  CHECK_THROWS_AS(generate_synthetic(bad), ArgumentError);
}

TEST_CASE("noiseless appraisals sit on their prototypes") {
  SynthConfig c = small_config();
  c.appraisal_noise_sd = 0.0;
  const SynthWorld w = generate_synthetic(c);
  for (const auto& s : w.stories) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t e = 0; e < w.prototypes.rows(); ++e) {
      const double d = squared_distance(s.appraisals, w.prototypes.row(e));
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    CHECK(best == static_cast<std::size_t>(s.emotion));
    CHECK(best_d == 0.0);
  }
}

TEST_CASE("noiseless neural rdms reproduce the prototype rdm") {
  SynthConfig c = small_config();
  c.neural_noise_sd = 0.0;
  const SynthWorld w = generate_synthetic(c);
  for (const auto& set : w.neural) {
    CHECK(group_level_rsa(w.appraisal_rdm, set).mean_tau == doctest::Approx(1.0));
  }
}

TEST_CASE("latent appraisals separate the emotions") {
  const SynthWorld w = generate_synthetic(SynthConfig{});
  Matrix x(w.stories.size(), kNumAppraisals);
  std::vector<int> y;
  for (std::size_t i = 0; i < w.stories.size(); ++i) {
    std::copy(w.stories[i].appraisals.begin(), w.stories[i].appraisals.end(), x.row(i).begin());
    y.push_back(w.stories[i].emotion);
  }
  SplitSpec spec;
  spec.n_repeats = 10;
  CHECK(evaluate_accuracy_ci(x, y, spec, 1.0).mean >= 0.9);
}

TEST_CASE("world directory layout") {
  const SynthWorld w = generate_synthetic(small_config());
  const fs::path dir = scratch("world");
  write_world(w, dir);
  CHECK(fs::exists(dir / "stories.jsonl"));
  CHECK(fs::exists(dir / "tweets.jsonl"));
  CHECK(fs::exists(dir / "truth" / "appraisal.rdm"));
  CHECK(load_neural_rdms(dir / "neural").size() == w.neural.size());
  fs::remove_all(dir);
}
