#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "affectlab/cli.hpp"
#include "affectlab/data.hpp"
#include "affectlab/model.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace affectlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("affectlab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::vector<std::string> kTiny = {"--n-stories", "80",  "--n-tweets",         "120",
                                        "--n-subjects", "3",  "--epochs",           "1",
                                        "--multitask-epochs", "3", "--per-class-test", "1",
                                        "--repeats", "2",     "--embed-dim",        "6",
                                        "--lstm-hidden", "4", "--svm-iterations",   "50"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"synth", "--no-such-flag"}).code == kExitUsage);
  CHECK(run({"--jobs", "0", "synth"}).code == kExitUsage);
}

TEST_CASE("version lists the file format tags") {
  const auto r = run({"--version"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find(kCheckpointFormatTag) != std::string::npos);
  CHECK(r.out.find(kRdmFormatTag) != std::string::npos);
}

TEST_CASE("data errors exit with 1 and name the path") {
  const fs::path dir = fresh("missing");
  const auto r = run({"classify", "--features", (dir / "nope.txt").string(), "--stories",
                      (dir / "s.jsonl").string(), "--out", dir.string()});
  CHECK(r.code == kExitDataError);
  CHECK(r.err.find("nope.txt") != std::string::npos);
  CHECK(run({"synth", "--out", dir.string(), "--noise-token-rate", "1.5"}).code == kExitDataError);
}

TEST_CASE("subcommands chain from synth to rsa") {
  const fs::path dir = fresh("chain");
  const std::string world = (dir / "world").string();
  REQUIRE(run(with({"synth", "--out", world}, kTiny)).code == kExitOk);
  const std::string stories = world + "/stories.jsonl";
  const std::string tweets = world + "/tweets.jsonl";
  const std::string pre = (dir / "pre.ckpt").string();
  const std::string full = (dir / "full.ckpt").string();
  REQUIRE(run(with({"pretrain", "--tweets", tweets, "--stories", stories, "--out", pre}, kTiny)).code == kExitOk);
  REQUIRE(run(with({"multitask", "--checkpoint", pre, "--stories", stories, "--tweets", tweets,
                    "--out", full}, kTiny)).code == kExitOk);
  const std::string feats = (dir / "concat_plus_appraisal.txt").string();
  REQUIRE(run({"extract", "--checkpoint", full, "--stories", stories, "--mode",
               "concat_plus_appraisal", "--out", feats}).code == kExitOk);
  CHECK(slurp(feats).rfind("# features v1 rows=80 cols=", 0) == 0);
  CHECK(run({"extract", "--checkpoint", pre, "--stories", stories, "--mode", "appraisal_layer",
             "--out", feats + ".x"}).code == kExitDataError);

  for (const char* cond : {"from-text", "with-appraisals"}) {
    const auto r = run(with({"classify", "--features", feats, "--stories", stories, "--condition", cond,
                             "--out", (dir / cond).string()}, kTiny));
    CHECK(r.code == kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / cond / "table1.json"));
    CHECK(j["rows"][0]["condition"] == cond);
    CHECK(j["config"]["seed"] == "7");
  }
  CHECK(run({"classify", "--features", feats, "--stories", stories, "--condition", "sideways", "--out",
             dir.string()}).code == kExitDataError);

  const auto r = run(with({"rsa", "--features", feats, "--stories", stories, "--neural", world + "/neural",
                           "--out", (dir / "rsa").string()}, kTiny));
  CHECK(r.code == kExitOk);
  CHECK(slurp(dir / "rsa" / "table2.txt").find("ToM") != std::string::npos);
  CHECK(fs::exists(dir / "rsa" / "rdm" / "concat_plus_appraisal.ppm"));
}

TEST_CASE("rsa of the appraisal space on a noiseless world is exact") {
  const fs::path dir = fresh("noiseless");
  const std::string world = (dir / "world").string();
  REQUIRE(run(with({"synth", "--out", world, "--appraisal-noise-sd", "0", "--neural-noise-sd", "0"}, kTiny))
              .code == kExitOk);
  const auto stories = load_stories(world + "/stories.jsonl");
  {
    std::ofstream f(dir / "appraisals.txt");
    f << "# features v1 rows=" << stories.size() << " cols=38 mode=appraisals\n";
    f.precision(17);
    for (const auto& s : stories) {
      f << s.id;
      for (double v : s.appraisals) f << ' ' << v;
      f << '\n';
    }
  }
  REQUIRE(run({"rsa", "--features", (dir / "appraisals.txt").string(), "--stories",
               world + "/stories.jsonl", "--neural", world + "/neural", "--out", dir.string()}).code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "table2.json"));
  for (const auto& row : j["rows"]) CHECK(row["mean_tau"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("pipeline reports are reproducible and independent of jobs") {
  const fs::path dir = fresh("pipeline");
  const auto a = run(with({"pipeline", "--synth", "--out", (dir / "a").string()}, kTiny));
  REQUIRE(a.code == kExitOk);
  REQUIRE(run(with({"pipeline", "--synth", "--out", (dir / "b").string(), "--jobs", "3"}, kTiny)).code == kExitOk);
  for (const char* f : {"table1.txt", "table1.json", "table2.txt", "table2.json", "summary.json",
                        "model.ckpt", "rdm/multitask.rdm", "features/concat.txt"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const std::string t1 = slurp(dir / "a" / "table1.txt");
  CHECK(t1.find("# seed = 7") != std::string::npos);
  CHECK(t1.find("jobs") == std::string::npos);
  CHECK(t1.find("from-text") != std::string::npos);
}

TEST_CASE("config file values apply and flags override them") {
  const fs::path dir = fresh("config");
  {
    std::ofstream f(dir / "run.ini");
    f << "n-stories = 60\nn-tweets = 30\nn-subjects = 2\nseed = 11\n";
  }
  REQUIRE(run({"--config", (dir / "run.ini").string(), "synth", "--out", (dir / "w").string(),
               "--n-tweets", "25"}).code == kExitOk);
  CHECK(load_stories(dir / "w" / "stories.jsonl").size() == 60);
  CHECK(load_tweets(dir / "w" / "tweets.jsonl").size() == 25);
  CHECK(slurp(dir / "w" / "config.txt").find("# seed = 11") != std::string::npos);
  CHECK(run({"--config", (dir / "absent.ini").string(), "synth", "--out", dir.string()}).code == kExitDataError);
}
