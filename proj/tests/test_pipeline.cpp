#include <doctest.h>

#include <fstream>

#include "neurosym/pipeline.hpp"
#include "oracles.hpp"

using namespace neurosym;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSample = fs::path(NEUROSYM_DATA_DIR) / "sample" / "pipeline.json";

std::string cli(const std::string& args) { return std::string(NEUROSYM_CLI) + " " + args; }

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

json sample_json() { return json::parse(read_file(kSample)); }

// Fast settings for stage tests: few epochs and sweeps.
const char* kQuick =
    " --embedding.tweet.epochs 2 --embedding.kb.epochs 2 --embedding.general.epochs 2"
    " --topic.iters 20 --topic.burn_in 5";

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("overrides parse json values and fall back to strings") {
    json cfg = json::object();
    apply_override(cfg, "filter.percentile", "75");
    apply_override(cfg, "sedo.delta", "1.5");
    apply_override(cfg, "clf.variant", "bsrf");
    apply_override(cfg, "eval.variants", "[\"nb\",\"rf\"]");
    apply_override(cfg, "embedding.tweet.center", "false");
    CHECK(cfg["filter"]["percentile"] == 75);
    CHECK(cfg["sedo"]["delta"] == 1.5);
    CHECK(cfg["classify"]["variant"] == "bsrf");
    CHECK(cfg["eval"]["variants"].size() == 2);
    CHECK(cfg["embedding"]["tweet"]["center"] == false);
    CHECK_FALSE(cfg.contains("clf"));
  }

  TEST_CASE("flag overrides take precedence over the file") {
    const auto base = PipelineConfig::load(kSample);
    CHECK(base.get<double>("filter.percentile", 0) == 25.0);
    CHECK(base.seed() == sample_json().at("seed").get<std::uint64_t>());
    CHECK(base.out_dir() == kSample.parent_path() / "out");

    const auto over = PipelineConfig::load(kSample, {{"filter.percentile", "75"}, {"clf.variant", "nb"}}, 7,
                                           fs::path("/tmp/elsewhere"));
    CHECK(over.get<double>("filter.percentile", 0) == 75.0);
    CHECK(over.get<std::string>("classify.variant", "") == "nb");
    CHECK(over.seed() == 7);
    CHECK(over.out_dir() == "/tmp/elsewhere");
    CHECK(over.digest() != base.digest());
    // a later override of the same key wins
    const auto twice = PipelineConfig::load(kSample, {{"filter.percentile", "60"}, {"filter.percentile", "70"}});
    CHECK(twice.get<double>("filter.percentile", 0) == 70.0);
  }

  TEST_CASE("digest ignores the output directory") {
    const auto a = PipelineConfig::load(kSample, {}, std::nullopt, fs::path("/tmp/a"));
    const auto b = PipelineConfig::load(kSample, {}, std::nullopt, fs::path("/tmp/b"));
    CHECK(a.digest() == b.digest());
  }

  TEST_CASE("inputs resolve against the config directory") {
    const auto cfg = PipelineConfig::load(kSample);
    const auto kb = cfg.inputs("kb_corpus");
    REQUIRE(kb.size() == 2);
    CHECK(kb[1] == kSample.parent_path() / "kb_extra.jsonl");
    CHECK(cfg.has_input("corpus"));
    CHECK_FALSE(cfg.has_input("nothing"));
  }

  TEST_CASE("validation rejects bad configs") {
    const auto dir = kSample.parent_path();
    auto no_seed = sample_json();
    no_seed.erase("seed");
    CHECK_THROWS_AS(PipelineConfig::from_json(no_seed, dir), Error);
    CHECK_NOTHROW(PipelineConfig::from_json(no_seed, dir, {}, 3));

    auto missing_file = sample_json();
    missing_file["paths"]["gazetteer"] = "nowhere.tsv";
    CHECK_THROWS_AS(PipelineConfig::from_json(missing_file, dir), Error);

    auto unknown_key = sample_json();
    unknown_key["paths"]["mystery"] = "tweets.jsonl";
    CHECK_THROWS_AS(PipelineConfig::from_json(unknown_key, dir), Error);

    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"filter.percentile", "150"}}), Error);
    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"sedo.delta", "0"}}), Error);
    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"eval.variants", "[\"svm\"]"}}), Error);
    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"eval.split", "weekly"}}), Error);
    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"embedding.kb.dim", "-4"}}), Error);
    CHECK_THROWS_AS(PipelineConfig::load(kSample, {{"embedding.general.dim", "32"}}), Error);
  }

  TEST_CASE("stage names are in pipeline order") {
    const auto& names = stage_names();
    REQUIRE(names.size() == 14);
    CHECK(names.front() == "ingest");
    CHECK(names[6] == "extract-meta");
    CHECK(names.back() == "triangulate");
    CHECK_THROWS_AS(run_stage("bogus", PipelineConfig::load(kSample)), Error);
  }

  TEST_CASE("the output lock is exclusive") {
    const auto dir = oracle::temp_dir("lock");
    {
      OutputLock lock(dir);
      CHECK(fs::exists(dir / ".lock"));
      CHECK_THROWS_AS(OutputLock{dir}, Error);
      CHECK(oracle::run(cli("ingest --config " + kSample.string() + " --out " + dir.string() + " 2>/dev/null")) != 0);
    }
    CHECK_FALSE(fs::exists(dir / ".lock"));
    fs::remove_all(dir);
  }

  TEST_CASE("config errors stop the cli before any work") {
    const auto dir = oracle::temp_dir("invalid") / "out";
    const auto err = dir.parent_path() / "err.txt";
    CHECK(oracle::run(cli("pipeline --config " + kSample.string() + " --out " + dir.string() +
                          " --filter.percentile 150 2>" + err.string())) == 1);
    CHECK_FALSE(fs::exists(dir));
    CHECK(read_file(err).rfind("error: ", 0) == 0);
    CHECK(oracle::run(cli("ingest --config /nonexistent.json 2>/dev/null")) != 0);
    fs::remove_all(dir.parent_path());
  }

  TEST_CASE("cli flags reach the manifest") {
    const auto dir = oracle::temp_dir("flags");
    REQUIRE(oracle::run(cli("ingest --config " + kSample.string() + " --out " + dir.string() +
                            " --seed 7 --filter.percentile=60 2>/dev/null")) == 0);
    const auto lines = read_jsonl(dir / "manifest.jsonl");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].at("stage") == "ingest");
    CHECK(lines[0].at("seed") == 7);
    const auto expected = PipelineConfig::load(kSample, {{"filter.percentile", "60"}}, 7, dir);
    CHECK(lines[0].at("config_digest") == expected.digest());
    for (const auto& [file, digest] : lines[0].at("outputs").items()) CHECK(digest == sha256_file(dir / file));
    fs::remove_all(dir);
  }

  TEST_CASE("score without topic models names the missing artifact") {
    const auto dir = oracle::temp_dir("staged");
    const std::string common = " --config " + kSample.string() + " --out " + dir.string() + kQuick;
    for (const char* stage : {"ingest", "train-embed", "detect-neologisms", "enrich-lexicon", "filter"}) {
      REQUIRE_MESSAGE(oracle::run(cli(std::string(stage) + common + " 2>/dev/null")) == 0, stage);
    }
    const auto err = dir / "err.txt";
    CHECK(oracle::run(cli("score" + common + " 2>" + err.string())) == 1);
    const auto message = read_file(err);
    CHECK(message.find("missing artifact: topicmodel") != std::string::npos);
    CHECK(message.find("train-topics") != std::string::npos);

    const auto lines = read_jsonl(dir / "manifest.jsonl");
    REQUIRE(lines.size() == 5);
    CHECK(lines[4].at("stage") == "filter");
    CHECK(lines[4].at("inputs").contains("embeddings.tweet.txt"));
    CHECK(read_jsonl(dir / "timings.jsonl").size() == 5);

    // rerunning a stage on unchanged inputs reproduces its artifacts
    const auto before = sha256_file(dir / "filtered.snapshot.jsonl");
    REQUIRE(oracle::run(cli("filter" + common + " 2>/dev/null")) == 0);
    CHECK(sha256_file(dir / "filtered.snapshot.jsonl") == before);
    const auto again = read_jsonl(dir / "manifest.jsonl");
    REQUIRE(again.size() == 6);
    CHECK(again[5].at("outputs") == lines[4].at("outputs"));
    fs::remove_all(dir);
  }
}
