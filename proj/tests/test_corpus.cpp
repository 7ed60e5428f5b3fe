#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "neurosym/corpus.hpp"
#include "neurosym/synth.hpp"
#include "oracles.hpp"

using namespace neurosym;

namespace {

PreprocessConfig config_with(std::initializer_list<const char*> stopwords, int n_max = 3) {
  PreprocessConfig cfg;
  cfg.n_max = n_max;
  for (const auto* w : stopwords) cfg.stopwords.insert(w);
  return cfg;
}

RawDocument raw(std::string text) {
  RawDocument d;
  d.id = "d";
  d.text = std::move(text);
  return d;
}

std::size_t ngram_count(std::size_t n_tokens, int n_max) {
  std::size_t total = 0;
  for (int n = 1; n <= n_max; ++n)
    if (n_tokens >= static_cast<std::size_t>(n)) total += n_tokens - static_cast<std::size_t>(n) + 1;
  return total;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("ingest keeps valid lines in order") {
    auto r = ingest_jsonl_string(
        "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\",\"text\":\"two\"}\n{\"id\":\"c\",\"text\":\"three\"}\n");
    REQUIRE(r.documents.size() == 3);
    CHECK(r.documents[0].id == "a");
    CHECK(r.documents[2].text == "three");
    CHECK(r.skipped == 0);
  }

  TEST_CASE("ingest skips and counts malformed lines") {
    auto r = ingest_jsonl_string("{\"id\":\"a\",\"text\":\"one\"}\nnot json\n{\"id\":\"b\",\"text\":\"two\"}\n");
    CHECK(r.documents.size() == 2);
    CHECK(r.skipped == 1);
    REQUIRE(r.failed_lines.size() == 1);
    CHECK(r.failed_lines[0] == 2);
  }

  TEST_CASE("ingest of an empty file yields no documents") {
    auto r = ingest_jsonl_string("");
    CHECK(r.documents.empty());
    CHECK(r.skipped == 0);
  }

  TEST_CASE("ingest rejects missing fields, blank text and duplicate ids") {
    auto r = ingest_jsonl_string(
        "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\"}\n{\"id\":\"c\",\"text\":\"   \"}\n"
        "{\"id\":\"a\",\"text\":\"again\"}\n{\"id\":\"d\",\"text\":\"x\"}\n{\"id\":\"e\",\"text\":\"y\"}\n");
    CHECK(r.documents.size() == 3);
    CHECK(r.skipped == 3);
  }

  TEST_CASE("more than half malformed is fatal and names the lines") {
    try {
      ingest_jsonl_string("bad\n{\"id\":\"a\",\"text\":\"one\"}\nbad\n");
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find('1') != std::string::npos);
      CHECK(msg.find('3') != std::string::npos);
    }
  }

  TEST_CASE("unreadable file is fatal") {
    CHECK_THROWS_AS(ingest_jsonl("/nonexistent/docs.jsonl"), Error);
  }

  TEST_CASE("ingest reads source, timestamp, hint and labels") {
    auto r = ingest_jsonl_string(
        R"({"id":"a","text":"t","timestamp":"2020-01-01","source":"reddit","location_hint":"ohio","labels":{"anxiety":1}})");
    REQUIRE(r.documents.size() == 1);
    const auto& d = r.documents[0];
    CHECK(d.source == Source::reddit);
    CHECK(d.timestamp == "2020-01-01");
    CHECK(d.location_hint.value() == "ohio");
    CHECK(d.gold.at("anxiety") == 1);
  }

  TEST_CASE("preprocess lowercases, lemmatizes and splits out hashtags") {
    auto t = preprocess(raw("Feeling SAD and alone #Isolation"), config_with({"and"}));
    CHECK(t.tokens == std::vector<std::string>{"feel", "sad", "alone"});
    CHECK(t.hashtags == std::vector<std::string>{"isolation"});
  }

  TEST_CASE("preprocess of empty and all-stopword text") {
    auto cfg = config_with({"a", "the", "of"});
    auto empty = preprocess(raw(""), cfg);
    CHECK(empty.tokens.empty());
    CHECK(empty.ngrams.empty());
    CHECK(preprocess(raw("a the of"), cfg).tokens.empty());
  }

  TEST_CASE("urls and mentions are stripped") {
    auto t = preprocess(raw("check https://example.com/x now @someone"), config_with({}));
    CHECK(t.tokens == std::vector<std::string>{"check", "now"});
  }

  TEST_CASE("lemmatizer suffix rules") {
    CHECK(lemmatize("running") == "run");
    CHECK(lemmatize("feelings") == "feeling");
    CHECK(lemmatize("parties") == "party");
    // guards keep short stems intact
    CHECK(lemmatize("sing") == "sing");
    CHECK(lemmatize("is") == "is");
    CHECK(lemmatize("bed") == "bed");
  }

  TEST_CASE("generate_ngrams examples") {
    CHECK(generate_ngrams({"social", "distancing"}, 2) ==
          std::vector<std::string>{"social", "distancing", "social_distancing"});
    CHECK(generate_ngrams({"a"}, 3) == std::vector<std::string>{"a"});
    CHECK(generate_ngrams({"w1", "w2", "w3"}, 2).size() == 5);
  }

  TEST_CASE("ngram count matches the closed form exhaustively") {
    for (std::size_t len = 0; len <= 20; ++len) {
      std::vector<std::string> tokens;
      for (std::size_t i = 0; i < len; ++i) tokens.push_back("t" + std::to_string(i));
      for (int n_max = 1; n_max <= 5; ++n_max) {
        const auto grams = generate_ngrams(tokens, n_max);
        REQUIRE(grams.size() == ngram_count(len, n_max));
        // the unigram prefix is the token list
        REQUIRE(std::equal(tokens.begin(), tokens.end(), grams.begin()));
      }
    }
  }

  TEST_CASE("tokenized documents satisfy their invariants") {
    const auto cfg = synth::default_preprocess_config(3);
    for (const auto& d : synth::two_cluster_corpus(7, 20)) {
      const auto t = preprocess(d, cfg);
      const auto again = preprocess(d, cfg);
      CHECK(t == again);
      for (const auto& tok : t.tokens) {
        CHECK(tok == to_lower_ascii(tok));
        CHECK(cfg.stopwords.count(tok) == 0);
      }
      REQUIRE(t.ngrams.size() == ngram_count(t.tokens.size(), 3));
      CHECK(std::equal(t.tokens.begin(), t.tokens.end(), t.ngrams.begin()));
    }
  }

  TEST_CASE("snapshot round-trips through jsonl") {
    const auto cfg = synth::default_preprocess_config(2);
    auto docs = synth::two_cluster_corpus(3, 5);
    docs[0].location_hint = "boston";
    docs[1].gold["anxiety"] = 1;
    const auto snap = build_snapshot(docs, cfg, "digest");
    const auto dir = oracle::temp_dir("snap");
    save_snapshot(snap, dir / "s.jsonl");
    const auto back = load_snapshot(dir / "s.jsonl");
    REQUIRE(back.size() == snap.size());
    CHECK(back.documents() == snap.documents());
    CHECK(back.created_from() == "digest");
    CHECK(back.preprocess_config().n_max == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("parallel snapshot build matches the serial one") {
    const auto cfg = synth::default_preprocess_config(3);
    const auto docs = synth::two_cluster_corpus(5, 50);
    CHECK(build_snapshot(docs, cfg, "x", 1).documents() == build_snapshot(docs, cfg, "x", 4).documents());
  }

  TEST_CASE("bundled stopword file matches the built-in list") {
    const auto path = std::filesystem::path(NEUROSYM_DATA_DIR) / "stopwords.txt";
    CHECK(read_file(path) == synth::stopword_file_contents());
    const auto cfg = load_preprocess_config(std::filesystem::path(NEUROSYM_DATA_DIR) / "preprocess.json");
    CHECK(cfg.stopwords_digest == sha256_file(path));
    CHECK(cfg.stopwords.size() == synth::default_stopwords().size());
  }

  TEST_CASE("preprocess config rejects a stopword file with the wrong digest") {
    const auto dir = oracle::temp_dir("pp");
    write_file(dir / "stopwords.txt", "the\n");
    write_file(dir / "preprocess.json", R"({"n_max": 3, "stopwords_digest": "00", "strip_urls": true})");
    CHECK_THROWS_AS(load_preprocess_config(dir / "preprocess.json"), Error);
    std::filesystem::remove_all(dir);
  }
}
