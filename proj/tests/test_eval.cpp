#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "neurosym/eval.hpp"
#include "neurosym/synth.hpp"
#include "oracles.hpp"

using namespace neurosym;

namespace {

struct Fixture {
  synth::PlantedBenchmark bench;
  CorpusSnapshot corpus;
  CorpusSnapshot general;
  EmbeddingModel em;
  EmbeddingModel general_em;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    synth::BenchmarkConfig cfg;
    cfg.docs_per_category = 60;
    cfg.fillers_per_doc = 6;
    cfg.general_docs_per_category = 60;
    cfg.kb_docs_per_category = 0;
    out.bench = synth::planted_benchmark(cfg);
    const auto pc = synth::default_preprocess_config();
    out.corpus = build_snapshot(out.bench.tweets, pc, "bench");
    out.general = build_snapshot(out.bench.general, pc, "general");
    TrainConfig tc;
    tc.dim = 8;
    tc.epochs = 5;
    tc.subsample = 1e-3;
    tc.seed = 42;
    tc.center = true;
    out.em = train_skipgram(out.corpus, build_vocab(out.corpus, 2), tc);
    out.general_em = train_skipgram(out.general, build_vocab(out.general, 2), tc);
    return out;
  }();
  return f;
}

EvalConfig small_eval() {
  EvalConfig cfg;
  cfg.variants = {ClassifierVariant::nb, ClassifierVariant::brf};
  cfg.forest.n_trees = 15;
  cfg.seed = 42;
  return cfg;
}

SedoAlignment identity(int d) {
  SedoAlignment a;
  a.W = Matrix::Identity(d, d);
  a.solved = true;
  return a;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("metrics examples") {
    // TP=8, FP=2, FN=2
    std::vector<int> t, p;
    for (int i = 0; i < 8; ++i) t.push_back(1), p.push_back(1);
    for (int i = 0; i < 2; ++i) t.push_back(0), p.push_back(1);
    for (int i = 0; i < 2; ++i) t.push_back(1), p.push_back(0);
    for (int i = 0; i < 3; ++i) t.push_back(0), p.push_back(0);
    const auto m = metrics(t, p);
    CHECK(m.precision == doctest::Approx(0.8));
    CHECK(m.recall == doctest::Approx(0.8));
    CHECK(m.f1 == doctest::Approx(0.8));
    CHECK(m.confusion == Confusion{8, 2, 2, 3});
    CHECK(m.confusion.total() == t.size());

    const auto perfect = metrics({1, 0, 1}, {1, 0, 1});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const auto none = metrics({1, 0, 1}, {0, 0, 0});
    CHECK(none.precision == 0.0);
    CHECK(none.precision_undefined);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    const auto no_pos = metrics({0, 0}, {0, 0});
    CHECK(no_pos.recall_undefined);
    CHECK_THROWS_AS(metrics({1, 0}, {1}), Error);
    CHECK_THROWS_AS(metrics({}, {}), Error);
  }

  TEST_CASE("F1 is the harmonic mean and never exceeds max(P, R)") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = 1 + uniform_index(rng, 60);
      std::vector<int> t(n), p(n);
      for (std::size_t i = 0; i < n; ++i) {
        t[i] = uniform01(rng) < 0.4;
        p[i] = uniform01(rng) < 0.5;
      }
      const auto m = metrics(t, p);
      const double pr = m.precision + m.recall;
      const double expected = pr > 0 ? 2 * m.precision * m.recall / pr : 0.0;
      CHECK(std::abs(m.f1 - expected) <= 1e-12);
      CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-15);
      CHECK(m.confusion.total() == n);
    }
  }

  TEST_CASE("splits") {
    const auto& corpus = fixture().corpus;
    const auto chrono = split_corpus(corpus, 0.8, SplitMode::chronological, 1);
    CHECK(chrono.train.size() == static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(corpus.size()))));
    CHECK(chrono.train.size() + chrono.test.size() == corpus.size());
    CHECK(std::is_sorted(chrono.train.begin(), chrono.train.end()));
    std::string latest_train;
    for (auto i : chrono.train) latest_train = std::max(latest_train, corpus.documents()[i].timestamp);
    for (auto i : chrono.test) CHECK(corpus.documents()[i].timestamp >= latest_train);

    const auto r1 = split_corpus(corpus, 0.8, SplitMode::random, 5);
    const auto r2 = split_corpus(corpus, 0.8, SplitMode::random, 5);
    const auto r3 = split_corpus(corpus, 0.8, SplitMode::random, 6);
    CHECK(r1.train == r2.train);
    CHECK(r1.train != r3.train);
    std::set<std::size_t> all(r1.train.begin(), r1.train.end());
    all.insert(r1.test.begin(), r1.test.end());
    CHECK(all.size() == corpus.size());
    CHECK(parse_split_mode("random") == SplitMode::random);
    CHECK_THROWS_AS(parse_split_mode("weekly"), Error);
  }

  TEST_CASE("identity alignment gives zero deltas") {
    const auto& f = fixture();
    const auto labels = gold_labels(f.corpus);
    const auto a = identity(f.em.dim);
    const auto cmp = run_sedo_comparison(f.corpus, labels, f.em, a, small_eval());
    REQUIRE(cmp.deltas.size() == 6);
    for (const auto& d : cmp.deltas) {
      CHECK(d.metrics.precision == 0.0);
      CHECK(d.metrics.recall == 0.0);
      CHECK(d.metrics.f1 == 0.0);
    }
    for (const auto& r : cmp.with_sedo.rows) CHECK(r.config == "sedo");
    for (const auto& r : cmp.without_sedo.rows) CHECK(r.config == "raw");
  }

  TEST_CASE("reports are reproducible and counts cover the test split") {
    const auto& f = fixture();
    const auto labels = gold_labels(f.corpus);
    auto cfg = small_eval();
    cfg.config_digest = "abc";
    const auto a = evaluate(f.corpus, labels, f.em, nullptr, cfg, "raw");
    const auto b = evaluate(f.corpus, labels, f.em, nullptr, cfg, "raw");
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(to_csv(a) == to_csv(b));
    CHECK(to_json(a).at("config_digest") == "abc");
    const auto test_size = split_corpus(f.corpus, cfg.train_fraction, cfg.split, cfg.seed).test.size();
    for (const auto& r : a.rows) CHECK(r.metrics.confusion.total() == test_size);
    CHECK(a.rows.size() == 6);
    CHECK(a.find("raw", "anxiety", "brf") != nullptr);
  }

  TEST_CASE("report json uses percentages with two decimals") {
    CHECK(round_percent(0.123456) == 12.35);
    EvalReport r;
    r.rows.push_back({"sedo", "anxiety", "brf", metrics({1, 1, 0}, {1, 0, 0})});
    const auto j = to_json(r);
    CHECK(j.at("rows")[0].at("f1") == doctest::Approx(66.67));
    CHECK(j.at("rows")[0].at("tp") == 1);
    CHECK(to_csv(r).find("sedo,anxiety,brf") != std::string::npos);
  }

  TEST_CASE("ablation ladder reports every level in order") {
    const auto& f = fixture();
    AblationResources res;
    res.general_lexicon = f.bench.general_lexicon;
    res.domain_lexicon = f.bench.domain_lexicon;
    res.pretrained = &f.general_em;
    res.finetune.dim = 8;
    res.finetune.epochs = 2;
    res.finetune.subsample = 1e-3;
    const auto ladder = default_ladder();
    REQUIRE(ladder.size() == 5);
    CHECK_FALSE(ladder[0].use_general_lexicon);
    CHECK(ladder[4].use_finetuned_embeddings);
    CHECK(ladder[4].use_domain_lexicon);
    const auto out = run_ablation(f.corpus, gold_labels(f.corpus), ladder, res, small_eval());
    REQUIRE(out.size() == 5);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].config.level == ladder[i].level);
      CHECK(out[i].error_rate >= 0.0);
      CHECK(out[i].error_rate <= 1.0);
    }
    // a ladder of one level runs just that level
    const auto one = run_ablation(f.corpus, gold_labels(f.corpus), {AblationConfig::at(AblationLevel::a2)}, res,
                                  small_eval());
    REQUIRE(one.size() == 1);
    CHECK(one[0].error_rate == out[2].error_rate);
    CHECK_THROWS_AS(run_ablation(f.corpus, gold_labels(f.corpus), {}, res, small_eval()), Error);
  }

  TEST_CASE("self-triangulation reproduces the in-domain report") {
    const auto& f = fixture();
    const auto labels = gold_labels(f.corpus);
    const auto a = identity(f.em.dim);
    TriangulationInputs in{&f.em, &f.em, f.bench.lexicon, FineTuneMode::union_anchors};
    const auto tri = run_triangulation(a, f.corpus, labels, TriangulationMode::pretrained, in, small_eval());
    const auto own = evaluate(f.corpus, labels, f.em, &a, small_eval(), "pretrained");
    REQUIRE(tri.rows.size() == own.rows.size());
    for (std::size_t i = 0; i < tri.rows.size(); ++i) {
      CHECK(tri.rows[i].metrics.confusion == own.rows[i].metrics.confusion);
      CHECK(tri.rows[i].metrics.f1 == own.rows[i].metrics.f1);
    }
  }

  TEST_CASE("fine-tuned triangulation re-solves on corpus anchors") {
    const auto& f = fixture();
    const auto split = split_corpus(f.corpus, 0.8, SplitMode::chronological, 42);
    const auto anchors = corpus_anchors(f.corpus, split.train, f.bench.lexicon, f.em, f.em);
    CHECK(anchors.size() > 0);
    CHECK(std::is_sorted(anchors.terms.begin(), anchors.terms.end()));
    CHECK(anchors.tweet == anchors.kb);
    const auto a = solve_sylvester(assemble(anchors, 1.0, default_ridge(anchors)));
    TriangulationInputs in{&f.em, &f.em, f.bench.lexicon, FineTuneMode::union_anchors};
    const auto tri = run_triangulation(a, f.corpus, gold_labels(f.corpus), TriangulationMode::finetuned, in,
                                       small_eval());
    CHECK(tri.rows.size() == 6);
    for (const auto& r : tri.rows) CHECK(r.config == "finetuned");
  }

  TEST_CASE("enum names parse back") {
    CHECK(parse_ablation_level(to_string(AblationLevel::a3)) == AblationLevel::a3);
    CHECK(parse_triangulation_mode("finetuned") == TriangulationMode::finetuned);
    CHECK_THROWS_AS(parse_ablation_level("A9"), Error);
  }
}
