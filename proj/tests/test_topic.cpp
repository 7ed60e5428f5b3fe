#include <doctest.h>

#include <cmath>
#include <numeric>

#include "neurosym/synth.hpp"
#include "neurosym/topic.hpp"
#include "oracles.hpp"

using namespace neurosym;

namespace {

struct Planted {
  synth::PlantedTopics topics;
  CorpusSnapshot corpus;
};

const Planted& planted() {
  static const Planted p = [] {
    Planted out;
    out.topics = synth::planted_topic_corpus(42, 200);
    out.corpus = build_snapshot(out.topics.documents, synth::default_preprocess_config(3), "planted");
    return out;
  }();
  return p;
}

LdaConfig planted_config() {
  LdaConfig cfg;
  cfg.topics = 2;
  cfg.alpha = 0.5;
  cfg.beta = 0.01;
  cfg.iters = 200;
  cfg.burn_in = 50;
  cfg.seed = 42;
  return cfg;
}

// phi restricted to the planted support, in the generator's term order
std::vector<std::vector<double>> phi_rows(const TopicModel& m, const std::vector<std::string>& terms) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.topics));
  for (int k = 0; k < m.topics; ++k) {
    for (const auto& t : terms) {
      const auto idx = m.term_index(t);
      rows[static_cast<std::size_t>(k)].push_back(idx ? m.phi(k, static_cast<Eigen::Index>(*idx)) : 0.0);
    }
  }
  return rows;
}

double tv(const Vector& a, const Vector& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

EmbeddingModel embedding_with(const std::vector<std::string>& terms, const Matrix& rows) {
  EmbeddingModel m;
  m.vocab = Vocab::from_terms(terms, std::vector<std::uint64_t>(terms.size(), 1), 1);
  m.dim = static_cast<int>(rows.cols());
  m.input = rows;
  m.output = RowMatrix::Zero(rows.rows(), rows.cols());
  return m;
}

}  // namespace

TEST_SUITE("topic") {
  TEST_CASE("planted topics are recovered") {
    const auto m = train_lda(planted().corpus, TopicVariant::unigram_lda, planted_config());
    const auto rows = phi_rows(m, planted().topics.terms);
    const std::vector<std::vector<double>> truth(planted().topics.topic_word.begin(),
                                                 planted().topics.topic_word.end());
    CHECK(oracle::aligned_tv_distance(rows, truth) <= 0.15);
  }

  TEST_CASE("distributions are normalized and nonnegative") {
    const auto m = train_lda(planted().corpus, TopicVariant::ngram_nlda, planted_config());
    for (Eigen::Index k = 0; k < m.phi.rows(); ++k) CHECK(std::abs(m.phi.row(k).sum() - 1.0) <= 1e-9);
    for (Eigen::Index d = 0; d < m.theta.rows(); ++d) CHECK(std::abs(m.theta.row(d).sum() - 1.0) <= 1e-9);
    CHECK(m.phi.minCoeff() >= 0);
    CHECK(m.theta.minCoeff() >= 0);
  }

  TEST_CASE("sampler counts are conserved at every sweep") {
    int sweeps = 0;
    bool all_ok = true;
    const auto observer = [&](const GibbsSampler& s, int) {
      ++sweeps;
      const auto& ndk = s.doc_topic_counts();
      const auto& nkw = s.topic_word_counts();
      long long doc_total = 0, word_total = 0;
      for (std::size_t d = 0; d < ndk.size(); ++d) {
        const long long row = std::accumulate(ndk[d].begin(), ndk[d].end(), 0LL);
        if (row != static_cast<long long>(s.docs()[d].size())) all_ok = false;
        doc_total += row;
      }
      for (std::size_t k = 0; k < nkw.size(); ++k) {
        long long topic_from_docs = 0;
        for (const auto& r : ndk) topic_from_docs += r[k];
        const long long topic_from_words = std::accumulate(nkw[k].begin(), nkw[k].end(), 0LL);
        if (topic_from_docs != topic_from_words) all_ok = false;
        word_total += topic_from_words;
      }
      if (doc_total != word_total) all_ok = false;
      if (!s.counts_consistent()) all_ok = false;
    };
    auto cfg = planted_config();
    cfg.iters = 30;
    cfg.burn_in = 10;
    train_lda(planted().corpus, TopicVariant::unigram_lda, cfg, observer);
    CHECK(sweeps == 30);
    CHECK(all_ok);
  }

  TEST_CASE("strong smoothing drives theta toward uniform") {
    auto cfg = planted_config();
    cfg.alpha = 1e6;
    cfg.beta = 1e6;
    cfg.iters = 20;
    cfg.burn_in = 5;
    const auto m = train_lda(planted().corpus, TopicVariant::unigram_lda, cfg);
    CHECK((m.theta.array() - 0.5).abs().maxCoeff() <= 0.1);
  }

  TEST_CASE("same seed gives identical phi") {
    auto cfg = planted_config();
    cfg.iters = 40;
    cfg.burn_in = 10;
    const auto a = train_lda(planted().corpus, TopicVariant::unigram_lda, cfg);
    const auto b = train_lda(planted().corpus, TopicVariant::unigram_lda, cfg);
    CHECK(a.phi == b.phi);
    CHECK(a.theta == b.theta);
  }

  TEST_CASE("nLDA over unigram-only n-grams equals LDA") {
    const auto docs = synth::planted_topic_corpus(7, 60).documents;
    const auto corpus = build_snapshot(docs, synth::default_preprocess_config(1), "n1");
    auto cfg = planted_config();
    cfg.iters = 30;
    cfg.burn_in = 10;
    const auto lda = train_lda(corpus, TopicVariant::unigram_lda, cfg);
    const auto nlda = train_lda(corpus, TopicVariant::ngram_nlda, cfg);
    CHECK(lda.vocab == nlda.vocab);
    CHECK(lda.phi == nlda.phi);
    CHECK(lda.theta == nlda.theta);
  }

  TEST_CASE("invalid training requests are fatal") {
    auto cfg = planted_config();
    CHECK_THROWS_AS(train_lda(CorpusSnapshot{}, TopicVariant::unigram_lda, cfg), Error);
    cfg.topics = 1;
    CHECK_THROWS_AS(train_lda(planted().corpus, TopicVariant::unigram_lda, cfg), Error);
    cfg.topics = 2;
    cfg.burn_in = cfg.iters;
    CHECK_THROWS_AS(train_lda(planted().corpus, TopicVariant::unigram_lda, cfg), Error);
  }

  TEST_CASE("fold-in inference") {
    const auto m = train_lda(planted().corpus, TopicVariant::unigram_lda, planted_config());
    const auto a_topic = m.phi(0, static_cast<Eigen::Index>(*m.term_index("flu"))) >
                                 m.phi(1, static_cast<Eigen::Index>(*m.term_index("flu")))
                             ? 0
                             : 1;
    const auto mix = doc_topics(m, std::vector<std::string>{"flu", "fever", "cough", "fever", "flu"});
    CHECK_FALSE(mix.no_known_terms);
    Eigen::Index arg = 0;
    mix.distribution.maxCoeff(&arg);
    CHECK(arg == a_topic);

    const auto empty = doc_topics(m, std::vector<std::string>{});
    CHECK(empty.no_known_terms);
    CHECK(empty.distribution.isApproxToConstant(0.5));

    // training documents: fold-in agrees with the training-time theta
    for (std::size_t d = 0; d < 20; ++d) {
      const auto& doc = planted().corpus.documents()[d];
      const Vector folded = doc_topics(m, doc).distribution;
      const Vector trained = m.theta.row(static_cast<Eigen::Index>(*m.doc_index(doc.id))).transpose();
      CHECK(tv(folded, trained) <= 0.1);
    }
  }

  TEST_CASE("topic embedding weighting") {
    TopicModel tm;
    tm.topics = 2;
    tm.vocab = {"x", "y", "z"};
    tm.phi.resize(2, 3);
    tm.phi << 1.0, 0.0, 0.0,  // one dominant term
        0.0, 0.5, 0.5;        // two equal terms
    tm.rebuild_index();
    Matrix rows(3, 2);
    rows << 1, 2, 3, 4, 5, 8;
    const auto em = embedding_with({"x", "y", "z"}, rows);
    const auto te = topic_embedding(tm, em, 2);
    CHECK((te.vectors.row(0) - rows.row(0)).norm() <= 1e-9);
    CHECK((te.vectors.row(1) - (rows.row(1) + rows.row(2)) / 2).norm() <= 1e-9);

    const auto unknown = embedding_with({"q"}, Matrix::Ones(1, 2));
    const auto missing = topic_embedding(tm, unknown, 2);
    CHECK(missing.missing[0]);
    CHECK(missing.vectors.row(0).isZero(0));
  }

  TEST_CASE("planted topic embeddings sit near their own terms") {
    const auto& corpus = planted().corpus;
    TrainConfig tc;
    tc.dim = 16;
    tc.epochs = 10;
    tc.subsample = 0;
    tc.seed = 42;
    tc.center = true;
    const auto em = train_skipgram(corpus, build_vocab(corpus, 1), tc);
    const auto m = train_lda(corpus, TopicVariant::unigram_lda, planted_config());
    const auto te = topic_embedding(m, em, 3);
    const auto flu = static_cast<Eigen::Index>(*m.term_index("flu"));
    const int a = m.phi(0, flu) > m.phi(1, flu) ? 0 : 1;
    const Vector fever = *em.vector("fever");
    CHECK(cosine(te.vectors.row(a).transpose(), fever) > cosine(te.vectors.row(1 - a).transpose(), fever));
  }

  TEST_CASE("topic model json round-trip") {
    auto cfg = planted_config();
    cfg.iters = 20;
    cfg.burn_in = 5;
    const auto m = train_lda(planted().corpus, TopicVariant::ngram_nlda, cfg);
    const auto dir = oracle::temp_dir("tm");
    save_topic_model(m, dir / "t.json", false);
    const auto back = load_topic_model(dir / "t.json");
    CHECK(back.phi == m.phi);
    CHECK(back.vocab == m.vocab);
    CHECK(back.variant == TopicVariant::ngram_nlda);
    CHECK(back.theta.size() == 0);
    save_topic_model(m, dir / "t2.json", true);
    CHECK(load_topic_model(dir / "t2.json").theta == m.theta);
    std::filesystem::remove_all(dir);
  }
}
