#include <doctest.h>

#include <cmath>

#include "neurosym/classify.hpp"
#include "oracles.hpp"

using namespace neurosym;

namespace {

FeatureVector fv(std::initializer_list<double> xs, std::string id = "") {
  FeatureVector f;
  f.doc_id = std::move(id);
  f.x.resize(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) f.x(i++) = x;
  return f;
}

struct Data {
  std::vector<FeatureVector> X;
  std::vector<int> y;
};

// Two Gaussian blobs in 2-D around (0,0) and (5,5).
Data blobs(std::size_t n0, std::size_t n1, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  Data d;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    const int label = i < n0 ? 0 : 1;
    const double c = label ? 5.0 : 0.0;
    d.X.push_back(fv({c + nd(rng), c + nd(rng)}));
    d.y.push_back(label);
  }
  return d;
}

const std::vector<ClassifierVariant> kAll{ClassifierVariant::nb, ClassifierVariant::rf, ClassifierVariant::brf,
                                          ClassifierVariant::bsrf};

EmbeddingModel embedding_with(const std::vector<std::string>& terms, const Matrix& rows) {
  EmbeddingModel m;
  m.vocab = Vocab::from_terms(terms, std::vector<std::uint64_t>(terms.size(), 1), 1);
  m.dim = static_cast<int>(rows.cols());
  m.input = rows;
  m.output = RowMatrix::Zero(rows.rows(), rows.cols());
  return m;
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("Gaussian NB matches closed-form posteriors") {
    const std::vector<FeatureVector> X{fv({0}), fv({1}), fv({10}), fv({11})};
    const std::vector<int> y{0, 0, 1, 1};
    const auto clf = train(ClassifierVariant::nb, X, y, {}, 1);
    // class variances 0.25; smoothing is 1e-9 of the overall variance 25.25
    const double var = 0.25 + 1e-9 * 25.25;
    for (double x : {0.4, 10.6, 5.5, 5.49, 5.51, 5.45, 5.6}) {
      const double expected = oracle::gaussian_posterior(x, 0.5, var, 10.5, var, 0.5);
      CHECK(std::abs(predict_score(clf, fv({x}).x) - expected) <= 1e-9);
    }
    const auto p = predict(clf, {fv({0.4}), fv({10.6})});
    CHECK(p[0].label == 0);
    CHECK(p[1].label == 1);
    // symmetric classes: the midpoint is a coin flip, and 0.5 is a positive
    CHECK(predict_score(clf, fv({5.5}).x) == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("every variant separates separable blobs") {
    const auto d = blobs(40, 40, 1);
    ForestConfig cfg;
    cfg.n_trees = 25;
    for (auto v : kAll) {
      const auto clf = train(v, d.X, d.y, cfg, 7);
      const auto p = predict(clf, d.X);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < p.size(); ++i) correct += p[i].label == d.y[i];
      CHECK_MESSAGE(correct == d.X.size(), to_string(v));
    }
  }

  TEST_CASE("BRF bootstraps are balanced in every tree") {
    const auto d = blobs(180, 20, 2);
    ForestConfig cfg;
    cfg.n_trees = 60;
    const auto clf = train(ClassifierVariant::brf, d.X, d.y, cfg, 3);
    REQUIRE(clf.trees.size() == 60);
    for (const auto& t : clf.trees) {
      CHECK(t.bootstrap_counts[0] == t.bootstrap_counts[1]);
      CHECK(t.bootstrap_counts[1] == 20);
      // the root holds the whole bootstrap: its class-1 fraction must be 1/2
      CHECK(t.nodes.front().value == 0.5);
    }
    // an ordinary bootstrap reflects the 9:1 imbalance instead
    const auto rf = train(ClassifierVariant::rf, d.X, d.y, cfg, 3);
    std::size_t unbalanced = 0;
    for (const auto& t : rf.trees) unbalanced += t.bootstrap_counts[0] != t.bootstrap_counts[1];
    CHECK(unbalanced == rf.trees.size());
  }

  TEST_CASE("BSRF weights balance each bootstrap") {
    const auto d = blobs(180, 20, 4);
    ForestConfig cfg;
    cfg.n_trees = 20;
    const auto clf = train(ClassifierVariant::bsrf, d.X, d.y, cfg, 5);
    for (const auto& t : clf.trees) CHECK(t.nodes.front().value == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("single-class training is fatal") {
    const std::vector<FeatureVector> X{fv({0}), fv({1})};
    try {
      train(ClassifierVariant::brf, X, {1, 1}, {}, 1);
      FAIL("single class accepted");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("degenerate training set") != std::string::npos);
    }
  }

  TEST_CASE("training is deterministic tree by tree") {
    const auto d = blobs(50, 30, 6);
    ForestConfig cfg;
    cfg.n_trees = 15;
    for (auto v : {ClassifierVariant::rf, ClassifierVariant::brf, ClassifierVariant::bsrf}) {
      const auto a = train(v, d.X, d.y, cfg, 11);
      const auto b = train(v, d.X, d.y, cfg, 11);
      CHECK(a.trees == b.trees);
      cfg.workers = 3;
      CHECK(train(v, d.X, d.y, cfg, 11).trees == a.trees);
      cfg.workers = 1;
    }
  }

  TEST_CASE("forest scores are tree averages in [0, 1]") {
    const auto d = blobs(30, 30, 8);
    ForestConfig cfg;
    cfg.n_trees = 10;
    cfg.max_depth = 2;
    auto clf = train(ClassifierVariant::rf, d.X, d.y, cfg, 2);
    Rng rng(1);
    for (int i = 0; i < 30; ++i) {
      const Vector x = 6 * oracle::random_normal(2, 1, rng);
      double mean = 0;
      for (const auto& t : clf.trees) mean += tree_score(t, x);
      mean /= static_cast<double>(clf.trees.size());
      const double s = predict_score(clf, x);
      CHECK(s == doctest::Approx(mean).epsilon(1e-12));
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      // adding a tree with leaf value f moves the mean toward f
      auto bigger = clf;
      bigger.trees.push_back(clf.trees.front());
      const double f = tree_score(clf.trees.front(), x);
      const double s2 = predict_score(bigger, x);
      CHECK(std::abs(s2 - f) <= std::abs(s - f) + 1e-15);
    }
    // a forest of identical trees scores like any one of them
    auto same = clf;
    same.trees.assign(5, clf.trees.front());
    const Vector x = d.X[3].x;
    CHECK(predict_score(same, x) == doctest::Approx(tree_score(clf.trees.front(), x)));
  }

  TEST_CASE("prediction dimension mismatch is fatal") {
    const auto d = blobs(10, 10, 9);
    const auto clf = train(ClassifierVariant::nb, d.X, d.y, {}, 1);
    CHECK_THROWS_AS(predict(clf, {fv({1, 2, 3})}), Error);
  }

  TEST_CASE("featurize") {
    Matrix rows(2, 2);
    rows << 1, 2, 3, 5;
    const auto em = embedding_with({"a", "b"}, rows);
    TokenizedDocument single;
    single.tokens = single.ngrams = {"a"};
    CHECK(featurize(single, em, nullptr).x == rows.row(0).transpose());

    TokenizedDocument mixed;
    mixed.tokens = mixed.ngrams = {"a", "b", "zzz"};
    SedoAlignment a;
    a.W.resize(3, 2);
    a.W << 1, 0, 0, 1, 1, -1;
    a.solved = true;
    const auto f = featurize(mixed, em, &a);
    const Vector expected = (a.W * rows.row(0).transpose() + a.W * rows.row(1).transpose()) / 2;
    CHECK((f.x - expected).norm() <= 1e-12);
    CHECK(f.oov_fraction == doctest::Approx(1.0 / 3));

    SedoAlignment id;
    id.W = Matrix::Identity(2, 2);
    id.solved = true;
    CHECK(featurize(mixed, em, &id).x == featurize(mixed, em, nullptr).x);

    TokenizedDocument oov;
    oov.tokens = oov.ngrams = {"q"};
    const auto z = featurize(oov, em, nullptr);
    CHECK(z.x.isZero(0));
    CHECK(z.oov_fraction == 1.0);
  }

  TEST_CASE("classifier json round-trip") {
    const auto d = blobs(20, 20, 10);
    ForestConfig cfg;
    cfg.n_trees = 5;
    for (auto v : kAll) {
      const auto clf = train(v, d.X, d.y, cfg, 4, "anxiety");
      const auto back = classifier_from_json(to_json(clf));
      CHECK(back.variant == v);
      CHECK(back.category == "anxiety");
      CHECK(back.trees == clf.trees);
      CHECK(back.nb == clf.nb);
      for (const auto& x : d.X) CHECK(predict_score(back, x.x) == predict_score(clf, x.x));
    }
  }
}
