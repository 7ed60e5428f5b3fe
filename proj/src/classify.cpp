#include "neurosym/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace neurosym {

using nlohmann::json;

std::string_view to_string(ClassifierVariant v) {
  switch (v) {
    case ClassifierVariant::nb:
      return "nb";
    case ClassifierVariant::rf:
      return "rf";
    case ClassifierVariant::brf:
      return "brf";
    case ClassifierVariant::bsrf:
      break;
  }
  return "bsrf";
}

ClassifierVariant parse_classifier_variant(std::string_view s) {
  const auto lower = to_lower_ascii(s);
  if (lower == "nb") return ClassifierVariant::nb;
  if (lower == "rf") return ClassifierVariant::rf;
  if (lower == "brf") return ClassifierVariant::brf;
  if (lower == "bsrf") return ClassifierVariant::bsrf;
  throw Error("unknown classifier variant: " + std::string(s));
}

FeatureVector featurize(const TokenizedDocument& doc, const EmbeddingModel& em, const SedoAlignment* alignment) {
  const auto terms = content_terms(doc);
  const auto emb = doc_embedding(em, terms);
  std::size_t known = 0;
  for (const auto& t : terms)
    if (em.resolve(t)) ++known;
  FeatureVector f;
  f.doc_id = doc.id;
  f.oov_fraction = terms.empty() ? 1.0 : 1.0 - static_cast<double>(known) / static_cast<double>(terms.size());
  f.x = alignment ? modulate(*alignment, emb.vector) : emb.vector;
  return f;
}

namespace {

struct Sample {
  std::size_t row;
  double weight;
  int label;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<FeatureVector>& X, const ForestConfig& cfg, Rng& rng)
      : X_(X), cfg_(cfg), rng_(rng), dim_(X.front().x.size()) {
    mtry_ = cfg.features_per_split > 0 ? cfg.features_per_split
                                        : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(dim_)))));
    mtry_ = std::min<int>(mtry_, static_cast<int>(dim_));
  }

  DecisionTree build(std::vector<Sample> samples) {
    DecisionTree tree;
    grow(tree, samples, 0);
    return tree;
  }

 private:
  static double gini(double w0, double w1) {
    const double t = w0 + w1;
    if (t <= 0) return 0;
    const double p = w1 / t;
    return 2.0 * p * (1.0 - p);
  }

  int grow(DecisionTree& tree, std::vector<Sample>& samples, int depth) {
    double w0 = 0, w1 = 0;
    for (const auto& s : samples) (s.label ? w1 : w0) += s.weight;
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, (w0 + w1) > 0 ? w1 / (w0 + w1) : 0.0});

    const bool pure = w0 == 0 || w1 == 0;
    const bool depth_cap = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, cfg_.min_leaf));
    if (pure || depth_cap || samples.size() < 2 * min_leaf) return id;

    // features in random order; the first mtry are the candidates, later
    // ones are only consulted if none of those admits a split
    std::vector<int> features(static_cast<std::size_t>(dim_));
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t i = features.size(); i > 1; --i) std::swap(features[i - 1], features[uniform_index(rng_, i)]);

    int best_feature = -1;
    double best_threshold = 0, best_impurity = std::numeric_limits<double>::infinity();
    std::vector<Sample> sorted = samples;
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      if (static_cast<int>(fi) >= mtry_ && best_feature >= 0) break;
      const int f = features[fi];
      std::sort(sorted.begin(), sorted.end(), [&](const Sample& a, const Sample& b) {
        return X_[a.row].x(f) < X_[b.row].x(f);
      });
      double l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        (sorted[i].label ? l1 : l0) += sorted[i].weight;
        const double a = X_[sorted[i].row].x(f);
        const double b = X_[sorted[i + 1].row].x(f);
        if (!(a < b)) continue;
        if (i + 1 < min_leaf || sorted.size() - i - 1 < min_leaf) continue;
        const double r0 = w0 - l0, r1 = w1 - l1;
        const double impurity = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = a + (b - a) / 2;
          if (!(best_threshold > a && best_threshold <= b)) best_threshold = b;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Sample> left, right;
    for (const auto& s : samples) (X_[s.row].x(best_feature) < best_threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const std::vector<FeatureVector>& X_;
  const ForestConfig& cfg_;
  Rng& rng_;
  Eigen::Index dim_;
  int mtry_ = 1;
};

DecisionTree train_tree(ClassifierVariant variant, const std::vector<FeatureVector>& X, const std::vector<int>& y,
                        const std::array<std::vector<std::size_t>, 2>& by_class, const ForestConfig& cfg,
                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> samples;
  const auto n = X.size();
  if (variant == ClassifierVariant::brf) {
    const auto n_min = std::min(by_class[0].size(), by_class[1].size());
    for (int c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < n_min; ++i) {
        const auto row = by_class[c][uniform_index(rng, by_class[c].size())];
        samples.push_back({row, 1.0, c});
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = uniform_index(rng, n);
      samples.push_back({row, 1.0, y[row]});
    }
  }
  std::array<std::size_t, 2> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  if (variant == ClassifierVariant::bsrf) {
    const double total = static_cast<double>(samples.size());
    for (auto& s : samples) s.weight = total / (2.0 * static_cast<double>(counts[static_cast<std::size_t>(s.label)]));
  }
  TreeBuilder builder(X, cfg, rng);
  auto tree = builder.build(std::move(samples));
  tree.bootstrap_counts = counts;
  return tree;
}

GaussianNB train_nb(const std::vector<FeatureVector>& X, const std::vector<int>& y) {
  const auto d = X.front().x.size();
  GaussianNB nb;
  nb.means = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, d);
  nb.variances = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, d);
  std::array<double, 2> counts{};
  Vector overall_mean = Vector::Zero(d);
  for (std::size_t i = 0; i < X.size(); ++i) {
    nb.means.row(y[i]) += X[i].x.transpose();
    overall_mean += X[i].x;
    counts[static_cast<std::size_t>(y[i])] += 1;
  }
  overall_mean /= static_cast<double>(X.size());
  for (int c = 0; c < 2; ++c) nb.means.row(c) /= counts[static_cast<std::size_t>(c)];
  Vector overall_var = Vector::Zero(d);
  for (std::size_t i = 0; i < X.size(); ++i) {
    nb.variances.row(y[i]) += (X[i].x.transpose() - nb.means.row(y[i])).array().square().matrix();
    overall_var += (X[i].x - overall_mean).array().square().matrix();
  }
  overall_var /= static_cast<double>(X.size());
  for (int c = 0; c < 2; ++c) nb.variances.row(c) /= counts[static_cast<std::size_t>(c)];
  nb.epsilon = 1e-9 * overall_var.maxCoeff();
  if (!(nb.epsilon > 0)) nb.epsilon = 1e-9;
  nb.variances.array() += nb.epsilon;
  const double n = static_cast<double>(X.size());
  nb.priors = {counts[0] / n, counts[1] / n};
  return nb;
}

}  // namespace

double nb_posterior(const GaussianNB& nb, const Vector& x) {
  std::array<double, 2> log_joint{};
  for (int c = 0; c < 2; ++c) {
    double lj = std::log(nb.priors[static_cast<std::size_t>(c)]);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double var = nb.variances(c, j);
      const double diff = x(j) - nb.means(c, j);
      lj += -0.5 * std::log(2.0 * M_PI * var) - diff * diff / (2.0 * var);
    }
    log_joint[static_cast<std::size_t>(c)] = lj;
  }
  const double m = std::max(log_joint[0], log_joint[1]);
  const double e0 = std::exp(log_joint[0] - m);
  const double e1 = std::exp(log_joint[1] - m);
  return e1 / (e0 + e1);
}

TrainedClassifier train(ClassifierVariant variant, const std::vector<FeatureVector>& X, const std::vector<int>& y,
                        const ForestConfig& cfg, std::uint64_t seed, std::string category) {
  if (X.empty() || X.size() != y.size()) throw Error("train: feature/label count mismatch or empty training set");
  const auto d = X.front().x.size();
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].x.size() != d) throw Error("train: inconsistent feature dimensions");
    if (y[i] != 0 && y[i] != 1) throw Error("train: labels must be 0 or 1");
    by_class[static_cast<std::size_t>(y[i])].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) throw Error("train: degenerate training set (single class)");

  TrainedClassifier clf;
  clf.variant = variant;
  clf.category = std::move(category);
  clf.config = cfg;
  clf.seed = seed;
  clf.dim = d;
  if (variant == ClassifierVariant::nb) {
    clf.nb = train_nb(X, y);
    return clf;
  }
  if (cfg.n_trees < 1) throw Error("train: n_trees must be >= 1");
  clf.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  const auto work = [&](unsigned w, unsigned stride) {
    for (std::size_t t = w; t < clf.trees.size(); t += stride) {
      clf.trees[t] = train_tree(variant, X, y, by_class, cfg, mix_seed(seed, t));
    }
  };
  if (cfg.workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < cfg.workers; ++w) pool.emplace_back(work, w, cfg.workers);
  }
  return clf;
}

double tree_score(const DecisionTree& tree, const Vector& x) {
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    node = x(n.feature) < n.threshold ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].value;
}

double predict_score(const TrainedClassifier& clf, const Vector& x) {
  if (x.size() != clf.dim) {
    throw Error("predict: feature dim " + std::to_string(x.size()) + " != trained dim " + std::to_string(clf.dim));
  }
  if (clf.variant == ClassifierVariant::nb) return nb_posterior(clf.nb, x);
  double sum = 0;
  for (const auto& t : clf.trees) sum += tree_score(t, x);
  return sum / static_cast<double>(clf.trees.size());
}

std::vector<Prediction> predict(const TrainedClassifier& clf, const std::vector<FeatureVector>& X) {
  std::vector<Prediction> out;
  out.reserve(X.size());
  for (const auto& f : X) {
    const double s = predict_score(clf, f.x);
    out.push_back({s >= 0.5 ? 1 : 0, s});
  }
  return out;
}

namespace {

json tree_to_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    if (n.feature < 0) {
      nodes.push_back({{"leaf", n.value}});
    } else {
      nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"v", n.value}});
    }
  }
  return {{"bootstrap_counts", t.bootstrap_counts}, {"nodes", nodes}};
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  t.bootstrap_counts = j.at("bootstrap_counts").get<std::array<std::size_t, 2>>();
  for (const auto& n : j.at("nodes")) {
    if (n.contains("leaf")) {
      t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, n["leaf"].get<double>()});
    } else {
      t.nodes.push_back(TreeNode{n.at("f").get<int>(), n.at("t").get<double>(), n.at("l").get<int>(),
                                 n.at("r").get<int>(), n.at("v").get<double>()});
    }
  }
  return t;
}

std::vector<double> row_values(const Eigen::Matrix<double, 2, Eigen::Dynamic>& m, int r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

}  // namespace

json to_json(const TrainedClassifier& clf) {
  json j{{"variant", to_string(clf.variant)},
         {"category", clf.category},
         {"seed", clf.seed},
         {"dim", clf.dim},
         {"config",
          {{"n_trees", clf.config.n_trees},
           {"max_depth", clf.config.max_depth},
           {"min_leaf", clf.config.min_leaf},
           {"features_per_split", clf.config.features_per_split}}}};
  if (clf.variant == ClassifierVariant::nb) {
    j["nb"] = {{"means", {row_values(clf.nb.means, 0), row_values(clf.nb.means, 1)}},
               {"variances", {row_values(clf.nb.variances, 0), row_values(clf.nb.variances, 1)}},
               {"priors", clf.nb.priors},
               {"epsilon", clf.nb.epsilon}};
  } else {
    json trees = json::array();
    for (const auto& t : clf.trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  }
  return j;
}

TrainedClassifier classifier_from_json(const json& j) {
  TrainedClassifier clf;
  clf.variant = parse_classifier_variant(j.at("variant").get<std::string>());
  clf.category = j.value("category", std::string());
  clf.seed = j.at("seed").get<std::uint64_t>();
  clf.dim = j.at("dim").get<Eigen::Index>();
  const auto& c = j.at("config");
  clf.config.n_trees = c.value("n_trees", 100);
  clf.config.max_depth = c.value("max_depth", 0);
  clf.config.min_leaf = c.value("min_leaf", 1);
  clf.config.features_per_split = c.value("features_per_split", 0);
  if (clf.variant == ClassifierVariant::nb) {
    const auto& nb = j.at("nb");
    clf.nb.means.resize(2, clf.dim);
    clf.nb.variances.resize(2, clf.dim);
    for (int r = 0; r < 2; ++r) {
      const auto m = nb.at("means")[static_cast<std::size_t>(r)].get<std::vector<double>>();
      const auto v = nb.at("variances")[static_cast<std::size_t>(r)].get<std::vector<double>>();
      for (Eigen::Index k = 0; k < clf.dim; ++k) {
        clf.nb.means(r, k) = m.at(static_cast<std::size_t>(k));
        clf.nb.variances(r, k) = v.at(static_cast<std::size_t>(k));
      }
    }
    clf.nb.priors = nb.at("priors").get<std::array<double, 2>>();
    clf.nb.epsilon = nb.at("epsilon").get<double>();
  } else {
    for (const auto& t : j.at("trees")) clf.trees.push_back(tree_from_json(t));
  }
  return clf;
}

}  // namespace neurosym
