#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurosym/common.hpp"
#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/sedo.hpp"

namespace neurosym {

enum class ClassifierVariant { nb, rf, brf, bsrf };

std::string_view to_string(ClassifierVariant v);
ClassifierVariant parse_classifier_variant(std::string_view s);

struct FeatureVector {
  std::string doc_id;
  Vector x;
  double oov_fraction = 0;
};

/// Mean of the in-vocab token and hashtag vectors, carried through W when an
/// alignment is given. All-OOV documents map to the zero vector.
FeatureVector featurize(const TokenizedDocument& doc, const EmbeddingModel& em, const SedoAlignment* alignment);

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf = 1;
  int features_per_split = 0;  // 0 = floor(sqrt(d))
  unsigned workers = 1;
};

struct GaussianNB {
  Eigen::Matrix<double, 2, Eigen::Dynamic> means;
  Eigen::Matrix<double, 2, Eigen::Dynamic> variances;
  std::array<double, 2> priors{};
  double epsilon = 0;

  bool operator==(const GaussianNB&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;  // class-1 fraction (class weighted for BSRF)

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // pre-order, root first
  std::array<std::size_t, 2> bootstrap_counts{};

  bool operator==(const DecisionTree&) const = default;
};

struct TrainedClassifier {
  ClassifierVariant variant = ClassifierVariant::rf;
  std::string category;
  ForestConfig config;
  std::uint64_t seed = 0;
  Eigen::Index dim = 0;
  GaussianNB nb;
  std::vector<DecisionTree> trees;
};

/// Trains one binary classifier. Throws when y holds a single class.
TrainedClassifier train(ClassifierVariant variant, const std::vector<FeatureVector>& X, const std::vector<int>& y,
                        const ForestConfig& cfg, std::uint64_t seed, std::string category = {});

struct Prediction {
  int label = 0;
  double score = 0;
};

/// NB: posterior of class 1. Forests: mean leaf value. label = score >= 0.5.
std::vector<Prediction> predict(const TrainedClassifier& clf, const std::vector<FeatureVector>& X);
double predict_score(const TrainedClassifier& clf, const Vector& x);
double tree_score(const DecisionTree& tree, const Vector& x);

/// Gaussian NB log-likelihood based posterior P(y = 1 | x).
double nb_posterior(const GaussianNB& nb, const Vector& x);

nlohmann::json to_json(const TrainedClassifier& clf);
TrainedClassifier classifier_from_json(const nlohmann::json& j);

}  // namespace neurosym
