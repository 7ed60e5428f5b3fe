#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neurosym/common.hpp"
#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"

namespace neurosym {

enum class TopicVariant { unigram_lda, ngram_nlda };

std::string_view to_string(TopicVariant v);
TopicVariant parse_topic_variant(std::string_view s);

struct LdaConfig {
  int topics = 20;
  // Negative means the 50/K default.
  double alpha = -1.0;
  double beta = 0.01;
  int iters = 1000;
  int burn_in = 200;
  int fold_in_sweeps = 50;
  std::uint64_t min_count = 1;
  std::uint64_t seed = 1;

  double effective_alpha() const { return alpha > 0 ? alpha : 50.0 / topics; }
};

struct TopicModel {
  int topics = 0;
  double alpha = 0;
  double beta = 0;
  TopicVariant variant = TopicVariant::unigram_lda;
  std::uint64_t seed = 0;
  int fold_in_sweeps = 50;
  std::vector<std::string> vocab;
  Matrix phi;    // K x |V|
  Matrix theta;  // |D| x K, may be empty after load
  std::vector<std::string> doc_ids;

  std::optional<std::size_t> term_index(const std::string& term) const;
  std::optional<std::size_t> doc_index(const std::string& id) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> term_index_;
  std::unordered_map<std::string, std::size_t> doc_index_;
};

/// Collapsed Gibbs sampler state over integer-coded documents.
class GibbsSampler {
 public:
  GibbsSampler(std::vector<std::vector<std::size_t>> docs, std::size_t vocab_size, int topics, double alpha,
               double beta, std::uint64_t seed);

  void sweep();

  /// (n_kw + beta) / (n_k + V beta)
  Matrix phi() const;
  /// (n_dk + alpha) / (n_d + K alpha)
  Matrix theta() const;

  /// Sum_k n_dk == |d| for every document, and the topic-word, topic-total
  /// and document-topic tables all count the same tokens.
  bool counts_consistent() const;

  const std::vector<std::vector<int>>& doc_topic_counts() const { return n_dk_; }
  const std::vector<std::vector<int>>& topic_word_counts() const { return n_kw_; }
  const std::vector<std::vector<std::size_t>>& docs() const { return docs_; }

 private:
  std::vector<std::vector<std::size_t>> docs_;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<int>> n_dk_;
  std::vector<std::vector<int>> n_kw_;
  std::vector<int> n_k_;
  std::size_t vocab_size_;
  int topics_;
  double alpha_;
  double beta_;
  Rng rng_;
  std::vector<double> weights_;
};

using SweepObserver = std::function<void(const GibbsSampler&, int sweep)>;

/// Token stream the variant models: tokens for LDA, n-grams for nLDA.
const std::vector<std::string>& topic_stream(const TokenizedDocument& doc, TopicVariant variant);

/// phi and theta are averages of the smoothed estimates over every sweep
/// after burn-in.
TopicModel train_lda(const CorpusSnapshot& corpus, TopicVariant variant, const LdaConfig& cfg,
                     const SweepObserver& observer = {});

struct TopicMixture {
  Vector distribution;
  bool no_known_terms = false;
};

/// Fold-in Gibbs inference with phi held fixed. Deterministic for a given
/// model and term list.
TopicMixture doc_topics(const TopicModel& model, const std::vector<std::string>& terms);
TopicMixture doc_topics(const TopicModel& model, const TokenizedDocument& doc);

/// Training-time theta row when the document was in the training corpus,
/// fold-in otherwise.
Vector topic_mixture_for(const TopicModel& model, const TokenizedDocument& doc);

struct TopicEmbeddings {
  Matrix vectors;             // K x dim
  std::vector<bool> missing;  // topic had no in-vocab term
};

/// Topic k's vector is the phi-weighted mean of the embeddings of its top_k
/// most probable terms that the embedding model knows.
TopicEmbeddings topic_embedding(const TopicModel& tm, const EmbeddingModel& em, int top_k);

void save_topic_model(const TopicModel& model, const std::filesystem::path& path, bool persist_theta);
TopicModel load_topic_model(const std::filesystem::path& path);

}  // namespace neurosym
