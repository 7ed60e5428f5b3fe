#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neurosym/common.hpp"
#include "neurosym/corpus.hpp"

namespace neurosym {

struct Vocab {
  std::vector<std::string> terms;
  std::vector<std::uint64_t> counts;
  std::uint64_t min_count = 1;

  std::size_t size() const { return terms.size(); }
  bool empty() const { return terms.empty(); }
  std::optional<std::size_t> find(std::string_view term) const;

  /// Builds from (term, count) pairs; keeps count >= min_count and orders by
  /// (count desc, term asc).
  static Vocab from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                           std::uint64_t min_count);

  /// Builds from parallel term/count lists, preserving their order.
  static Vocab from_terms(std::vector<std::string> terms, std::vector<std::uint64_t> counts,
                          std::uint64_t min_count);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Vocabulary over every document's n-grams and hashtags. Throws when no
/// term reaches min_count.
Vocab build_vocab(const CorpusSnapshot& corpus, std::uint64_t min_count);

struct TrainConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  // Frequent-term subsampling threshold; <= 0 or infinity disables it.
  double subsample = 1e-5;
  std::uint64_t seed = 1;
  // 1 = deterministic. More workers update vectors without synchronization.
  unsigned workers = 1;
  // Subtract the mean input vector after training. Removes the component
  // every vector shares when a few frequent terms dominate all contexts.
  bool center = false;
};

struct EmbeddingModel {
  Vocab vocab;
  int dim = 0;
  RowMatrix input;   // |V| x dim
  RowMatrix output;  // |V| x dim
  TrainConfig config;

  /// Row index for a term; falls back to the lemmatized form of each
  /// underscore-separated part so lexicon surface forms match corpus lemmas.
  std::optional<std::size_t> resolve(std::string_view term) const;

  std::optional<Vector> vector(std::string_view term) const;
};

/// Subtracts the mean input vector from every input vector.
void center_vectors(EmbeddingModel& model);

/// Input vectors uniform in [-0.5/dim, 0.5/dim], output vectors zero.
EmbeddingModel initialize_model(Vocab vocab, const TrainConfig& cfg);

/// Skip-gram with negative sampling over each document's n-gram positions.
/// Every n-gram starting at token i occupies position i; hashtags follow the
/// tokens as extra positions. Throws on non-finite vectors.
EmbeddingModel train_skipgram(const CorpusSnapshot& corpus, Vocab vocab, const TrainConfig& cfg);

/// Continues training `base` on a new corpus. Terms of the corpus reaching
/// min_count that `base` lacks get freshly initialized rows.
EmbeddingModel fine_tune_embeddings(const EmbeddingModel& base, const CorpusSnapshot& corpus,
                                    std::uint64_t min_count, const TrainConfig& cfg);

/// Negative log-likelihood of one (center, context) pair with sampled
/// negatives: -log s(u_ctx.v) - sum log s(-u_neg.v).
double sgns_pair_loss(const Vector& center, const Vector& context, const std::vector<Vector>& negatives);

struct SgnsGradient {
  Vector center;
  Vector context;
  std::vector<Vector> negatives;
};

/// Analytic gradient of sgns_pair_loss with respect to each argument.
SgnsGradient sgns_pair_gradient(const Vector& center, const Vector& context,
                                const std::vector<Vector>& negatives);

/// One SGD step on the pair objective, exactly as the trainer applies it.
void apply_sgns_update(EmbeddingModel& model, std::size_t center, std::size_t context,
                       std::span<const std::size_t> negatives, double lr);

/// Probability that one occurrence of a term with this count survives
/// subsampling; 1 when subsampling is disabled.
double keep_probability(std::uint64_t count, std::uint64_t total, double subsample);

struct DocEmbedding {
  Vector vector;
  bool all_oov = false;
};

DocEmbedding doc_embedding(const EmbeddingModel& model, const std::vector<std::string>& tokens);

/// a.b / (|a||b|), clamped to [-1, 1]; 0 when either norm is zero.
double cosine(const Vector& a, const Vector& b);

/// word2vec text format of the input vectors.
void save_word2vec_text(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_word2vec_text(const std::filesystem::path& path);

}  // namespace neurosym
