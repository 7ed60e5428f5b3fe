#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/lexicon.hpp"
#include "neurosym/semantic.hpp"
#include "neurosym/topic.hpp"

namespace neurosym {

/// Per-document, per-category index score. h_total is the sum of the
/// mapping term and the two topic proximity terms; nhs is h_total over the
/// category maximum of its batch.
struct IndexScore {
  std::string doc_id;
  std::string category;
  double h_ng = 0;
  double h_lda = 0;
  double h_nlda = 0;
  double h_total = 0;
  double nhs = 0;
};

struct WeakLabel {
  std::string doc_id;
  std::string category;
  int label = 0;
  double nhs = 0;
  double tau_label = 0;
};

/// Weight-normalized mean of a category's in-vocab term vectors; zero when
/// none is in vocabulary.
Vector category_embedding(const Lexicon& lex, const std::string& category, const EmbeddingModel& em);

/// Mean over the document's in-vocab n-grams and hashtags g of
/// weight(t*) * max(0, cos(g, t*)), t* the closest category term.
double semantic_mapping_score(const TokenizedDocument& doc, const std::string& category, const Lexicon& lex,
                              const EmbeddingModel& em);

/// sum_k theta[k] * max(0, cos(topic_k, category)).
double semantic_proximity_score(const Vector& theta, const TopicEmbeddings& topics, const Vector& category_vector);

double semantic_proximity_score(const TokenizedDocument& doc, const std::string& category, const TopicModel& tm,
                                const Lexicon& lex, const EmbeddingModel& em, int top_k);

/// Precomputes lexicon vectors, category embeddings and topic embeddings so
/// a whole corpus can be scored against fixed models.
class IndexScorer {
 public:
  IndexScorer(const Lexicon& lex, const EmbeddingModel& em, const TopicModel& unigram, const TopicModel& ngram,
              int top_k);

  double mapping(const TokenizedDocument& doc, const std::string& category) const;
  IndexScore score(const TokenizedDocument& doc, const std::string& category) const;
  std::vector<std::string> categories() const;

 private:
  struct Category {
    std::vector<std::pair<double, Vector>> terms;  // (weight, vector)
    Vector embedding;
  };
  const Category& category(const std::string& name) const;

  const EmbeddingModel& em_;
  const TopicModel& unigram_;
  const TopicModel& ngram_;
  std::map<std::string, Category> categories_;
  TopicEmbeddings unigram_topics_;
  TopicEmbeddings ngram_topics_;
};

IndexScore index_score(const TokenizedDocument& doc, const std::string& category, const Lexicon& lex,
                       const EmbeddingModel& em, const TopicModel& unigram, const TopicModel& ngram, int top_k);

struct NormalizedBatch {
  std::vector<IndexScore> scores;
  bool nonpositive_max = false;
};

/// Divides every h_total by the batch maximum. All scores must share one
/// category. A maximum <= 0 sets every nhs to 0 and raises the flag.
NormalizedBatch normalize_scores(std::vector<IndexScore> batch);

/// label = 1 iff nhs >= tau_label.
std::vector<WeakLabel> assign_labels(const std::vector<IndexScore>& batch, double tau_label);

/// `batch`, when given, identifies the normalization batch on every record.
void save_labels_jsonl(const std::vector<IndexScore>& scores, const std::vector<WeakLabel>& labels,
                       const std::filesystem::path& path, const std::string& batch = {});

struct LabelRecord {
  IndexScore score;
  int label = 0;
};
std::vector<LabelRecord> load_labels_jsonl(const std::filesystem::path& path);

}  // namespace neurosym
