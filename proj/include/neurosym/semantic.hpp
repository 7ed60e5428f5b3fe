#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/lexicon.hpp"

namespace neurosym {

/// Lexicon terms resolved against one embedding model. Terms the model does
/// not know are counted in `skipped`.
struct LexiconIndex {
  struct Entry {
    std::string category;
    std::string term;
    double weight;
    Vector vector;
  };
  std::vector<Entry> entries;
  std::size_t skipped = 0;
};

LexiconIndex index_lexicon(const Lexicon& lex, const EmbeddingModel& em);

struct RelevanceScore {
  std::string doc_id;
  double score = 0;
  std::string matched_term;
  bool no_lexicon_terms = false;
};

/// Max over lexicon terms of cosine(doc embedding, term vector).
RelevanceScore relevance(const TokenizedDocument& doc, const LexiconIndex& lex, const EmbeddingModel& em);
RelevanceScore relevance(const TokenizedDocument& doc, const Lexicon& lex, const EmbeddingModel& em);

/// Nearest-rank percentile: sorted ascending, index ceil(p/100 * n) - 1.
double compute_threshold(std::vector<double> scores, double percentile);

struct ThresholdPolicy {
  double percentile = 75.0;
  std::size_t sample_size = 10000;
  std::size_t min_documents = 100;
  double fallback = 0.6;
  std::uint64_t seed = 1;
};

/// Percentile of a seeded sample of the scores, or the fallback constant
/// when there are fewer than min_documents scores.
double choose_threshold(const std::vector<double>& scores, const ThresholdPolicy& policy);

struct FilterResult {
  CorpusSnapshot retained;
  std::vector<RelevanceScore> scores;  // every input document, in order
};

/// Keeps documents scoring strictly above tau. tau <= -1 keeps everything.
FilterResult filter(const CorpusSnapshot& corpus, const LexiconIndex& lex, const EmbeddingModel& em, double tau);
/// Same, from precomputed scores aligned with the corpus documents.
FilterResult filter_by_scores(const CorpusSnapshot& corpus, std::vector<RelevanceScore> scores, double tau);

void save_scores_jsonl(const std::vector<RelevanceScore>& scores, const std::filesystem::path& path);

struct GazetteerEntry {
  std::string name;
  std::string admin1;
  std::string country;
  double lat = 0;
  double lon = 0;
};

struct LocationMatch {
  std::string name;
  std::string admin1;
  std::string country;

  bool operator==(const LocationMatch&) const = default;
};

class Gazetteer {
 public:
  explicit Gazetteer(std::vector<GazetteerEntry> entries);

  /// TSV with a header row: name, admin1, country, lat, lon.
  static Gazetteer load(const std::filesystem::path& path);

  const std::vector<GazetteerEntry>& entries() const { return entries_; }
  /// First entry with this space-joined lowercase name.
  const GazetteerEntry* lookup(const std::string& name) const;
  std::size_t max_tokens() const { return max_tokens_; }

 private:
  std::vector<GazetteerEntry> entries_;
  std::map<std::string, std::size_t> by_name_;
  std::size_t max_tokens_ = 1;
};

/// Longest-match scan over windows of up to three tokens, then the location
/// hint. Repeated rows are reported once, in first-seen order.
std::vector<LocationMatch> extract_locations(const std::vector<std::string>& tokens,
                                             const std::optional<std::string>& location_hint, const Gazetteer& gaz);
std::vector<LocationMatch> extract_locations(const RawDocument& doc, const Gazetteer& gaz);

struct Keyphrases {
  std::vector<std::pair<std::string, double>> phrases;  // similarity desc
  std::vector<std::string> dropped_oov;
};

/// Multi-word n-grams and hashtags whose best cosine to a lexicon term
/// reaches tau_kp.
Keyphrases extract_keyphrases(const TokenizedDocument& doc, const LexiconIndex& lex, const EmbeddingModel& em,
                              double tau_kp);

}  // namespace neurosym
