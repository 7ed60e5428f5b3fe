#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"

namespace neurosym {

enum class Provenance { seed, enriched };

struct LexiconTerm {
  std::string term;
  double weight = 1.0;
  Provenance provenance = Provenance::seed;

  bool operator==(const LexiconTerm&) const = default;
};

/// Immutable, versioned category -> weighted term lists.
struct Lexicon {
  int version = 1;
  std::map<std::string, std::vector<LexiconTerm>> categories;
  std::string created_at;

  bool contains(const std::string& term) const;
  const std::vector<LexiconTerm>& category(const std::string& name) const;
  std::vector<std::string> category_names() const;

  bool operator==(const Lexicon&) const = default;
};

/// Lowercases and joins whitespace-separated words with '_'.
std::string normalize_term(std::string_view term);

/// Validates every invariant; throws Error naming the offending term.
void validate(const Lexicon& lex);

Lexicon lexicon_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Lexicon& lex);
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const Lexicon& lex, const std::filesystem::path& path);

/// Union of several lexicons' categories; the first occurrence of a term in a
/// category wins. Version is the max of the inputs.
Lexicon merge_lexicons(const std::vector<Lexicon>& parts);

struct NeologismConfig {
  double min_rate = 0.5;  // occurrences per 1000 posts
  double growth = 3.0;
};

struct NeologismCandidate {
  std::string term;
  double window_per_capita = 0;
  double baseline_per_capita = 0;
  std::string best_category;
  double similarity = 0;
};

/// 1000 * occurrences / documents for every n-gram and hashtag of the corpus.
std::map<std::string, double> per_capita_rates(const CorpusSnapshot& corpus);

/// Terms of the window that the lexicon lacks, that reach min_rate, that
/// grew by at least `growth` over the baseline rate, and that the embedding
/// model knows. Sorted by similarity desc, then term.
std::vector<NeologismCandidate> detect_neologisms(const CorpusSnapshot& window, const CorpusSnapshot& baseline,
                                                  const Lexicon& lex, const EmbeddingModel& em,
                                                  const NeologismConfig& cfg);

/// New lexicon, version + 1, with every candidate whose similarity reaches
/// tau_sim appended to its best category (weight = similarity).
Lexicon enrich(const Lexicon& lex, const std::vector<NeologismCandidate>& candidates, double tau_sim);

}  // namespace neurosym
