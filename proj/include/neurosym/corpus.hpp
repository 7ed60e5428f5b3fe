#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace neurosym {

enum class Source { twitter, reddit, news, other };

Source parse_source(std::string_view s);
std::string_view to_string(Source s);

struct RawDocument {
  std::string id;
  std::string text;
  std::string timestamp;
  Source source = Source::other;
  std::optional<std::string> location_hint;
  // Optional per-category gold labels ("labels" field); used only for evaluation.
  std::map<std::string, int> gold;
};

struct IngestResult {
  std::vector<RawDocument> documents;
  std::size_t skipped = 0;
  std::vector<std::size_t> failed_lines;  // 1-based, first 10 only
};

/// Reads documents.jsonl. Malformed lines (bad JSON, missing id/text, blank
/// text, duplicate id) are skipped and counted. Throws when the file cannot
/// be read or more than half of the nonblank lines are malformed.
IngestResult ingest_jsonl(const std::filesystem::path& path);
IngestResult ingest_jsonl_string(std::string_view contents);

struct PreprocessConfig {
  int n_max = 3;
  std::unordered_set<std::string> stopwords;
  std::string stopwords_digest;
  bool strip_urls = true;

  /// Builds a config from a stopword file (one word per line, '#' comments).
  static PreprocessConfig with_stopword_file(const std::filesystem::path& path, int n_max = 3);
};

/// Loads {"n_max", "stopwords_digest", "strip_urls", "stopwords_path"?}.
/// The stopword file defaults to stopwords.txt next to the config and must
/// hash to stopwords_digest when one is given.
PreprocessConfig load_preprocess_config(const std::filesystem::path& path);
nlohmann::json to_json(const PreprocessConfig& cfg);

struct TokenizedDocument {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> ngrams;
  std::vector<std::string> hashtags;
  std::string timestamp;
  Source source = Source::other;
  std::optional<std::string> location_hint;
  std::map<std::string, int> gold;

  bool operator==(const TokenizedDocument&) const = default;
};

/// Suffix-rule lemmatizer: -ies -> y, -ing, -ed, -s, each guarded so the
/// remaining stem keeps at least three characters and a vowel. A doubled
/// final consonant left by -ing/-ed is collapsed (running -> run).
std::string lemmatize(std::string_view word);

/// Contiguous n-grams joined by '_' for n = 1..n_max, grouped by n and in
/// document order within each group.
std::vector<std::string> generate_ngrams(const std::vector<std::string>& tokens, int n_max);

/// Lowercased word split with no stopword removal or lemmatization. Used by
/// location matching, which needs surface forms.
std::vector<std::string> surface_tokens(std::string_view text);

TokenizedDocument preprocess(const RawDocument& doc, const PreprocessConfig& cfg);

/// Terms that carry embeddings for a document: its n-grams followed by its
/// hashtags.
std::vector<std::string> vocabulary_terms(const TokenizedDocument& doc);

/// Unigram tokens followed by hashtags.
std::vector<std::string> content_terms(const TokenizedDocument& doc);

class CorpusSnapshot {
 public:
  CorpusSnapshot() = default;
  CorpusSnapshot(std::vector<TokenizedDocument> documents, std::string created_from,
                 PreprocessConfig config);

  const std::vector<TokenizedDocument>& documents() const { return documents_; }
  const std::string& created_from() const { return created_from_; }
  const PreprocessConfig& preprocess_config() const { return config_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  /// Index of the document with this id, if present.
  std::optional<std::size_t> find(std::string_view id) const;

  /// New snapshot holding the documents at the given indices, in order.
  CorpusSnapshot subset(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<TokenizedDocument> documents_;
  std::string created_from_;
  PreprocessConfig config_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Preprocesses every document; `workers` > 1 splits the work across threads.
CorpusSnapshot build_snapshot(const std::vector<RawDocument>& docs, const PreprocessConfig& cfg,
                              std::string created_from, unsigned workers = 1);

void save_snapshot(const CorpusSnapshot& snapshot, const std::filesystem::path& path);
CorpusSnapshot load_snapshot(const std::filesystem::path& path);

nlohmann::json to_json(const RawDocument& doc);
void save_raw_jsonl(const std::vector<RawDocument>& docs, const std::filesystem::path& path);

}  // namespace neurosym
