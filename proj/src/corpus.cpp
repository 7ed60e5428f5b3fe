#include "neurosym/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "neurosym/common.hpp"

namespace neurosym {

using nlohmann::json;

Source parse_source(std::string_view s) {
  const auto lower = to_lower_ascii(s);
  if (lower == "twitter") return Source::twitter;
  if (lower == "reddit") return Source::reddit;
  if (lower == "news") return Source::news;
  return Source::other;
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::twitter:
      return "twitter";
    case Source::reddit:
      return "reddit";
    case Source::news:
      return "news";
    case Source::other:
      break;
  }
  return "other";
}

namespace {

std::optional<RawDocument> parse_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("id") || !j.contains("text") || !j["id"].is_string() || !j["text"].is_string()) {
    return std::nullopt;
  }
  RawDocument doc;
  doc.id = j["id"].get<std::string>();
  doc.text = j["text"].get<std::string>();
  if (doc.id.empty() || trim(doc.text).empty()) return std::nullopt;
  if (auto it = j.find("timestamp"); it != j.end() && it->is_string()) doc.timestamp = *it;
  if (auto it = j.find("source"); it != j.end() && it->is_string()) {
    doc.source = parse_source(it->get<std::string>());
  }
  if (auto it = j.find("location_hint"); it != j.end() && it->is_string()) {
    doc.location_hint = it->get<std::string>();
  }
  if (auto it = j.find("labels"); it != j.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number_integer() && !v.is_boolean()) return std::nullopt;
      doc.gold[k] = v.is_boolean() ? static_cast<int>(v.get<bool>()) : v.get<int>();
    }
  }
  return doc;
}

}  // namespace

IngestResult ingest_jsonl_string(std::string_view contents) {
  IngestResult result;
  std::unordered_set<std::string> seen;
  std::size_t nonblank = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++nonblank;
    auto doc = parse_line(line);
    if (doc && seen.insert(doc->id).second) {
      result.documents.push_back(std::move(*doc));
      continue;
    }
    ++result.skipped;
    if (result.failed_lines.size() < 10) result.failed_lines.push_back(line_no);
  }
  if (nonblank == 0) {
    spdlog::warn("ingest: no documents found");
    return result;
  }
  if (2 * result.skipped > nonblank) {
    std::ostringstream msg;
    msg << "ingest: " << result.skipped << " of " << nonblank << " lines malformed; first failures at lines";
    for (auto l : result.failed_lines) msg << ' ' << l;
    throw Error(msg.str());
  }
  if (result.skipped > 0) spdlog::warn("ingest: skipped {} malformed lines", result.skipped);
  return result;
}

IngestResult ingest_jsonl(const std::filesystem::path& path) {
  return ingest_jsonl_string(read_file(path));
}

PreprocessConfig PreprocessConfig::with_stopword_file(const std::filesystem::path& path, int n_max) {
  const auto contents = read_file(path);
  PreprocessConfig cfg;
  cfg.n_max = n_max;
  cfg.stopwords_digest = sha256_hex(contents);
  std::istringstream in(contents);
  std::string line;
  while (std::getline(in, line)) {
    auto word = to_lower_ascii(trim(line));
    if (word.empty() || word.front() == '#') continue;
    cfg.stopwords.insert(std::move(word));
  }
  return cfg;
}

PreprocessConfig load_preprocess_config(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  const auto stop_rel = j.value("stopwords_path", std::string("stopwords.txt"));
  auto stop_path = std::filesystem::path(stop_rel);
  if (stop_path.is_relative()) stop_path = path.parent_path() / stop_path;
  auto cfg = PreprocessConfig::with_stopword_file(stop_path, j.value("n_max", 3));
  cfg.strip_urls = j.value("strip_urls", true);
  if (cfg.n_max < 1) throw Error("preprocess config: n_max must be >= 1");
  const auto expected = j.value("stopwords_digest", std::string());
  if (!expected.empty() && expected != cfg.stopwords_digest) {
    throw Error("preprocess config: stopword file digest mismatch for " + stop_path.string());
  }
  return cfg;
}

json to_json(const PreprocessConfig& cfg) {
  return json{{"n_max", cfg.n_max}, {"stopwords_digest", cfg.stopwords_digest}, {"strip_urls", cfg.strip_urls}};
}

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

bool has_vowel(std::string_view s) { return std::any_of(s.begin(), s.end(), is_vowel); }

bool usable_stem(std::string_view stem) { return stem.size() >= 3 && has_vowel(stem); }

std::string undouble(std::string stem) {
  const auto n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]) && stem[n - 1] != 'l' &&
      stem[n - 1] != 's' && stem[n - 1] != 'z') {
    stem.pop_back();
  }
  return stem;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::string lemmatize(std::string_view word) {
  if (std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c) || c >= 0x80; })) {
    return std::string(word);
  }
  if (ends_with(word, "ies") && word.size() >= 5) {
    return std::string(word.substr(0, word.size() - 3)) + "y";
  }
  if (ends_with(word, "ing")) {
    const auto stem = word.substr(0, word.size() - 3);
    if (usable_stem(stem)) return undouble(std::string(stem));
    return std::string(word);
  }
  if (ends_with(word, "ed")) {
    const auto stem = word.substr(0, word.size() - 2);
    if (usable_stem(stem)) return undouble(std::string(stem));
    return std::string(word);
  }
  if (ends_with(word, "s") && !ends_with(word, "ss") && !ends_with(word, "us") && !ends_with(word, "is")) {
    const auto stem = word.substr(0, word.size() - 1);
    if (usable_stem(stem)) return std::string(stem);
  }
  return std::string(word);
}

std::vector<std::string> generate_ngrams(const std::vector<std::string>& tokens, int n_max) {
  if (n_max < 1) throw Error("generate_ngrams: n_max must be >= 1");
  std::vector<std::string> out;
  const auto len = tokens.size();
  for (std::size_t n = 1; n <= static_cast<std::size_t>(n_max) && n <= len; ++n) {
    for (std::size_t i = 0; i + n <= len; ++i) {
      std::string gram = tokens[i];
      for (std::size_t k = 1; k < n; ++k) {
        gram += '_';
        gram += tokens[i + k];
      }
      out.push_back(std::move(gram));
    }
  }
  return out;
}

namespace {

// Replaces URLs and @-mentions with spaces.
std::string strip_urls_and_mentions(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  const auto starts = [&](std::string_view prefix) {
    if (text.size() - i < prefix.size()) return false;
    return to_lower_ascii(text.substr(i, prefix.size())) == prefix;
  };
  while (i < text.size()) {
    const bool boundary = i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1]));
    if (starts("http://") || starts("https://") || (boundary && starts("www."))) {
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      out += ' ';
      continue;
    }
    if (text[i] == '@' && i + 1 < text.size() && (is_word_byte(text[i + 1]) || text[i + 1] == '_')) {
      ++i;
      while (i < text.size() && (is_word_byte(text[i]) || text[i] == '_')) ++i;
      out += ' ';
      continue;
    }
    out += text[i++];
  }
  return out;
}

// Pulls '#tag' runs out of the text; returns the lowercased tags.
std::vector<std::string> extract_hashtags(std::string& text) {
  std::vector<std::string> tags;
  std::string rest;
  rest.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '#' && i + 1 < text.size() && (is_word_byte(text[i + 1]) || text[i + 1] == '_')) {
      std::size_t j = i + 1;
      while (j < text.size() && (is_word_byte(text[j]) || text[j] == '_')) ++j;
      auto tag = to_lower_ascii(std::string_view(text).substr(i + 1, j - i - 1));
      if (!tag.empty()) tags.push_back(std::move(tag));
      rest += ' ';
      i = j;
      continue;
    }
    rest += text[i++];
  }
  text = std::move(rest);
  return tags;
}

}  // namespace

std::vector<std::string> surface_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\'') continue;
    // U+2019 right single quotation mark
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    cleaned += is_word_byte(c) ? static_cast<char>(std::tolower(c)) : ' ';
  }
  std::vector<std::string> out;
  std::istringstream in(cleaned);
  std::string word;
  while (in >> word) out.push_back(std::move(word));
  return out;
}

TokenizedDocument preprocess(const RawDocument& doc, const PreprocessConfig& cfg) {
  TokenizedDocument out;
  out.id = doc.id;
  out.timestamp = doc.timestamp;
  out.source = doc.source;
  out.location_hint = doc.location_hint;
  out.gold = doc.gold;

  std::string text = cfg.strip_urls ? strip_urls_and_mentions(doc.text) : doc.text;
  out.hashtags = extract_hashtags(text);
  for (auto& word : surface_tokens(text)) {
    if (cfg.stopwords.count(word)) continue;
    auto lemma = lemmatize(word);
    if (cfg.stopwords.count(lemma)) continue;
    out.tokens.push_back(std::move(lemma));
  }
  out.ngrams = generate_ngrams(out.tokens, cfg.n_max);
  return out;
}

std::vector<std::string> vocabulary_terms(const TokenizedDocument& doc) {
  std::vector<std::string> terms = doc.ngrams;
  terms.insert(terms.end(), doc.hashtags.begin(), doc.hashtags.end());
  return terms;
}

std::vector<std::string> content_terms(const TokenizedDocument& doc) {
  std::vector<std::string> terms = doc.tokens;
  terms.insert(terms.end(), doc.hashtags.begin(), doc.hashtags.end());
  return terms;
}

CorpusSnapshot::CorpusSnapshot(std::vector<TokenizedDocument> documents, std::string created_from,
                               PreprocessConfig config)
    : documents_(std::move(documents)), created_from_(std::move(created_from)), config_(std::move(config)) {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (documents_[i].id.empty()) throw Error("snapshot: empty document id");
    if (!index_.emplace(documents_[i].id, i).second) {
      throw Error("snapshot: duplicate document id " + documents_[i].id);
    }
  }
}

std::optional<std::size_t> CorpusSnapshot::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CorpusSnapshot CorpusSnapshot::subset(const std::vector<std::size_t>& indices) const {
  std::vector<TokenizedDocument> docs;
  docs.reserve(indices.size());
  for (auto i : indices) docs.push_back(documents_.at(i));
  return CorpusSnapshot(std::move(docs), created_from_, config_);
}

CorpusSnapshot build_snapshot(const std::vector<RawDocument>& docs, const PreprocessConfig& cfg,
                              std::string created_from, unsigned workers) {
  std::vector<TokenizedDocument> out(docs.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(docs.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) out[i] = preprocess(docs[i], cfg);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < docs.size(); i += workers) out[i] = preprocess(docs[i], cfg);
      });
    }
  }
  return CorpusSnapshot(std::move(out), std::move(created_from), cfg);
}

json to_json(const RawDocument& doc) {
  json j{{"id", doc.id}, {"text", doc.text}, {"timestamp", doc.timestamp}, {"source", to_string(doc.source)}};
  if (doc.location_hint) j["location_hint"] = *doc.location_hint;
  if (!doc.gold.empty()) j["labels"] = doc.gold;
  return j;
}

void save_raw_jsonl(const std::vector<RawDocument>& docs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& d : docs) {
    out += to_json(d).dump();
    out += '\n';
  }
  write_file(path, out);
}

namespace {

json doc_to_json(const TokenizedDocument& d) {
  json j{{"id", d.id},
         {"tokens", d.tokens},
         {"hashtags", d.hashtags},
         {"timestamp", d.timestamp},
         {"source", to_string(d.source)}};
  if (d.location_hint) j["location_hint"] = *d.location_hint;
  if (!d.gold.empty()) j["labels"] = d.gold;
  return j;
}

}  // namespace

void save_snapshot(const CorpusSnapshot& snapshot, const std::filesystem::path& path) {
  std::string out;
  json header{{"created_from", snapshot.created_from()},
              {"preprocess_config", to_json(snapshot.preprocess_config())},
              {"stopwords", std::vector<std::string>()}};
  std::vector<std::string> stop(snapshot.preprocess_config().stopwords.begin(),
                                snapshot.preprocess_config().stopwords.end());
  std::sort(stop.begin(), stop.end());
  header["stopwords"] = stop;
  out += header.dump() + '\n';
  for (const auto& d : snapshot.documents()) out += doc_to_json(d).dump() + '\n';
  write_file(path, out);
}

CorpusSnapshot load_snapshot(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error("snapshot file is empty: " + path.string());
  const json header = json::parse(line);
  PreprocessConfig cfg;
  const auto& pc = header.at("preprocess_config");
  cfg.n_max = pc.at("n_max").get<int>();
  cfg.stopwords_digest = pc.at("stopwords_digest").get<std::string>();
  cfg.strip_urls = pc.at("strip_urls").get<bool>();
  for (const auto& w : header.at("stopwords")) cfg.stopwords.insert(w.get<std::string>());
  std::vector<TokenizedDocument> docs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    TokenizedDocument d;
    d.id = j.at("id").get<std::string>();
    d.tokens = j.at("tokens").get<std::vector<std::string>>();
    d.hashtags = j.at("hashtags").get<std::vector<std::string>>();
    d.timestamp = j.value("timestamp", std::string());
    d.source = parse_source(j.value("source", std::string("other")));
    if (j.contains("location_hint")) d.location_hint = j["location_hint"].get<std::string>();
    if (j.contains("labels")) d.gold = j["labels"].get<std::map<std::string, int>>();
    d.ngrams = generate_ngrams(d.tokens, cfg.n_max);
    docs.push_back(std::move(d));
  }
  return CorpusSnapshot(std::move(docs), header.at("created_from").get<std::string>(), std::move(cfg));
}

}  // namespace neurosym
