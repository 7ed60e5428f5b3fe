#include "neurosym/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace neurosym {

using nlohmann::json;

LexiconIndex index_lexicon(const Lexicon& lex, const EmbeddingModel& em) {
  LexiconIndex out;
  for (const auto& [name, terms] : lex.categories) {
    for (const auto& t : terms) {
      if (auto v = em.vector(t.term)) {
        out.entries.push_back({name, t.term, t.weight, std::move(*v)});
      } else {
        ++out.skipped;
      }
    }
  }
  return out;
}

RelevanceScore relevance(const TokenizedDocument& doc, const LexiconIndex& lex, const EmbeddingModel& em) {
  RelevanceScore out{doc.id, 0.0, {}, lex.entries.empty()};
  if (lex.entries.empty()) return out;
  const auto emb = doc_embedding(em, content_terms(doc));
  double best = -2.0;
  for (const auto& e : lex.entries) {
    const double s = cosine(emb.vector, e.vector);
    if (s > best) {
      best = s;
      out.matched_term = e.term;
    }
  }
  out.score = best;
  return out;
}

RelevanceScore relevance(const TokenizedDocument& doc, const Lexicon& lex, const EmbeddingModel& em) {
  return relevance(doc, index_lexicon(lex, em), em);
}

double compute_threshold(std::vector<double> scores, double percentile) {
  if (scores.empty()) throw Error("compute_threshold: empty score list");
  if (!(percentile > 0.0 && percentile < 100.0)) throw Error("compute_threshold: percentile must lie in (0,100)");
  std::sort(scores.begin(), scores.end());
  const auto n = static_cast<double>(scores.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

double choose_threshold(const std::vector<double>& scores, const ThresholdPolicy& policy) {
  if (scores.size() < policy.min_documents) return policy.fallback;
  if (scores.size() <= policy.sample_size) return compute_threshold(scores, policy.percentile);
  // partial Fisher-Yates for a seeded sample without replacement
  std::vector<double> pool = scores;
  Rng rng(mix_seed(policy.seed, 31));
  for (std::size_t i = 0; i < policy.sample_size; ++i) {
    const auto j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(policy.sample_size);
  return compute_threshold(std::move(pool), policy.percentile);
}

FilterResult filter_by_scores(const CorpusSnapshot& corpus, std::vector<RelevanceScore> scores, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) throw Error("filter: tau must lie in [-1,1]");
  if (scores.size() != corpus.size()) throw Error("filter: score count does not match corpus");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (tau <= -1.0 || scores[i].score > tau) keep.push_back(i);
  }
  spdlog::info("filter: retained {} of {} documents (tau {:.4f})", keep.size(), corpus.size(), tau);
  return {corpus.subset(keep), std::move(scores)};
}

FilterResult filter(const CorpusSnapshot& corpus, const LexiconIndex& lex, const EmbeddingModel& em, double tau) {
  std::vector<RelevanceScore> scores;
  scores.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) scores.push_back(relevance(doc, lex, em));
  return filter_by_scores(corpus, std::move(scores), tau);
}

void save_scores_jsonl(const std::vector<RelevanceScore>& scores, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : scores) {
    out += json{{"id", s.doc_id}, {"score", s.score}, {"matched_term", s.matched_term}}.dump();
    out += '\n';
  }
  write_file(path, out);
}

namespace {

std::string normalize_place(std::string_view s) {
  std::string out;
  for (const auto& w : surface_tokens(s)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

Gazetteer::Gazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    e.name = normalize_place(e.name);
    if (e.name.empty()) throw Error("gazetteer: empty name at row " + std::to_string(i + 1));
    if (!seen.emplace(e.name, e.admin1, e.country).second) {
      throw Error("gazetteer: duplicate entry " + e.name + ", " + e.admin1 + ", " + e.country);
    }
    by_name_.emplace(e.name, i);
    max_tokens_ = std::max<std::size_t>(max_tokens_, split(e.name, ' ').size());
  }
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error("gazetteer: missing header row in " + path.string());
  std::vector<GazetteerEntry> entries;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() < 5) throw Error("gazetteer: row " + std::to_string(row) + " has fewer than 5 columns");
    GazetteerEntry e{cols[0], cols[1], cols[2], 0, 0};
    try {
      e.lat = std::stod(cols[3]);
      e.lon = std::stod(cols[4]);
    } catch (const std::exception&) {
      throw Error("gazetteer: bad coordinates at row " + std::to_string(row));
    }
    entries.push_back(std::move(e));
  }
  return Gazetteer(std::move(entries));
}

const GazetteerEntry* Gazetteer::lookup(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &entries_[it->second];
}

namespace {

void scan(const std::vector<std::string>& tokens, const Gazetteer& gaz, std::vector<LocationMatch>& out) {
  const auto widest = std::min<std::size_t>(3, gaz.max_tokens());
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(widest, tokens.size() - i); len >= 1; --len) {
      std::string key = tokens[i];
      for (std::size_t k = 1; k < len; ++k) key += ' ' + tokens[i + k];
      if (const auto* e = gaz.lookup(key)) {
        LocationMatch m{e->name, e->admin1, e->country};
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(std::move(m));
        matched = len;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
}

}  // namespace

std::vector<LocationMatch> extract_locations(const std::vector<std::string>& tokens,
                                             const std::optional<std::string>& location_hint, const Gazetteer& gaz) {
  std::vector<LocationMatch> out;
  scan(tokens, gaz, out);
  if (location_hint) {
    const auto whole = normalize_place(*location_hint);
    if (const auto* e = gaz.lookup(whole)) {
      LocationMatch m{e->name, e->admin1, e->country};
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(std::move(m));
    } else {
      scan(surface_tokens(*location_hint), gaz, out);
    }
  }
  return out;
}

std::vector<LocationMatch> extract_locations(const RawDocument& doc, const Gazetteer& gaz) {
  return extract_locations(surface_tokens(doc.text), doc.location_hint, gaz);
}

Keyphrases extract_keyphrases(const TokenizedDocument& doc, const LexiconIndex& lex, const EmbeddingModel& em,
                              double tau_kp) {
  if (!(tau_kp >= 0.0 && tau_kp <= 1.0)) throw Error("extract_keyphrases: tau_kp must lie in [0,1]");
  std::vector<std::string> candidates;
  for (const auto& g : doc.ngrams) {
    if (g.find('_') != std::string::npos) candidates.push_back(g);
  }
  candidates.insert(candidates.end(), doc.hashtags.begin(), doc.hashtags.end());
  std::set<std::string> seen;
  Keyphrases out;
  for (const auto& c : candidates) {
    if (!seen.insert(c).second) continue;
    auto v = em.vector(c);
    if (!v) {
      out.dropped_oov.push_back(c);
      continue;
    }
    double best = -1.0;
    for (const auto& e : lex.entries) best = std::max(best, cosine(*v, e.vector));
    if (!lex.entries.empty() && best >= tau_kp) out.phrases.emplace_back(c, best);
  }
  std::sort(out.phrases.begin(), out.phrases.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

}  // namespace neurosym
