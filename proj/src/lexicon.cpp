#include "neurosym/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace neurosym {

using nlohmann::json;

bool Lexicon::contains(const std::string& term) const {
  for (const auto& [name, terms] : categories) {
    for (const auto& t : terms)
      if (t.term == term) return true;
  }
  return false;
}

const std::vector<LexiconTerm>& Lexicon::category(const std::string& name) const {
  auto it = categories.find(name);
  if (it == categories.end()) throw Error("unknown lexicon category: " + name);
  return it->second;
}

std::vector<std::string> Lexicon::category_names() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : categories) names.push_back(name);
  return names;
}

std::string normalize_term(std::string_view term) {
  std::istringstream in(to_lower_ascii(trim(term)));
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out += '_';
    out += word;
  }
  return out;
}

void validate(const Lexicon& lex) {
  if (lex.categories.empty()) throw Error("lexicon: no categories");
  for (const auto& [name, terms] : lex.categories) {
    if (name.empty()) throw Error("lexicon: empty category name");
    std::set<std::string> seen;
    for (const auto& t : terms) {
      if (t.term.empty()) throw Error("lexicon: empty term in category " + name);
      if (t.term != normalize_term(t.term)) throw Error("lexicon: term not normalized: " + t.term);
      if (!seen.insert(t.term).second) throw Error("lexicon: duplicate term '" + t.term + "' in category " + name);
      if (!(t.weight > 0.0 && t.weight <= 1.0)) {
        throw Error("lexicon: weight of '" + t.term + "' outside (0,1]: " + std::to_string(t.weight));
      }
    }
  }
}

Lexicon lexicon_from_json(const json& j) {
  Lexicon lex;
  lex.version = j.value("version", 1);
  lex.created_at = j.value("created_at", std::string());
  if (!j.contains("categories") || !j["categories"].is_object()) throw Error("lexicon: missing categories map");
  for (const auto& [name, entries] : j["categories"].items()) {
    auto& terms = lex.categories[name];
    for (const auto& e : entries) {
      LexiconTerm t;
      if (e.is_string()) {
        t.term = normalize_term(e.get<std::string>());
      } else {
        t.term = normalize_term(e.at("term").get<std::string>());
        t.weight = e.value("weight", 1.0);
        t.provenance = e.value("provenance", std::string("seed")) == "enriched" ? Provenance::enriched : Provenance::seed;
      }
      terms.push_back(std::move(t));
    }
  }
  validate(lex);
  return lex;
}

json to_json(const Lexicon& lex) {
  json cats = json::object();
  for (const auto& [name, terms] : lex.categories) {
    json arr = json::array();
    for (const auto& t : terms) {
      arr.push_back({{"term", t.term},
                     {"weight", t.weight},
                     {"provenance", t.provenance == Provenance::seed ? "seed" : "enriched"}});
    }
    cats[name] = std::move(arr);
  }
  json j{{"version", lex.version}, {"categories", std::move(cats)}};
  if (!lex.created_at.empty()) j["created_at"] = lex.created_at;
  return j;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error("lexicon: invalid JSON in " + path.string());
  return lexicon_from_json(j);
}

void save_lexicon(const Lexicon& lex, const std::filesystem::path& path) { write_file(path, to_json(lex).dump(2)); }

Lexicon merge_lexicons(const std::vector<Lexicon>& parts) {
  Lexicon out;
  out.version = 0;
  for (const auto& lex : parts) {
    out.version = std::max(out.version, lex.version);
    for (const auto& [name, terms] : lex.categories) {
      auto& dst = out.categories[name];
      for (const auto& t : terms) {
        if (std::none_of(dst.begin(), dst.end(), [&](const auto& d) { return d.term == t.term; })) dst.push_back(t);
      }
    }
  }
  validate(out);
  return out;
}

std::map<std::string, double> per_capita_rates(const CorpusSnapshot& corpus) {
  std::map<std::string, double> rates;
  if (corpus.empty()) return rates;
  for (const auto& doc : corpus.documents()) {
    for (const auto& g : doc.ngrams) rates[g] += 1.0;
    for (const auto& h : doc.hashtags) rates[h] += 1.0;
  }
  const double scale = 1000.0 / static_cast<double>(corpus.size());
  for (auto& [_, r] : rates) r *= scale;
  return rates;
}

std::vector<NeologismCandidate> detect_neologisms(const CorpusSnapshot& window, const CorpusSnapshot& baseline,
                                                  const Lexicon& lex, const EmbeddingModel& em,
                                                  const NeologismConfig& cfg) {
  if (window.empty()) throw Error("detect_neologisms: empty window");
  // category -> vectors of its in-vocab terms
  std::vector<std::pair<std::string, std::vector<Vector>>> category_vectors;
  std::set<std::string> known;
  for (const auto& [name, terms] : lex.categories) {
    std::vector<Vector> vecs;
    for (const auto& t : terms) {
      known.insert(t.term);
      if (auto r = em.resolve(t.term)) {
        known.insert(em.vocab.terms[*r]);
        if (auto v = em.vector(t.term)) vecs.push_back(std::move(*v));
      }
    }
    category_vectors.emplace_back(name, std::move(vecs));
  }

  const auto window_rates = per_capita_rates(window);
  const auto baseline_rates = per_capita_rates(baseline);
  std::vector<NeologismCandidate> out;
  for (const auto& [term, rate] : window_rates) {
    if (known.count(term)) continue;
    if (rate < cfg.min_rate) continue;
    double base = 0;
    if (auto it = baseline_rates.find(term); it != baseline_rates.end()) base = it->second;
    if (rate < cfg.growth * base) continue;
    auto row = em.vocab.find(term);
    if (!row) continue;
    const Vector v = em.input.row(static_cast<Eigen::Index>(*row)).transpose();
    NeologismCandidate cand{term, rate, base, {}, -2.0};
    for (const auto& [name, vecs] : category_vectors) {
      for (const auto& u : vecs) {
        const double s = cosine(v, u);
        if (s > cand.similarity) {
          cand.similarity = s;
          cand.best_category = name;
        }
      }
    }
    if (cand.best_category.empty()) continue;
    out.push_back(std::move(cand));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.term < b.term;
  });
  spdlog::debug("neologisms: {} candidates", out.size());
  return out;
}

Lexicon enrich(const Lexicon& lex, const std::vector<NeologismCandidate>& candidates, double tau_sim) {
  if (!(tau_sim >= 0.0 && tau_sim <= 1.0)) throw Error("enrich: tau_sim must lie in [0,1]");
  Lexicon out = lex;
  out.version = lex.version + 1;
  for (const auto& c : candidates) {
    if (c.similarity < tau_sim || c.similarity <= 0.0) continue;
    auto it = out.categories.find(c.best_category);
    if (it == out.categories.end()) continue;
    auto& terms = it->second;
    if (std::any_of(terms.begin(), terms.end(), [&](const auto& t) { return t.term == c.term; })) continue;
    terms.push_back({c.term, std::min(1.0, c.similarity), Provenance::enriched});
  }
  validate(out);
  return out;
}

}  // namespace neurosym
