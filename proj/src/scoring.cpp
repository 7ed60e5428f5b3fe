#include "neurosym/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace neurosym {

using nlohmann::json;

Vector category_embedding(const Lexicon& lex, const std::string& category, const EmbeddingModel& em) {
  Vector acc = Vector::Zero(em.dim);
  double total = 0;
  for (const auto& t : lex.category(category)) {
    if (auto v = em.vector(t.term)) {
      acc += t.weight * *v;
      total += t.weight;
    }
  }
  if (total > 0) acc /= total;
  return acc;
}

namespace {

double mean_of_max(const TokenizedDocument& doc, const std::vector<std::pair<double, Vector>>& terms,
                   const EmbeddingModel& em) {
  if (terms.empty()) return 0.0;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& g : vocabulary_terms(doc)) {
    auto row = em.resolve(g);
    if (!row) continue;
    const Vector v = em.input.row(static_cast<Eigen::Index>(*row)).transpose();
    double best = -2.0, weight = 0.0;
    for (const auto& [w, u] : terms) {
      const double s = cosine(v, u);
      if (s > best) {
        best = s;
        weight = w;
      }
    }
    sum += weight * std::max(0.0, best);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<std::pair<double, Vector>> category_terms(const Lexicon& lex, const std::string& category,
                                                      const EmbeddingModel& em) {
  std::vector<std::pair<double, Vector>> out;
  for (const auto& t : lex.category(category)) {
    if (auto v = em.vector(t.term)) out.emplace_back(t.weight, std::move(*v));
  }
  return out;
}

}  // namespace

double semantic_mapping_score(const TokenizedDocument& doc, const std::string& category, const Lexicon& lex,
                              const EmbeddingModel& em) {
  return mean_of_max(doc, category_terms(lex, category, em), em);
}

double semantic_proximity_score(const Vector& theta, const TopicEmbeddings& topics, const Vector& category_vector) {
  if (theta.size() != topics.vectors.rows()) throw Error("semantic_proximity_score: topic count mismatch");
  double sum = 0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    sum += theta(k) * std::max(0.0, cosine(topics.vectors.row(k).transpose(), category_vector));
  }
  return sum;
}

double semantic_proximity_score(const TokenizedDocument& doc, const std::string& category, const TopicModel& tm,
                                const Lexicon& lex, const EmbeddingModel& em, int top_k) {
  const auto cat = category_embedding(lex, category, em);
  return semantic_proximity_score(topic_mixture_for(tm, doc), topic_embedding(tm, em, top_k), cat);
}

IndexScorer::IndexScorer(const Lexicon& lex, const EmbeddingModel& em, const TopicModel& unigram,
                         const TopicModel& ngram, int top_k)
    : em_(em),
      unigram_(unigram),
      ngram_(ngram),
      unigram_topics_(topic_embedding(unigram, em, top_k)),
      ngram_topics_(topic_embedding(ngram, em, top_k)) {
  for (const auto& name : lex.category_names()) {
    categories_[name] = Category{category_terms(lex, name, em), category_embedding(lex, name, em)};
  }
}

const IndexScorer::Category& IndexScorer::category(const std::string& name) const {
  auto it = categories_.find(name);
  if (it == categories_.end()) throw Error("unknown lexicon category: " + name);
  return it->second;
}

std::vector<std::string> IndexScorer::categories() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : categories_) out.push_back(name);
  return out;
}

double IndexScorer::mapping(const TokenizedDocument& doc, const std::string& name) const {
  return mean_of_max(doc, category(name).terms, em_);
}

IndexScore IndexScorer::score(const TokenizedDocument& doc, const std::string& name) const {
  const auto& cat = category(name);
  IndexScore s;
  s.doc_id = doc.id;
  s.category = name;
  s.h_ng = mean_of_max(doc, cat.terms, em_);
  s.h_lda = semantic_proximity_score(topic_mixture_for(unigram_, doc), unigram_topics_, cat.embedding);
  s.h_nlda = semantic_proximity_score(topic_mixture_for(ngram_, doc), ngram_topics_, cat.embedding);
  s.h_total = s.h_ng + s.h_lda + s.h_nlda;
  return s;
}

IndexScore index_score(const TokenizedDocument& doc, const std::string& category, const Lexicon& lex,
                       const EmbeddingModel& em, const TopicModel& unigram, const TopicModel& ngram, int top_k) {
  return IndexScorer(lex, em, unigram, ngram, top_k).score(doc, category);
}

NormalizedBatch normalize_scores(std::vector<IndexScore> batch) {
  if (batch.empty()) throw Error("normalize_scores: empty batch");
  for (const auto& s : batch) {
    if (s.category != batch.front().category) throw Error("normalize_scores: batch mixes categories");
  }
  double max = -std::numeric_limits<double>::infinity();
  for (const auto& s : batch) max = std::max(max, s.h_total);
  NormalizedBatch out{std::move(batch), !(max > 0.0)};
  for (auto& s : out.scores) s.nhs = out.nonpositive_max ? 0.0 : s.h_total / max;
  return out;
}

std::vector<WeakLabel> assign_labels(const std::vector<IndexScore>& batch, double tau_label) {
  std::vector<WeakLabel> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back({s.doc_id, s.category, s.nhs >= tau_label ? 1 : 0, s.nhs, tau_label});
  return out;
}

void save_labels_jsonl(const std::vector<IndexScore>& scores, const std::vector<WeakLabel>& labels,
                       const std::filesystem::path& path, const std::string& batch) {
  if (scores.size() != labels.size()) throw Error("save_labels_jsonl: score/label count mismatch");
  std::string out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    json j{{"id", s.doc_id},   {"category", s.category}, {"h_ng", s.h_ng},   {"h_lda", s.h_lda},
           {"h_nlda", s.h_nlda}, {"h_total", s.h_total},   {"nhs", s.nhs},     {"label", labels[i].label}};
    if (!batch.empty()) j["batch"] = batch;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<LabelRecord> load_labels_jsonl(const std::filesystem::path& path) {
  std::vector<LabelRecord> out;
  for (const auto& line : split(read_file(path), '\n')) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line);
    LabelRecord r;
    r.score.doc_id = j.at("id").get<std::string>();
    r.score.category = j.at("category").get<std::string>();
    r.score.h_ng = j.at("h_ng").get<double>();
    r.score.h_lda = j.at("h_lda").get<double>();
    r.score.h_nlda = j.at("h_nlda").get<double>();
    r.score.h_total = j.at("h_total").get<double>();
    r.score.nhs = j.at("nhs").get<double>();
    r.label = j.at("label").get<int>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace neurosym
