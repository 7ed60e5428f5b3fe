#include "neurosym/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace neurosym {

using nlohmann::json;

double Metrics::accuracy() const {
  const auto n = confusion.total();
  return n == 0 ? 0.0 : static_cast<double>(confusion.tp + confusion.tn) / static_cast<double>(n);
}

Metrics metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error("metrics: " + std::to_string(y_true.size()) + " labels vs " + std::to_string(y_pred.size()) +
                " predictions");
  }
  if (y_true.empty()) throw Error("metrics: no predictions");
  Metrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] != 0;
    const bool p = y_pred[i] != 0;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (t && !p) ++c.fn;
    else ++c.tn;
  }
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = tp / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = tp / static_cast<double>(c.tp + c.fn);
  }
  if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

LabelTable gold_labels(const CorpusSnapshot& corpus) {
  LabelTable out;
  for (const auto& d : corpus.documents()) {
    if (!d.gold.empty()) out[d.id] = d.gold;
  }
  return out;
}

std::string_view to_string(SplitMode m) { return m == SplitMode::chronological ? "chronological" : "random"; }

SplitMode parse_split_mode(std::string_view s) {
  if (s == "chronological") return SplitMode::chronological;
  if (s == "random") return SplitMode::random;
  throw Error("unknown split mode: " + std::string(s));
}

Split split_corpus(const CorpusSnapshot& corpus, double train_fraction, SplitMode mode, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw Error("train fraction must lie in (0, 1)");
  const auto& docs = corpus.documents();
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::chronological) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(docs[a].timestamp, docs[a].id) < std::tie(docs[b].timestamp, docs[b].id);
    });
  } else {
    Rng rng(mix_seed(seed, 0x5b17));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(docs.size())));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

const ReportRow* EvalReport::find(std::string_view config, std::string_view category, std::string_view variant) const {
  for (const auto& r : rows) {
    if (r.config == config && r.category == category && r.variant == variant) return &r;
  }
  return nullptr;
}

double EvalReport::mean_f1(std::string_view config, std::string_view variant) const {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.config == config && r.variant == variant) {
      sum += r.metrics.f1;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> categories_for(const LabelTable& labels, const EvalConfig& cfg) {
  if (!cfg.categories.empty()) return cfg.categories;
  std::set<std::string> names;
  for (const auto& [_, row] : labels) {
    for (const auto& [cat, _2] : row) names.insert(cat);
  }
  return {names.begin(), names.end()};
}

int label_of(const LabelTable& labels, const std::string& doc_id, const std::string& category) {
  const auto row = labels.find(doc_id);
  if (row == labels.end()) throw Error("no labels for document " + doc_id);
  const auto it = row->second.find(category);
  if (it == row->second.end()) throw Error("no " + category + " label for document " + doc_id);
  return it->second;
}

// Labeled subset of one split side.
std::vector<std::size_t> labeled(const CorpusSnapshot& corpus, const LabelTable& labels,
                                 const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  for (auto i : idx) {
    if (labels.contains(corpus.documents()[i].id)) out.push_back(i);
  }
  return out;
}

EvalReport empty_report(const EvalConfig& cfg) {
  EvalReport r;
  r.config_digest = cfg.config_digest;
  r.seed = cfg.seed;
  return r;
}

std::string exact_form(std::string_view term) {
  std::string out;
  for (const auto& part : split(normalize_term(term), '_')) {
    if (!out.empty()) out += '_';
    out += lemmatize(part);
  }
  return out;
}

}  // namespace

EvalReport evaluate_features(const CorpusSnapshot& corpus, const std::vector<FeatureVector>& features,
                             const LabelTable& labels, const Split& split, const EvalConfig& cfg,
                             const std::string& config_name) {
  if (features.size() != corpus.size()) throw Error("evaluate: one feature vector per document required");
  const auto start = Clock::now();
  const auto train_idx = labeled(corpus, labels, split.train);
  const auto test_idx = labeled(corpus, labels, split.test);
  if (train_idx.empty() || test_idx.empty()) throw Error("evaluate: empty labeled train or test split");
  std::vector<FeatureVector> X_train, X_test;
  for (auto i : train_idx) X_train.push_back(features[i]);
  for (auto i : test_idx) X_test.push_back(features[i]);

  auto report = empty_report(cfg);
  for (const auto& category : categories_for(labels, cfg)) {
    std::vector<int> y_train, y_test;
    for (auto i : train_idx) y_train.push_back(label_of(labels, corpus.documents()[i].id, category));
    for (auto i : test_idx) y_test.push_back(label_of(labels, corpus.documents()[i].id, category));
    for (auto variant : cfg.variants) {
      const auto clf = train(variant, X_train, y_train, cfg.forest, cfg.seed, category);
      std::vector<int> y_pred;
      for (const auto& p : predict(clf, X_test)) y_pred.push_back(p.label);
      report.rows.push_back({config_name, category, std::string(to_string(variant)), metrics(y_test, y_pred)});
      spdlog::debug("eval {} {} {}: f1 {:.4f}", config_name, category, to_string(variant), report.rows.back().metrics.f1);
    }
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

EvalReport evaluate(const CorpusSnapshot& corpus, const LabelTable& labels, const EmbeddingModel& em,
                    const SedoAlignment* alignment, const EvalConfig& cfg, const std::string& config_name) {
  std::vector<FeatureVector> features;
  features.reserve(corpus.size());
  for (const auto& d : corpus.documents()) features.push_back(featurize(d, em, alignment));
  const auto split = split_corpus(corpus, cfg.train_fraction, cfg.split, cfg.seed);
  return evaluate_features(corpus, features, labels, split, cfg, config_name);
}

SedoComparison run_sedo_comparison(const CorpusSnapshot& corpus, const LabelTable& labels, const EmbeddingModel& em,
                                   const SedoAlignment& alignment, const EvalConfig& cfg) {
  SedoComparison out;
  out.with_sedo = evaluate(corpus, labels, em, &alignment, cfg, "sedo");
  out.without_sedo = evaluate(corpus, labels, em, nullptr, cfg, "raw");
  for (const auto& row : out.with_sedo.rows) {
    const auto* other = out.without_sedo.find("raw", row.category, row.variant);
    ReportRow d{"delta", row.category, row.variant, {}};
    d.metrics.precision = row.metrics.precision - other->metrics.precision;
    d.metrics.recall = row.metrics.recall - other->metrics.recall;
    d.metrics.f1 = row.metrics.f1 - other->metrics.f1;
    out.deltas.push_back(d);
  }
  return out;
}

std::string_view to_string(AblationLevel level) {
  static constexpr std::string_view names[] = {"A0", "A1", "A2", "A3", "A4"};
  return names[static_cast<int>(level)];
}

AblationLevel parse_ablation_level(std::string_view s) {
  const auto upper = s.size() == 2 && (s[0] == 'A' || s[0] == 'a') ? s[1] - '0' : -1;
  if (upper < 0 || upper > 4) throw Error("unknown ablation level: " + std::string(s));
  return static_cast<AblationLevel>(upper);
}

AblationConfig AblationConfig::at(AblationLevel level) {
  const int k = static_cast<int>(level);
  AblationConfig c;
  c.level = level;
  c.use_general_lexicon = k >= 1;
  c.use_domain_lexicon = k >= 2;
  c.use_pretrained_embeddings = k >= 3;
  c.use_finetuned_embeddings = k >= 4;
  return c;
}

std::vector<AblationConfig> default_ladder() {
  std::vector<AblationConfig> out;
  for (int k = 0; k <= 4; ++k) out.push_back(AblationConfig::at(static_cast<AblationLevel>(k)));
  return out;
}

std::vector<AblationResult> run_ablation(const CorpusSnapshot& corpus, const LabelTable& labels,
                                         const std::vector<AblationConfig>& ladder, const AblationResources& res,
                                         const EvalConfig& cfg) {
  if (ladder.empty()) throw Error("ablation: empty ladder");
  const auto split = split_corpus(corpus, cfg.train_fraction, cfg.split, cfg.seed);
  const auto test_idx = labeled(corpus, labels, split.test);
  if (test_idx.empty()) throw Error("ablation: no labeled test documents");
  const auto categories = categories_for(labels, cfg);

  EmbeddingModel tuned;
  const EmbeddingModel* finetuned = res.finetuned;
  const bool needs_finetuned = std::any_of(ladder.begin(), ladder.end(), [](const auto& c) {
    return c.use_finetuned_embeddings;
  });
  if (needs_finetuned && finetuned == nullptr) {
    if (res.pretrained == nullptr) throw Error("ablation: fine-tuned level requires pretrained embeddings");
    auto ft = res.finetune;
    ft.seed = mix_seed(cfg.seed, 0xab1a);
    tuned = fine_tune_embeddings(*res.pretrained, corpus.subset(split.train), res.finetune_min_count, ft);
    finetuned = &tuned;
  }

  std::vector<AblationResult> out;
  for (const auto& level : ladder) {
    const auto start = Clock::now();
    const EmbeddingModel* em = level.use_finetuned_embeddings ? finetuned
                               : level.use_pretrained_embeddings ? res.pretrained
                                                                 : nullptr;
    if ((level.use_pretrained_embeddings || level.use_finetuned_embeddings) && em == nullptr) {
      throw Error("ablation: level " + std::string(to_string(level.level)) + " requires embeddings");
    }
    // Exact forms and embedding rows of each category's active terms.
    std::vector<std::set<std::string>> exact(categories.size());
    std::vector<std::vector<Vector>> vectors(categories.size());
    for (std::size_t c = 0; c < categories.size(); ++c) {
      std::vector<std::string> terms{categories[c]};
      for (const auto* lex : {level.use_general_lexicon ? &res.general_lexicon : nullptr,
                              level.use_domain_lexicon ? &res.domain_lexicon : nullptr}) {
        if (lex == nullptr || !lex->categories.contains(categories[c])) continue;
        for (const auto& t : lex->category(categories[c])) terms.push_back(t.term);
      }
      for (const auto& t : terms) {
        exact[c].insert(exact_form(t));
        if (em != nullptr) {
          if (auto v = em->vector(t)) vectors[c].push_back(std::move(*v));
        }
      }
    }

    std::vector<std::vector<int>> y_true(categories.size()), y_pred(categories.size());
    for (auto i : test_idx) {
      const auto& doc = corpus.documents()[i];
      const auto terms = vocabulary_terms(doc);
      std::vector<Vector> doc_vectors;
      if (em != nullptr) {
        for (const auto& t : terms) {
          if (auto v = em->vector(t)) doc_vectors.push_back(std::move(*v));
        }
      }
      std::size_t best = categories.size();
      double best_score = 0;
      for (std::size_t c = 0; c < categories.size(); ++c) {
        double score = 0;
        for (const auto& t : terms) {
          if (exact[c].contains(t)) score = 1.0;
        }
        for (const auto& dv : doc_vectors) {
          for (const auto& cv : vectors[c]) {
            const double cs = cosine(dv, cv);
            if (cs >= res.tau_match) score = std::max(score, cs);
          }
        }
        if (score > best_score) {
          best_score = score;
          best = c;
        }
      }
      for (std::size_t c = 0; c < categories.size(); ++c) {
        y_true[c].push_back(label_of(labels, doc.id, categories[c]));
        y_pred[c].push_back(c == best ? 1 : 0);
      }
    }

    AblationResult result;
    result.config = level;
    result.report = empty_report(cfg);
    double accuracy = 0;
    for (std::size_t c = 0; c < categories.size(); ++c) {
      auto m = metrics(y_true[c], y_pred[c]);
      accuracy += m.accuracy();
      result.report.rows.push_back({std::string(to_string(level.level)), categories[c], "labeler", m});
    }
    result.error_rate = 1.0 - accuracy / static_cast<double>(categories.size());
    result.report.runtime_seconds = seconds_since(start);
    spdlog::info("ablation {}: error rate {:.4f}", to_string(level.level), result.error_rate);
    out.push_back(std::move(result));
  }
  return out;
}

std::string_view to_string(TriangulationMode m) { return m == TriangulationMode::pretrained ? "pretrained" : "finetuned"; }

TriangulationMode parse_triangulation_mode(std::string_view s) {
  if (s == "pretrained") return TriangulationMode::pretrained;
  if (s == "finetuned") return TriangulationMode::finetuned;
  throw Error("unknown triangulation mode: " + std::string(s));
}

AnchorSet corpus_anchors(const CorpusSnapshot& corpus, const std::vector<std::size_t>& docs, const Lexicon& lex,
                         const EmbeddingModel& tweet, const EmbeddingModel& kb) {
  std::set<std::string> seen;
  for (auto i : docs) {
    for (const auto& t : vocabulary_terms(corpus.documents()[i])) seen.insert(t);
  }
  std::set<std::string> terms;
  for (const auto& [_, entries] : lex.categories) {
    for (const auto& e : entries) {
      if (seen.contains(exact_form(e.term)) && tweet.resolve(e.term) && kb.resolve(e.term)) terms.insert(e.term);
    }
  }
  if (terms.empty()) throw Error("no lexicon anchors occur in the corpus");
  std::vector<std::string> ordered(terms.begin(), terms.end());
  Matrix T(tweet.dim, static_cast<Eigen::Index>(ordered.size()));
  Matrix M(kb.dim, static_cast<Eigen::Index>(ordered.size()));
  for (std::size_t j = 0; j < ordered.size(); ++j) {
    T.col(static_cast<Eigen::Index>(j)) = *tweet.vector(ordered[j]);
    M.col(static_cast<Eigen::Index>(j)) = *kb.vector(ordered[j]);
  }
  return make_anchor_set(std::move(ordered), std::move(T), std::move(M));
}

EvalReport run_triangulation(const SedoAlignment& alignment, const CorpusSnapshot& external, const LabelTable& labels,
                             TriangulationMode mode, const TriangulationInputs& inputs, const EvalConfig& cfg) {
  if (inputs.tweet == nullptr) throw Error("triangulation: tweet embeddings required");
  const auto split = split_corpus(external, cfg.train_fraction, cfg.split, cfg.seed);
  SedoAlignment tuned;
  const SedoAlignment* used = &alignment;
  if (mode == TriangulationMode::finetuned) {
    if (inputs.kb == nullptr) throw Error("triangulation: KB embeddings required for fine-tuning");
    const auto anchors = corpus_anchors(external, split.train, inputs.lexicon, *inputs.tweet, *inputs.kb);
    spdlog::info("triangulation: fine-tuning on {} anchors", anchors.size());
    tuned = fine_tune(alignment, anchors, inputs.fine_tune_mode);
    used = &tuned;
  }
  std::vector<FeatureVector> features;
  for (const auto& d : external.documents()) features.push_back(featurize(d, *inputs.tweet, used));
  return evaluate_features(external, features, labels, split, cfg, std::string(to_string(mode)));
}

double round_percent(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

namespace {

json row_json(const ReportRow& r) {
  const auto& m = r.metrics;
  json j{{"config", r.config},
         {"category", r.category},
         {"variant", r.variant},
         {"precision", round_percent(m.precision)},
         {"recall", round_percent(m.recall)},
         {"f1", round_percent(m.f1)},
         {"tp", m.confusion.tp},
         {"fp", m.confusion.fp},
         {"fn", m.confusion.fn},
         {"tn", m.confusion.tn}};
  if (m.precision_undefined) j["precision_undefined"] = true;
  if (m.recall_undefined) j["recall_undefined"] = true;
  return j;
}

}  // namespace

json to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  return {{"config_digest", report.config_digest}, {"seed", report.seed}, {"rows", rows}};
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "config,category,variant,precision,recall,f1,tp,fp,fn,tn\n";
  char buf[64];
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    out << r.config << ',' << r.category << ',' << r.variant;
    for (double v : {m.precision, m.recall, m.f1}) {
      std::snprintf(buf, sizeof buf, ",%.2f", round_percent(v));
      out << buf;
    }
    out << ',' << m.confusion.tp << ',' << m.confusion.fp << ',' << m.confusion.fn << ',' << m.confusion.tn << '\n';
  }
  return out.str();
}

void save_report(const EvalReport& report, const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path) {
  write_file(json_path, to_json(report).dump(2) + "\n");
  write_file(csv_path, to_csv(report));
}

}  // namespace neurosym
