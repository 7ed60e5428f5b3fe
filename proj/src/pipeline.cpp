#include "neurosym/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "neurosym/classify.hpp"
#include "neurosym/common.hpp"
#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/eval.hpp"
#include "neurosym/lexicon.hpp"
#include "neurosym/scoring.hpp"
#include "neurosym/sedo.hpp"
#include "neurosym/semantic.hpp"
#include "neurosym/topic.hpp"

namespace neurosym {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> dotted_parts(std::string_view dotted) {
  auto parts = split(dotted, '.');
  if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) {
    throw Error("malformed config key: " + std::string(dotted));
  }
  if (parts.front() == "clf") parts.front() = "classify";
  return parts;
}

}  // namespace

void apply_override(json& config, std::string_view dotted, std::string_view value) {
  json* node = &config;
  for (const auto& part : dotted_parts(dotted)) {
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) throw Error("config key " + std::string(dotted) + " crosses a non-object value");
    node = &(*node)[part];
  }
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(std::string(value)) : std::move(parsed);
}

const json* PipelineConfig::find(std::string_view dotted) const {
  const json* node = &values_;
  for (const auto& part : dotted_parts(dotted)) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

std::vector<fs::path> PipelineConfig::inputs(std::string_view key) const {
  const auto* v = find("paths." + std::string(key));
  std::vector<fs::path> out;
  if (v == nullptr || v->is_null()) return out;
  const auto add = [&](const json& p) {
    if (!p.is_string()) throw Error("paths." + std::string(key) + " must be a path or a list of paths");
    fs::path path(p.get<std::string>());
    out.push_back(path.is_absolute() ? path : base_dir_ / path);
  };
  if (v->is_array()) {
    for (const auto& p : *v) add(p);
  } else {
    add(*v);
  }
  return out;
}

std::string PipelineConfig::digest() const {
  json copy = values_;
  if (copy.contains("paths")) copy["paths"].erase("output");
  return sha256_hex(copy.dump());
}

PipelineConfig PipelineConfig::load(const fs::path& path, const Overrides& overrides, std::optional<std::uint64_t> seed,
                                    std::optional<fs::path> out) {
  json values;
  try {
    values = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return from_json(std::move(values), path.parent_path(), overrides, seed, std::move(out));
}

PipelineConfig PipelineConfig::from_json(json values, fs::path base_dir, const Overrides& overrides,
                                         std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
  if (!values.is_object()) throw Error("config must be a JSON object");
  for (const auto& [key, value] : overrides) apply_override(values, key, value);
  if (seed) values["seed"] = *seed;
  PipelineConfig cfg;
  cfg.values_ = std::move(values);
  cfg.base_dir_ = std::move(base_dir);
  if (out) {
    cfg.out_dir_ = *out;
  } else if (const auto* o = cfg.find("paths.output"); o != nullptr && o->is_string()) {
    fs::path p(o->get<std::string>());
    cfg.out_dir_ = p.is_absolute() ? p : cfg.base_dir_ / p;
  } else {
    throw Error("config: no output directory (paths.output or --out)");
  }
  cfg.validate();
  cfg.seed_ = cfg.values_.at("seed").get<std::uint64_t>();
  return cfg;
}

namespace {

template <typename T>
T checked(const PipelineConfig& cfg, std::string_view key, T fallback) {
  try {
    return cfg.get<T>(key, fallback);
  } catch (const json::exception&) {
    throw Error("config: " + std::string(key) + " has the wrong type");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error("config: " + message);
}

}  // namespace

void PipelineConfig::validate() const {
  const auto* seed = find("seed");
  require(seed != nullptr && seed->is_number_unsigned(), "seed is required (non-negative integer or --seed)");

  static const std::set<std::string> path_keys = {"corpus",         "kb_corpus",      "general_corpus",
                                                  "external_corpus", "preprocess",     "general_lexicon",
                                                  "domain_lexicon",  "shift_lexicon",  "gazetteer",
                                                  "output"};
  if (const auto* paths = find("paths"); paths != nullptr) {
    require(paths->is_object(), "paths must be an object");
    for (const auto& [key, _] : paths->items()) require(path_keys.contains(key), "unknown path key paths." + key);
  }
  for (const auto& key : path_keys) {
    if (key == "output") continue;
    for (const auto& p : inputs(key)) require(fs::exists(p), "paths." + key + ": no such file " + p.string());
  }
  require(has_input("corpus"), "paths.corpus is required");
  require(has_input("preprocess"), "paths.preprocess is required");

  for (const auto* space : {"tweet", "kb", "general"}) {
    const std::string base = std::string("embedding.") + space;
    require(checked(*this, base + ".dim", 1) > 0, base + ".dim must be positive");
    require(checked(*this, base + ".epochs", 1) > 0, base + ".epochs must be positive");
    require(checked(*this, base + ".window", 1) > 0, base + ".window must be positive");
    require(checked(*this, base + ".negatives", 1) > 0, base + ".negatives must be positive");
    require(checked(*this, base + ".learning_rate", 0.025) > 0, base + ".learning_rate must be positive");
  }
  require(checked(*this, "embedding.general.dim", 64) == checked(*this, "embedding.tweet.dim", 64),
          "embedding.general.dim must equal embedding.tweet.dim");
  require(checked(*this, "topic.topics", 20) >= 2, "topic.topics must be at least 2");
  require(checked(*this, "topic.iters", 1000) > checked(*this, "topic.burn_in", 200),
          "topic.iters must exceed topic.burn_in");
  require(checked(*this, "topic.burn_in", 200) >= 0, "topic.burn_in must be non-negative");
  const double pct = checked(*this, "filter.percentile", 75.0);
  require(pct > 0 && pct <= 100, "filter.percentile must lie in (0, 100]");
  const double tau_label = checked(*this, "scoring.tau_label", 0.5);
  require(tau_label >= 0 && tau_label <= 1, "scoring.tau_label must lie in [0, 1]");
  require(checked(*this, "sedo.delta", 1.0) > 0, "sedo.delta must be positive");
  if (const auto* eps = find("sedo.epsilon_ridge"); eps != nullptr && !eps->is_null()) {
    require(eps->is_number() && eps->get<double>() >= 0, "sedo.epsilon_ridge must be non-negative or null");
  }
  const auto mode = checked(*this, "sedo.fine_tune_mode", std::string("union"));
  require(mode == "union" || mode == "replace", "sedo.fine_tune_mode must be union or replace");
  try {
    parse_classifier_variant(checked(*this, "classify.variant", std::string("brf")));
    for (const auto& v : checked(*this, "eval.variants", std::vector<std::string>{})) parse_classifier_variant(v);
    parse_split_mode(checked(*this, "eval.split", std::string("chronological")));
  } catch (const Error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  const auto labels = checked(*this, "classify.labels", std::string("weak"));
  require(labels == "weak" || labels == "gold", "classify.labels must be weak or gold");
  const double frac = checked(*this, "eval.train_fraction", 0.8);
  require(frac > 0 && frac < 1, "eval.train_fraction must lie in (0, 1)");
  require(checked(*this, "classify.n_trees", 100) > 0, "classify.n_trees must be positive");
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) throw Error("output directory is locked by another run: " + path_.string());
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

const std::map<std::string, std::vector<std::string>>& artifacts() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"snapshot", {"corpus.snapshot.jsonl"}},
      {"kb_snapshot", {"kb.snapshot.jsonl"}},
      {"general_snapshot", {"general.snapshot.jsonl"}},
      {"external_snapshot", {"external.snapshot.jsonl"}},
      {"embedding", {"embeddings.tweet.txt"}},
      {"kb_embedding", {"embeddings.kb.txt"}},
      {"general_embedding", {"embeddings.general.txt"}},
      {"topicmodel", {"topicmodel.lda.json", "topicmodel.nlda.json"}},
      {"neologisms", {"neologisms.json"}},
      {"lexicon", {"lexicon.json"}},
      {"filtered", {"filtered.snapshot.jsonl", "scores.jsonl"}},
      {"meta", {"meta.jsonl"}},
      {"labels", {"labels.jsonl"}},
      {"sedo", {"sedo.json"}},
      {"sedo_finetuned", {"sedo.finetuned.json", "embeddings.external.txt"}},
      {"classifier", {"classifiers.json"}},
      {"report", {"report.json", "report.csv"}},
      {"ablation", {"ablation.json", "ablation.csv"}},
      {"triangulation", {"triangulation.json", "triangulation.csv"}},
  };
  return table;
}

const std::string& producing_stage(const std::string& artifact) {
  static const std::map<std::string, std::string> table = {
      {"snapshot", "ingest"},
      {"kb_snapshot", "ingest"},
      {"general_snapshot", "ingest"},
      {"external_snapshot", "ingest"},
      {"embedding", "train-embed"},
      {"kb_embedding", "train-embed"},
      {"general_embedding", "train-embed"},
      {"topicmodel", "train-topics"},
      {"neologisms", "detect-neologisms"},
      {"lexicon", "enrich-lexicon"},
      {"filtered", "filter"},
      {"meta", "extract-meta"},
      {"labels", "score"},
      {"sedo", "sedo-fit"},
      {"sedo_finetuned", "sedo-finetune"},
      {"classifier", "train-clf"},
      {"report", "evaluate"},
      {"ablation", "ablate"},
      {"triangulation", "triangulate"},
  };
  return table.at(artifact);
}

class Stage {
 public:
  Stage(std::string name, const PipelineConfig& cfg) : name_(std::move(name)), cfg_(cfg) {}

  const PipelineConfig& cfg() const { return cfg_; }
  std::uint64_t seed(std::uint64_t stream) const { return mix_seed(cfg_.seed(), stream); }

  fs::path file(const std::string& artifact, std::size_t i = 0) const {
    return cfg_.out_dir() / artifacts().at(artifact).at(i);
  }

  /// Path of an upstream artifact file; throws when the artifact is absent.
  fs::path need(const std::string& artifact, std::size_t i = 0) {
    for (const auto& f : artifacts().at(artifact)) {
      const auto p = cfg_.out_dir() / f;
      if (!fs::exists(p)) {
        throw Error("missing artifact: " + artifact + " (run " + producing_stage(artifact) + " first)");
      }
      inputs_[f] = sha256_file(p);
    }
    return file(artifact, i);
  }
  bool available(const std::string& artifact) const {
    for (const auto& f : artifacts().at(artifact)) {
      if (!fs::exists(cfg_.out_dir() / f)) return false;
    }
    return true;
  }

  /// Configured input files, digested into the manifest.
  std::vector<fs::path> input(const std::string& key) {
    auto paths = cfg_.inputs(key);
    for (std::size_t i = 0; i < paths.size(); ++i) {
      inputs_[paths.size() == 1 ? key : key + "[" + std::to_string(i) + "]"] = sha256_file(paths[i]);
    }
    return paths;
  }
  fs::path single_input(const std::string& key) {
    auto paths = input(key);
    if (paths.size() != 1) throw Error("config: paths." + key + " must name exactly one file");
    return paths.front();
  }

  void produced(const std::string& artifact) {
    for (const auto& f : artifacts().at(artifact)) outputs_[f] = sha256_file(cfg_.out_dir() / f);
  }
  json& details() { return details_; }

  void finish(double runtime) const {
    json line{{"stage", name_},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"seed", cfg_.seed()},
              {"config_digest", cfg_.digest()}};
    if (!details_.is_null()) line["details"] = details_;
    append(cfg_.out_dir() / "manifest.jsonl", line.dump());
    append(cfg_.out_dir() / "timings.jsonl", json{{"stage", name_}, {"runtime_seconds", runtime}}.dump());
  }

 private:
  static void append(const fs::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to " + path.string());
    out << line << '\n';
  }

  std::string name_;
  const PipelineConfig& cfg_;
  json inputs_ = json::object();
  json outputs_ = json::object();
  json details_;
};

unsigned workers(const PipelineConfig& cfg) { return checked(cfg, "workers", 1u); }

PreprocessConfig preprocess_config(Stage& s) { return load_preprocess_config(s.single_input("preprocess")); }

CorpusSnapshot ingest_all(Stage& s, const std::string& key, const PreprocessConfig& pre) {
  std::vector<RawDocument> docs;
  std::string digests;
  for (const auto& path : s.input(key)) {
    auto result = ingest_jsonl(path);
    if (result.skipped > 0) spdlog::warn("ingest {}: skipped {} malformed lines", path.string(), result.skipped);
    docs.insert(docs.end(), std::make_move_iterator(result.documents.begin()),
                std::make_move_iterator(result.documents.end()));
    digests += sha256_file(path);
  }
  const auto created_from = s.input(key).size() == 1 ? digests : sha256_hex(digests);
  return build_snapshot(docs, pre, created_from, workers(s.cfg()));
}

TrainConfig embed_config(const PipelineConfig& cfg, const std::string& space, std::uint64_t seed) {
  const std::string base = "embedding." + space;
  TrainConfig t;
  t.dim = checked(cfg, base + ".dim", 64);
  t.window = checked(cfg, base + ".window", t.window);
  t.negatives = checked(cfg, base + ".negatives", t.negatives);
  t.epochs = checked(cfg, base + ".epochs", 10);
  t.learning_rate = checked(cfg, base + ".learning_rate", t.learning_rate);
  t.subsample = checked(cfg, base + ".subsample", 1e-3);
  t.center = checked(cfg, base + ".center", false);
  t.workers = workers(cfg);
  t.seed = seed;
  return t;
}

std::uint64_t min_count(const PipelineConfig& cfg) { return checked(cfg, "embedding.min_count", std::uint64_t{2}); }

Lexicon base_lexicon(Stage& s) {
  std::vector<Lexicon> parts;
  for (const auto* key : {"general_lexicon", "domain_lexicon"}) {
    for (const auto& p : s.input(key)) parts.push_back(load_lexicon(p));
  }
  if (parts.empty()) throw Error("config: paths.general_lexicon or paths.domain_lexicon is required");
  return merge_lexicons(parts);
}

Lexicon lexicon_from(Stage& s, const std::string& key) {
  std::vector<Lexicon> parts;
  for (const auto& p : s.input(key)) parts.push_back(load_lexicon(p));
  if (parts.empty()) throw Error("config: paths." + key + " is required");
  return merge_lexicons(parts);
}

ForestConfig forest_config(const PipelineConfig& cfg) {
  ForestConfig f;
  f.n_trees = checked(cfg, "classify.n_trees", f.n_trees);
  f.max_depth = checked(cfg, "classify.max_depth", f.max_depth);
  f.min_leaf = checked(cfg, "classify.min_leaf", f.min_leaf);
  f.features_per_split = checked(cfg, "classify.features_per_split", f.features_per_split);
  f.workers = workers(cfg);
  return f;
}

EvalConfig eval_config(const PipelineConfig& cfg) {
  EvalConfig e;
  const auto variant = checked(cfg, "classify.variant", std::string("brf"));
  const auto names = checked(cfg, "eval.variants", std::vector<std::string>{variant});
  e.variants.clear();
  for (const auto& n : names) e.variants.push_back(parse_classifier_variant(n));
  e.forest = forest_config(cfg);
  e.split = parse_split_mode(checked(cfg, "eval.split", std::string("chronological")));
  e.train_fraction = checked(cfg, "eval.train_fraction", 0.8);
  e.seed = mix_seed(cfg.seed(), 11);
  e.config_digest = cfg.digest();
  return e;
}

LabelTable training_labels(Stage& s, const CorpusSnapshot& corpus) {
  if (checked(s.cfg(), "classify.labels", std::string("weak")) == "gold") {
    auto gold = gold_labels(corpus);
    if (gold.empty()) throw Error("classify.labels = gold but the corpus carries no gold labels");
    return gold;
  }
  LabelTable table;
  for (const auto& r : load_labels_jsonl(s.need("labels"))) table[r.score.doc_id][r.score.category] = r.label;
  return table;
}

SedoAlignment load_rehydrated(Stage& s, const std::string& artifact, const EmbeddingModel& tweet,
                              const EmbeddingModel& kb) {
  auto a = load_alignment(s.need(artifact));
  rehydrate_anchors(a, tweet, kb);
  return a;
}

json metrics_rows(const EvalReport& r) { return to_json(r).at("rows"); }

// Stages.

void stage_ingest(Stage& s) {
  const auto pre = preprocess_config(s);
  const std::vector<std::pair<std::string, std::string>> corpora = {{"corpus", "snapshot"},
                                                                    {"kb_corpus", "kb_snapshot"},
                                                                    {"general_corpus", "general_snapshot"},
                                                                    {"external_corpus", "external_snapshot"}};
  json counts = json::object();
  for (const auto& [key, artifact] : corpora) {
    if (!s.cfg().has_input(key)) continue;
    const auto snap = ingest_all(s, key, pre);
    save_snapshot(snap, s.file(artifact));
    s.produced(artifact);
    counts[artifact] = snap.size();
  }
  s.details() = {{"documents", counts}};
}

void stage_train_embed(Stage& s) {
  const std::vector<std::tuple<std::string, std::string, std::string, std::uint64_t>> spaces = {
      {"snapshot", "embedding", "tweet", 1}, {"kb_snapshot", "kb_embedding", "kb", 2},
      {"general_snapshot", "general_embedding", "general", 3}};
  for (const auto& [snap, artifact, space, stream] : spaces) {
    if (snap != "snapshot" && !s.available(snap)) continue;
    const auto corpus = load_snapshot(s.need(snap));
    const auto em = train_skipgram(corpus, build_vocab(corpus, min_count(s.cfg())),
                                   embed_config(s.cfg(), space, s.seed(stream)));
    save_word2vec_text(em, s.file(artifact));
    s.produced(artifact);
  }
}

void stage_train_topics(Stage& s) {
  const auto corpus = load_snapshot(s.need("snapshot"));
  LdaConfig cfg;
  cfg.topics = checked(s.cfg(), "topic.topics", cfg.topics);
  cfg.alpha = checked(s.cfg(), "topic.alpha", cfg.alpha);
  cfg.beta = checked(s.cfg(), "topic.beta", cfg.beta);
  cfg.iters = checked(s.cfg(), "topic.iters", cfg.iters);
  cfg.burn_in = checked(s.cfg(), "topic.burn_in", cfg.burn_in);
  cfg.fold_in_sweeps = checked(s.cfg(), "topic.fold_in_sweeps", cfg.fold_in_sweeps);
  cfg.min_count = checked(s.cfg(), "topic.min_count", cfg.min_count);
  cfg.seed = s.seed(4);
  save_topic_model(train_lda(corpus, TopicVariant::unigram_lda, cfg), s.file("topicmodel", 0), true);
  cfg.seed = s.seed(5);
  save_topic_model(train_lda(corpus, TopicVariant::ngram_nlda, cfg), s.file("topicmodel", 1), true);
  s.produced("topicmodel");
}

void stage_detect_neologisms(Stage& s) {
  const auto corpus = load_snapshot(s.need("snapshot"));
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto lex = base_lexicon(s);
  const auto start = checked(s.cfg(), "neologism.window_start", std::string());
  if (start.empty()) throw Error("config: neologism.window_start is required");
  std::vector<std::size_t> window, baseline;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (corpus.documents()[i].timestamp >= start ? window : baseline).push_back(i);
  }
  if (window.empty() || baseline.empty()) {
    throw Error("neologism.window_start " + start + " leaves an empty window or baseline");
  }
  NeologismConfig cfg;
  cfg.min_rate = checked(s.cfg(), "neologism.min_rate", cfg.min_rate);
  cfg.growth = checked(s.cfg(), "neologism.growth", cfg.growth);
  const auto cands = detect_neologisms(corpus.subset(window), corpus.subset(baseline), lex, em, cfg);
  json out = json::array();
  for (const auto& c : cands) {
    out.push_back({{"term", c.term},
                   {"window_per_capita", c.window_per_capita},
                   {"baseline_per_capita", c.baseline_per_capita},
                   {"best_category", c.best_category},
                   {"similarity", c.similarity}});
  }
  write_file(s.file("neologisms"), out.dump(2) + "\n");
  s.produced("neologisms");
  s.details() = {{"candidates", cands.size()}};
}

void stage_enrich_lexicon(Stage& s) {
  const auto lex = base_lexicon(s);
  const json raw = json::parse(read_file(s.need("neologisms")));
  std::vector<NeologismCandidate> cands;
  for (const auto& j : raw) {
    cands.push_back({j.at("term").get<std::string>(), j.at("window_per_capita").get<double>(),
                     j.at("baseline_per_capita").get<double>(), j.at("best_category").get<std::string>(),
                     j.at("similarity").get<double>()});
  }
  const auto enriched = enrich(lex, cands, checked(s.cfg(), "neologism.tau_sim", 0.5));
  save_lexicon(enriched, s.file("lexicon"));
  s.produced("lexicon");
  std::size_t added = 0;
  for (const auto& [_, terms] : enriched.categories) {
    for (const auto& t : terms) added += t.provenance == Provenance::enriched ? 1 : 0;
  }
  s.details() = {{"version", enriched.version}, {"enriched_terms", added}};
}

void stage_filter(Stage& s) {
  const auto corpus = load_snapshot(s.need("snapshot"));
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto lex = load_lexicon(s.need("lexicon"));
  const auto index = index_lexicon(lex, em);
  std::vector<RelevanceScore> scores;
  std::vector<double> values;
  for (const auto& d : corpus.documents()) {
    scores.push_back(relevance(d, index, em));
    values.push_back(scores.back().score);
  }
  double tau = 0;
  if (const auto* t = s.cfg().find("filter.tau"); t != nullptr && !t->is_null()) {
    tau = t->get<double>();
  } else {
    ThresholdPolicy policy;
    policy.percentile = checked(s.cfg(), "filter.percentile", policy.percentile);
    policy.sample_size = checked(s.cfg(), "filter.sample_size", policy.sample_size);
    policy.min_documents = checked(s.cfg(), "filter.min_documents", policy.min_documents);
    policy.fallback = checked(s.cfg(), "filter.fallback", policy.fallback);
    policy.seed = s.seed(6);
    tau = choose_threshold(values, policy);
  }
  auto result = filter_by_scores(corpus, std::move(scores), tau);
  if (result.retained.empty()) throw Error("filter retained no documents at tau " + std::to_string(tau));
  save_snapshot(result.retained, s.file("filtered", 0));
  save_scores_jsonl(result.scores, s.file("filtered", 1));
  s.produced("filtered");
  s.details() = {{"tau", tau}, {"retained", result.retained.size()}, {"documents", corpus.size()}};
}

void stage_extract_meta(Stage& s) {
  const auto filtered = load_snapshot(s.need("filtered"));
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto lex = load_lexicon(s.need("lexicon"));
  const auto index = index_lexicon(lex, em);
  std::optional<Gazetteer> gaz;
  if (s.cfg().has_input("gazetteer")) gaz = Gazetteer::load(s.single_input("gazetteer"));
  std::map<std::string, RawDocument> raw;
  for (const auto& p : s.input("corpus")) {
    for (auto& d : ingest_jsonl(p).documents) {
      if (filtered.find(d.id)) raw.emplace(d.id, std::move(d));
    }
  }
  const double tau_kp = checked(s.cfg(), "meta.tau_kp", 0.4);
  std::string out;
  for (const auto& d : filtered.documents()) {
    json locations = json::array();
    if (gaz) {
      const auto it = raw.find(d.id);
      const auto matches = it != raw.end() ? extract_locations(it->second, *gaz)
                                           : extract_locations(d.tokens, d.location_hint, *gaz);
      for (const auto& m : matches) {
        locations.push_back({{"name", m.name}, {"admin1", m.admin1}, {"country", m.country}});
      }
    }
    json phrases = json::array();
    for (const auto& [phrase, sim] : extract_keyphrases(d, index, em, tau_kp).phrases) {
      phrases.push_back({{"phrase", phrase}, {"similarity", sim}});
    }
    out += json{{"id", d.id}, {"locations", locations}, {"keyphrases", phrases}}.dump() + "\n";
  }
  write_file(s.file("meta"), out);
  s.produced("meta");
}

void stage_score(Stage& s) {
  const auto filtered_path = s.need("filtered");
  const auto corpus = load_snapshot(filtered_path);
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto lda = load_topic_model(s.need("topicmodel", 0));
  const auto nlda = load_topic_model(s.need("topicmodel", 1));
  const auto lex = load_lexicon(s.need("lexicon"));
  const IndexScorer scorer(lex, em, lda, nlda, checked(s.cfg(), "topic.top_k", 10));
  const double tau_label = checked(s.cfg(), "scoring.tau_label", 0.5);
  std::vector<IndexScore> all_scores;
  std::vector<WeakLabel> all_labels;
  json positives = json::object();
  for (const auto& category : scorer.categories()) {
    std::vector<IndexScore> batch;
    for (const auto& d : corpus.documents()) batch.push_back(scorer.score(d, category));
    auto normalized = normalize_scores(std::move(batch));
    if (normalized.nonpositive_max) spdlog::warn("score: category {} has no positive index score", category);
    auto labels = assign_labels(normalized.scores, tau_label);
    std::size_t pos = 0;
    for (const auto& l : labels) pos += static_cast<std::size_t>(l.label);
    positives[category] = pos;
    all_scores.insert(all_scores.end(), normalized.scores.begin(), normalized.scores.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
  }
  save_labels_jsonl(all_scores, all_labels, s.file("labels"), sha256_file(filtered_path));
  s.produced("labels");
  s.details() = {{"positives", positives}, {"tau_label", tau_label}};
}

void stage_sedo_fit(Stage& s) {
  const auto tweet = load_word2vec_text(s.need("embedding"));
  const auto kb = load_word2vec_text(s.need("kb_embedding"));
  const auto lex = load_lexicon(s.need("lexicon"));
  auto anchors = build_anchor_pairs(tweet, kb, lex);
  const auto* eps = s.cfg().find("sedo.epsilon_ridge");
  const double ridge = eps != nullptr && !eps->is_null() ? eps->get<double>() : default_ridge(anchors);
  const auto a = solve_sylvester(assemble(std::move(anchors), checked(s.cfg(), "sedo.delta", 1.0), ridge),
                                 checked(s.cfg(), "sedo.pair_epsilon", 1e-10));
  save_alignment(a, s.file("sedo"));
  s.produced("sedo");
  s.details() = {{"anchors", a.anchors.size()}, {"residual", a.residual}, {"singular_pairs", a.singular_pairs}};
}

FineTuneMode fine_tune_mode(const PipelineConfig& cfg) {
  return checked(cfg, "sedo.fine_tune_mode", std::string("union")) == "replace" ? FineTuneMode::replace
                                                                                  : FineTuneMode::union_anchors;
}

Lexicon triangulation_lexicon(Stage& s) {
  auto lex = load_lexicon(s.need("lexicon"));
  if (s.cfg().has_input("shift_lexicon")) lex = merge_lexicons({lex, lexicon_from(s, "shift_lexicon")});
  return lex;
}

void stage_sedo_finetune(Stage& s) {
  const auto tweet = load_word2vec_text(s.need("embedding"));
  const auto kb = load_word2vec_text(s.need("kb_embedding"));
  const auto a = load_rehydrated(s, "sedo", tweet, kb);
  const auto external = load_snapshot(s.need("external_snapshot"));
  const auto lex = triangulation_lexicon(s);
  const auto ecfg = eval_config(s.cfg());
  const auto split = split_corpus(external, ecfg.train_fraction, ecfg.split, ecfg.seed);
  const auto external_em = fine_tune_embeddings(tweet, external.subset(split.train), min_count(s.cfg()),
                                                embed_config(s.cfg(), "tweet", s.seed(7)));
  const auto anchors = corpus_anchors(external, split.train, lex, external_em, kb);
  const auto tuned = fine_tune(a, anchors, fine_tune_mode(s.cfg()), checked(s.cfg(), "sedo.pair_epsilon", 1e-10));
  save_alignment(tuned, s.file("sedo_finetuned", 0));
  save_word2vec_text(external_em, s.file("sedo_finetuned", 1));
  s.produced("sedo_finetuned");
  s.details() = {{"new_anchors", anchors.size()}, {"residual", tuned.residual}};
}

void stage_train_clf(Stage& s) {
  const auto corpus = load_snapshot(s.need("filtered"));
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto a = load_alignment(s.need("sedo"));
  const auto labels = training_labels(s, corpus);
  const auto variant = parse_classifier_variant(checked(s.cfg(), "classify.variant", std::string("brf")));
  std::vector<FeatureVector> X;
  std::vector<std::string> ids;
  for (const auto& d : corpus.documents()) {
    if (!labels.contains(d.id)) continue;
    X.push_back(featurize(d, em, &a));
    ids.push_back(d.id);
  }
  if (X.empty()) throw Error("train-clf: no labeled documents");
  std::set<std::string> categories;
  for (const auto& [_, row] : labels) {
    for (const auto& [c, _2] : row) categories.insert(c);
  }
  json out = json::array();
  for (const auto& category : categories) {
    std::vector<int> y;
    for (const auto& id : ids) y.push_back(labels.at(id).at(category));
    out.push_back(to_json(train(variant, X, y, forest_config(s.cfg()), s.seed(8), category)));
  }
  write_file(s.file("classifier"), json{{"classifiers", out}}.dump() + "\n");
  s.produced("classifier");
}

void stage_evaluate(Stage& s) {
  const auto corpus = load_snapshot(s.need("filtered"));
  const auto em = load_word2vec_text(s.need("embedding"));
  const auto a = load_alignment(s.need("sedo"));
  const auto labels = training_labels(s, corpus);
  const auto cmp = run_sedo_comparison(corpus, labels, em, a, eval_config(s.cfg()));
  json deltas = json::array();
  for (const auto& d : cmp.deltas) {
    deltas.push_back({{"category", d.category},
                      {"variant", d.variant},
                      {"precision", round_percent(d.metrics.precision)},
                      {"recall", round_percent(d.metrics.recall)},
                      {"f1", round_percent(d.metrics.f1)}});
  }
  auto merged = cmp.with_sedo;
  merged.rows.insert(merged.rows.end(), cmp.without_sedo.rows.begin(), cmp.without_sedo.rows.end());
  auto j = to_json(merged);
  j["labels"] = checked(s.cfg(), "classify.labels", std::string("weak"));
  j["deltas"] = deltas;
  write_file(s.file("report", 0), j.dump(2) + "\n");
  write_file(s.file("report", 1), to_csv(merged));
  s.produced("report");
}

void stage_ablate(Stage& s) {
  const auto corpus = load_snapshot(s.need("snapshot"));
  const auto general = load_word2vec_text(s.need("general_embedding"));
  const auto labels = gold_labels(corpus);
  if (labels.empty()) throw Error("ablate: the corpus carries no gold labels");
  AblationResources res;
  res.general_lexicon = lexicon_from(s, "general_lexicon");
  res.domain_lexicon = lexicon_from(s, "domain_lexicon");
  res.pretrained = &general;
  res.finetune = embed_config(s.cfg(), "tweet", s.seed(9));
  res.finetune_min_count = min_count(s.cfg());
  res.tau_match = checked(s.cfg(), "eval.tau_match", res.tau_match);
  const auto ecfg = eval_config(s.cfg());
  const auto results = run_ablation(corpus, labels, default_ladder(), res, ecfg);
  json levels = json::array();
  EvalReport merged;
  merged.config_digest = ecfg.config_digest;
  merged.seed = ecfg.seed;
  for (const auto& r : results) {
    levels.push_back({{"level", to_string(r.config.level)},
                      {"use_general_lexicon", r.config.use_general_lexicon},
                      {"use_domain_lexicon", r.config.use_domain_lexicon},
                      {"use_pretrained_embeddings", r.config.use_pretrained_embeddings},
                      {"use_finetuned_embeddings", r.config.use_finetuned_embeddings},
                      {"error_rate", round_percent(r.error_rate)},
                      {"rows", metrics_rows(r.report)}});
    merged.rows.insert(merged.rows.end(), r.report.rows.begin(), r.report.rows.end());
  }
  write_file(s.file("ablation", 0),
             json{{"config_digest", ecfg.config_digest}, {"seed", ecfg.seed}, {"levels", levels}}.dump(2) + "\n");
  write_file(s.file("ablation", 1), to_csv(merged));
  s.produced("ablation");
}

void stage_triangulate(Stage& s) {
  const auto tweet = load_word2vec_text(s.need("embedding"));
  const auto kb = load_word2vec_text(s.need("kb_embedding"));
  const auto a = load_rehydrated(s, "sedo", tweet, kb);
  const auto external_em = load_word2vec_text(s.need("sedo_finetuned", 1));
  const auto external = load_snapshot(s.need("external_snapshot"));
  const auto labels = gold_labels(external);
  if (labels.empty()) throw Error("triangulate: the external corpus carries no gold labels");
  TriangulationInputs in{&external_em, &kb, triangulation_lexicon(s), fine_tune_mode(s.cfg())};
  const auto ecfg = eval_config(s.cfg());
  const auto pre = run_triangulation(a, external, labels, TriangulationMode::pretrained, in, ecfg);
  const auto fin = run_triangulation(a, external, labels, TriangulationMode::finetuned, in, ecfg);
  auto merged = pre;
  merged.rows.insert(merged.rows.end(), fin.rows.begin(), fin.rows.end());
  write_file(s.file("triangulation", 0), to_json(merged).dump(2) + "\n");
  write_file(s.file("triangulation", 1), to_csv(merged));
  s.produced("triangulation");
}

using StageFn = void (*)(Stage&);

const std::vector<std::pair<std::string, StageFn>>& stage_table() {
  static const std::vector<std::pair<std::string, StageFn>> table = {
      {"ingest", stage_ingest},
      {"train-embed", stage_train_embed},
      {"train-topics", stage_train_topics},
      {"detect-neologisms", stage_detect_neologisms},
      {"enrich-lexicon", stage_enrich_lexicon},
      {"filter", stage_filter},
      {"extract-meta", stage_extract_meta},
      {"score", stage_score},
      {"sedo-fit", stage_sedo_fit},
      {"sedo-finetune", stage_sedo_finetune},
      {"train-clf", stage_train_clf},
      {"evaluate", stage_evaluate},
      {"ablate", stage_ablate},
      {"triangulate", stage_triangulate},
  };
  return table;
}

// Stages that only run inside `pipeline` when their inputs are configured.
bool optional_inputs_present(const std::string& stage, const PipelineConfig& cfg) {
  if (stage == "sedo-finetune" || stage == "triangulate") return cfg.has_input("external_corpus");
  if (stage == "ablate") return cfg.has_input("general_corpus");
  return true;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : stage_table()) out.push_back(name);
    return out;
  }();
  return names;
}

void run_stage(const std::string& stage, const PipelineConfig& config) {
  const auto& table = stage_table();
  const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == stage; });
  if (it == table.end()) throw Error("unknown stage: " + stage);
  fs::create_directories(config.out_dir());
  const auto start = std::chrono::steady_clock::now();
  spdlog::info("stage {}", stage);
  Stage s(stage, config);
  it->second(s);
  s.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

void run_pipeline(const PipelineConfig& config) {
  fs::create_directories(config.out_dir());
  for (const auto* f : {"manifest.jsonl", "timings.jsonl"}) fs::remove(config.out_dir() / f);
  for (const auto& stage : stage_names()) {
    if (!optional_inputs_present(stage, config)) {
      spdlog::info("stage {} skipped: inputs not configured", stage);
      continue;
    }
    run_stage(stage, config);
  }
}

}  // namespace neurosym
