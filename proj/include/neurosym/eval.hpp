#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurosym/classify.hpp"
#include "neurosym/corpus.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/lexicon.hpp"
#include "neurosym/sedo.hpp"

namespace neurosym {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Confusion confusion;
  // set when the corresponding denominator was zero
  bool precision_undefined = false;
  bool recall_undefined = false;

  double accuracy() const;
};

/// Binary precision, recall and F1 with label 1 as the positive class.
Metrics metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred);

/// Per-document binary labels: doc id -> category -> 0/1.
using LabelTable = std::map<std::string, std::map<std::string, int>>;

/// Gold labels carried by the documents themselves.
LabelTable gold_labels(const CorpusSnapshot& corpus);

enum class SplitMode { chronological, random };

std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view s);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Chronological: the earliest train_fraction of documents by (timestamp,
/// id) train, the rest test. Random: a seeded permutation cut at the same
/// point. Both index sets are returned in corpus order.
Split split_corpus(const CorpusSnapshot& corpus, double train_fraction, SplitMode mode, std::uint64_t seed);

struct ReportRow {
  std::string config;  // arm or ladder level, e.g. "sedo", "raw", "A2"
  std::string category;
  std::string variant;
  Metrics metrics;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::string config_digest;
  std::uint64_t seed = 0;
  // wall clock; kept out of to_json so reports stay reproducible
  double runtime_seconds = 0;

  const ReportRow* find(std::string_view config, std::string_view category, std::string_view variant) const;
  /// Mean F1 (fraction) over the rows of one config and variant.
  double mean_f1(std::string_view config, std::string_view variant) const;
};

struct EvalConfig {
  std::vector<ClassifierVariant> variants{ClassifierVariant::brf};
  std::vector<std::string> categories;  // empty: every category in the labels
  ForestConfig forest;
  SplitMode split = SplitMode::chronological;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  // digest of the configuration that produced the run, copied into reports
  std::string config_digest;
};

/// Trains every (category, variant) on the train split and scores the test
/// split. `config_name` tags the rows.
EvalReport evaluate_features(const CorpusSnapshot& corpus, const std::vector<FeatureVector>& features,
                             const LabelTable& labels, const Split& split, const EvalConfig& cfg,
                             const std::string& config_name);

EvalReport evaluate(const CorpusSnapshot& corpus, const LabelTable& labels, const EmbeddingModel& em,
                    const SedoAlignment* alignment, const EvalConfig& cfg, const std::string& config_name);

struct SedoComparison {
  EvalReport with_sedo;
  EvalReport without_sedo;
  // with minus without, per (category, variant): precision, recall, F1 in
  // percentage points
  std::vector<ReportRow> deltas;
};

/// Each variant trained twice on the same split and seed: once on modulated
/// features, once on raw tweet-space features.
SedoComparison run_sedo_comparison(const CorpusSnapshot& corpus, const LabelTable& labels, const EmbeddingModel& em,
                                   const SedoAlignment& alignment, const EvalConfig& cfg);

enum class AblationLevel { a0, a1, a2, a3, a4 };

std::string_view to_string(AblationLevel level);
AblationLevel parse_ablation_level(std::string_view s);

/// Cumulative ladder: A0 matches the category name only, A1 adds the general
/// lexicon, A2 the domain lexicon, A3 embedding matches under pretrained
/// vectors, A4 the same under vectors fine-tuned on the training split.
struct AblationConfig {
  AblationLevel level = AblationLevel::a0;
  bool use_general_lexicon = false;
  bool use_domain_lexicon = false;
  bool use_pretrained_embeddings = false;
  bool use_finetuned_embeddings = false;

  static AblationConfig at(AblationLevel level);
};

std::vector<AblationConfig> default_ladder();

struct AblationResources {
  Lexicon general_lexicon;
  Lexicon domain_lexicon;
  const EmbeddingModel* pretrained = nullptr;
  // fine-tuned on the training split; built from `pretrained` when null
  const EmbeddingModel* finetuned = nullptr;
  TrainConfig finetune;
  std::uint64_t finetune_min_count = 2;
  // minimum cosine for an embedding match
  double tau_match = 0.6;
};

struct AblationResult {
  AblationConfig config;
  double error_rate = 0;  // 1 - accuracy, averaged over categories
  EvalReport report;
};

/// Labels the test split at each level and scores it against the gold
/// labels. A document is assigned to the category with the strongest match
/// (exact lexicon hits count 1.0); no match above tau_match means negative
/// for every category.
std::vector<AblationResult> run_ablation(const CorpusSnapshot& corpus, const LabelTable& labels,
                                         const std::vector<AblationConfig>& ladder, const AblationResources& res,
                                         const EvalConfig& cfg);

enum class TriangulationMode { pretrained, finetuned };

std::string_view to_string(TriangulationMode m);
TriangulationMode parse_triangulation_mode(std::string_view s);

struct TriangulationInputs {
  const EmbeddingModel* tweet = nullptr;  // covers the external vocabulary
  const EmbeddingModel* kb = nullptr;
  Lexicon lexicon;  // anchor source for fine-tuning
  FineTuneMode fine_tune_mode = FineTuneMode::union_anchors;
};

/// Evaluates `alignment` on an external labeled corpus. Fine-tuned mode
/// first re-solves on the lexicon anchors that occur in the external
/// training split and are known to both models.
EvalReport run_triangulation(const SedoAlignment& alignment, const CorpusSnapshot& external, const LabelTable& labels,
                             TriangulationMode mode, const TriangulationInputs& inputs, const EvalConfig& cfg);

/// Anchors for fine-tuning: lexicon terms present in the documents and in
/// both models.
AnchorSet corpus_anchors(const CorpusSnapshot& corpus, const std::vector<std::size_t>& docs, const Lexicon& lex,
                         const EmbeddingModel& tweet, const EmbeddingModel& kb);

double round_percent(double fraction);

nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);
void save_report(const EvalReport& report, const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path);

}  // namespace neurosym
