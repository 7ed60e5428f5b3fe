#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neurosym/corpus.hpp"
#include "neurosym/lexicon.hpp"
#include "neurosym/semantic.hpp"

namespace neurosym::synth {

/// Stopword list shared by the bundled corpora.
const std::vector<std::string>& default_stopwords();
/// The list as a stopword file: a '#' header line, then one word per line.
std::string stopword_file_contents();
PreprocessConfig default_preprocess_config(int n_max = 3);

/// Two disjoint co-occurrence clusters: terms a1..a5 and b1..b5.
std::vector<RawDocument> two_cluster_corpus(std::uint64_t seed, std::size_t docs_per_cluster = 200,
                                            std::size_t doc_length = 8);

struct PlantedTopics {
  std::vector<RawDocument> documents;
  // planted topic-word distributions over `terms`
  std::vector<std::string> terms;
  std::array<std::vector<double>, 2> topic_word;
};

/// Topic A emits {flu, fever, cough}, topic B emits {loan, debt, bank}. Each
/// document draws 90% of its words from one topic and 10% from the other.
PlantedTopics planted_topic_corpus(std::uint64_t seed, std::size_t docs = 200, std::size_t doc_length = 20);

/// Term tiers for one mental-health category. Tier 0 is the category name,
/// tier 1 general-lexicon terms, tier 2 domain-lexicon terms, tier 3
/// contextual terms known only from general text, tier 4 neologisms seen only
/// in the domain (tweet) corpus.
struct CategoryTerms {
  std::string name;
  std::array<std::vector<std::string>, 5> tiers;
};

const std::vector<CategoryTerms>& benchmark_categories();
const std::vector<std::string>& filler_terms();

struct BenchmarkConfig {
  std::size_t docs_per_category = 1000;
  std::size_t cues_per_doc = 2;
  std::size_t fillers_per_doc = 18;
  // probability that a cue is drawn from each tier
  std::array<double, 5> tier_weights{0.1, 0.2, 0.2, 0.25, 0.25};
  // tier-4 cues drawn before this date fall back to tier 3
  std::string neologism_onset = "2020-09-01";
  // tweets with fillers only, negative for every category
  std::size_t offtopic_docs = 0;
  std::size_t general_docs_per_category = 400;
  std::size_t kb_docs_per_category = 300;
  std::uint64_t seed = 42;
};

struct PlantedBenchmark {
  std::vector<RawDocument> tweets;   // gold labels per category
  std::vector<RawDocument> general;  // general-purpose text (pretrained embeddings)
  std::vector<RawDocument> kb;       // knowledge-base text (KB-space embeddings)
  Lexicon general_lexicon;           // tier 1 (+ names)
  Lexicon domain_lexicon;            // tier 2
  Lexicon lexicon;                   // general + domain
  std::vector<GazetteerEntry> gazetteer;
};

PlantedBenchmark planted_benchmark(const BenchmarkConfig& cfg);

/// External corpus for triangulation: the same categories expressed through
/// a shifted vocabulary. Each shifted term is listed in `shift_lexicon` and
/// appears in KB text, so fine-tuning can anchor it.
struct VocabularyShift {
  std::vector<RawDocument> external;  // gold labels
  std::vector<RawDocument> kb_extra;  // KB text covering the shifted terms
  Lexicon shift_lexicon;
};

VocabularyShift vocabulary_shift(const BenchmarkConfig& cfg);

/// Window and baseline corpora where "zoomfatigue" rises and co-occurs with
/// anxiety seed terms.
struct NeologismScenario {
  std::vector<RawDocument> baseline;
  std::vector<RawDocument> window;
  Lexicon lexicon;
};

NeologismScenario neologism_scenario(std::uint64_t seed);

/// Sizes of the small corpus the bundled pipeline config runs on.
BenchmarkConfig sample_config(std::uint64_t seed);

/// Writes the bundled data set under `dir`: stopwords.txt, preprocess.json,
/// synthetic/ (two-cluster, planted-topic and neologism corpora), benchmark/
/// (full planted benchmark) and sample/ (small corpus), each of the last two
/// with lexicons, gazetteer.tsv and pipeline.json.
void write_bundle(const std::filesystem::path& dir, std::uint64_t seed = 42);

}  // namespace neurosym::synth
