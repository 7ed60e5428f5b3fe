#include "neurosym/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "neurosym/common.hpp"

namespace neurosym::synth {

const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {
      "a",     "about", "after", "all",   "also",  "am",    "an",    "and",   "any",   "are",   "as",
      "at",    "be",    "been",  "being", "but",   "by",    "can",   "could", "did",   "do",    "does",
      "doing", "for",   "from",  "had",   "has",   "have",  "having", "he",   "her",   "here",  "him",
      "his",   "how",   "i",     "if",    "im",    "in",    "into",  "is",    "it",    "its",   "just",
      "me",    "my",    "myself", "of",   "on",    "or",    "our",   "ours",  "she",   "so",    "some",
      "such",  "than",  "that",  "the",   "their", "them",  "then",  "there", "these", "they",  "this",
      "those", "to",    "too",   "up",    "us",    "very",  "was",   "we",    "were",  "what",  "when",
      "where", "which", "while", "who",   "why",   "will",  "with",  "would", "you",   "your"};
  return words;
}

std::string stopword_file_contents() {
  std::string out = "# neurosym stopword list v1\n";
  for (const auto& w : default_stopwords()) out += w + '\n';
  return out;
}

PreprocessConfig default_preprocess_config(int n_max) {
  PreprocessConfig cfg;
  cfg.n_max = n_max;
  cfg.stopwords.insert(default_stopwords().begin(), default_stopwords().end());
  cfg.stopwords_digest = sha256_hex(stopword_file_contents());
  return cfg;
}

namespace {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[uniform_index(rng, items.size())];
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(rng, i)]);
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string make_id(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(prefix) + buf;
}

// Spread over 2020-03-01 .. 2021-01-28 in day steps.
std::string timestamp_for(Rng& rng) {
  static constexpr int month_days[] = {31, 30, 31, 30, 31, 31, 30, 31, 30, 31, 31};
  int day = static_cast<int>(uniform_index(rng, 334));
  int month = 3, year = 2020;
  for (int m = 0; m < 11 && day >= month_days[m]; ++m) {
    day -= month_days[m];
    if (++month > 12) {
      month = 1;
      ++year;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:00Z", year, month, day + 1,
                static_cast<int>(uniform_index(rng, 24)), static_cast<int>(uniform_index(rng, 60)));
  return buf;
}

}  // namespace

std::vector<RawDocument> two_cluster_corpus(std::uint64_t seed, std::size_t docs_per_cluster, std::size_t doc_length) {
  Rng rng(mix_seed(seed, 101));
  const std::vector<std::string> a{"a1", "a2", "a3", "a4", "a5"};
  const std::vector<std::string> b{"b1", "b2", "b3", "b4", "b5"};
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < 2 * docs_per_cluster; ++i) {
    const auto& cluster = i % 2 == 0 ? a : b;
    std::vector<std::string> words;
    for (std::size_t k = 0; k < doc_length; ++k) words.push_back(pick(rng, cluster));
    docs.push_back({make_id("tc", i), join(words), timestamp_for(rng), Source::other, std::nullopt, {}});
  }
  return docs;
}

PlantedTopics planted_topic_corpus(std::uint64_t seed, std::size_t docs, std::size_t doc_length) {
  Rng rng(mix_seed(seed, 102));
  PlantedTopics out;
  out.terms = {"flu", "fever", "cough", "loan", "debt", "bank"};
  out.topic_word[0] = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0, 0};
  out.topic_word[1] = {0, 0, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3};
  const std::vector<std::string> a(out.terms.begin(), out.terms.begin() + 3);
  const std::vector<std::string> b(out.terms.begin() + 3, out.terms.end());
  for (std::size_t i = 0; i < docs; ++i) {
    const bool major_a = i % 2 == 0;
    std::vector<std::string> words;
    for (std::size_t k = 0; k < doc_length; ++k) {
      const bool from_a = (uniform01(rng) < 0.9) == major_a;
      words.push_back(pick(rng, from_a ? a : b));
    }
    RawDocument d{make_id("pt", i), join(words), timestamp_for(rng), Source::other, std::nullopt, {}};
    d.gold["topic_a"] = major_a ? 1 : 0;
    out.documents.push_back(std::move(d));
  }
  return out;
}

const std::vector<CategoryTerms>& benchmark_categories() {
  static const std::vector<CategoryTerms> cats = {
      {"addiction",
       {{{"addiction"},
         {"drunk", "crave", "relapse", "overdose"},
         {"opioid", "fentanyl", "withdrawal", "methadone"},
         {"hangover", "binge", "rehab", "sober"},
         {"quarantini", "winemom", "drinkdemic", "vapebreak"}}}},
      {"anxiety",
       {{{"anxiety"},
         {"panic", "worry", "nervous", "fear"},
         {"agoraphobia", "insomnia", "restless", "dread"},
         {"jittery", "tense", "uneasy", "frantic"},
         {"zoomfatigue", "coronasomnia", "maskpanic", "covidjitter"}}}},
      {"depression",
       {{{"depression"},
         {"sad", "hopeless", "lonely", "cry"},
         {"anhedonia", "dysthymia", "melancholia", "despair"},
         {"gloomy", "numb", "bleak", "empty"},
         {"doomscroll", "pandemicbrain", "covidblue", "languish"}}}},
  };
  return cats;
}

const std::vector<std::string>& filler_terms() {
  static const std::vector<std::string> words = {
      "today",   "work",    "home",     "friend",  "family",  "coffee",  "morning", "night",   "weekend",
      "city",    "street",  "phone",    "video",   "music",   "movie",   "game",    "school",  "office",
      "team",    "boss",    "kid",      "dog",     "cat",     "dinner",  "lunch",   "walk",    "park",
      "car",     "bus",     "train",    "weather", "rain",    "sun",     "book",    "shop",    "store",
      "price",   "job",     "meeting",  "email",   "laptop",  "screen",  "mask",    "vaccine", "lockdown",
      "covid",   "pandemic", "quarantine", "virus", "hospital", "nurse",  "update",  "week",    "month",
      "year",    "garden",  "kitchen",  "window",  "class",   "road"};
  return words;
}

namespace {

const std::vector<std::string>& kb_fillers() {
  static const std::vector<std::string> words = {
      "symptom",  "patient",  "diagnosis", "treatment", "criteria", "disorder", "chronic",  "clinical",
      "therapy",  "medication", "assessment", "severity", "episode", "onset",   "screening", "guideline",
      "outcome",  "risk",     "prevalence", "cohort",   "dosage",   "referral", "intervention", "scale"};
  return words;
}

Lexicon tier_lexicon(std::initializer_list<int> tiers) {
  Lexicon lex;
  lex.version = 1;
  for (const auto& cat : benchmark_categories()) {
    auto& terms = lex.categories[cat.name];
    for (int t : tiers) {
      for (const auto& w : cat.tiers[static_cast<std::size_t>(t)]) terms.push_back({w, 1.0, Provenance::seed});
    }
  }
  validate(lex);
  return lex;
}

int draw_tier(Rng& rng, const std::array<double, 5>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double r = uniform01(rng) * total;
  for (int t = 0; t < 5; ++t) {
    r -= weights[static_cast<std::size_t>(t)];
    if (r < 0) return t;
  }
  return 4;
}

// Renders a bag of terms as tweet-like text: shuffled, a few stopwords,
// occasional hashtags, capitals, mentions and URLs.
std::string render_tweet(Rng& rng, std::vector<std::string> words, const std::vector<std::string>& hashtag_ok) {
  static const std::vector<std::string> glue = {"the", "and", "i", "my", "so", "this", "with", "is"};
  shuffle(rng, words);
  std::vector<std::string> out;
  for (auto& w : words) {
    if (uniform01(rng) < 0.25) out.push_back(pick(rng, glue));
    const bool tag = std::find(hashtag_ok.begin(), hashtag_ok.end(), w) != hashtag_ok.end() && uniform01(rng) < 0.15;
    if (uniform01(rng) < 0.1) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    out.push_back(tag ? "#" + w : w);
  }
  if (uniform01(rng) < 0.05) out.push_back("@friend" + std::to_string(uniform_index(rng, 100)));
  if (uniform01(rng) < 0.05) out.push_back("https://t.co/x" + std::to_string(uniform_index(rng, 1000)));
  return join(out);
}

struct Place {
  std::string name;
  std::string admin1;
  double lat;
  double lon;
};

const std::vector<Place>& places() {
  static const std::vector<Place> p = {
      {"new york", "NY", 40.7128, -74.0060},     {"south carolina", "SC", 33.8361, -81.1637},
      {"carolina", "PR", 18.3808, -65.9574},     {"ohio", "OH", 40.4173, -82.9071},
      {"texas", "TX", 31.9686, -99.9018},        {"los angeles", "CA", 34.0522, -118.2437},
      {"dayton", "OH", 39.7589, -84.1916},       {"boston", "MA", 42.3601, -71.0589}};
  return p;
}

}  // namespace

PlantedBenchmark planted_benchmark(const BenchmarkConfig& cfg) {
  PlantedBenchmark out;
  out.general_lexicon = tier_lexicon({0, 1});
  out.domain_lexicon = tier_lexicon({2});
  out.lexicon = merge_lexicons({out.general_lexicon, out.domain_lexicon});
  for (const auto& p : places()) out.gazetteer.push_back({p.name, p.admin1, "US", p.lat, p.lon});

  const auto& cats = benchmark_categories();
  Rng rng(mix_seed(cfg.seed, 201));
  std::size_t n = 0;
  for (std::size_t i = 0; i < cfg.docs_per_category * cats.size(); ++i) {
    const auto& cat = cats[i % cats.size()];
    auto timestamp = timestamp_for(rng);
    std::vector<std::string> words;
    std::vector<std::string> cues;
    for (std::size_t c = 0; c < cfg.cues_per_doc; ++c) {
      int tier = draw_tier(rng, cfg.tier_weights);
      if (tier == 4 && timestamp < cfg.neologism_onset) tier = 3;
      cues.push_back(pick(rng, cat.tiers[static_cast<std::size_t>(tier)]));
    }
    words = cues;
    for (std::size_t f = 0; f < cfg.fillers_per_doc; ++f) words.push_back(pick(rng, filler_terms()));
    RawDocument d{make_id("tw", n++), render_tweet(rng, words, cues), std::move(timestamp), Source::twitter,
                  std::nullopt, {}};
    if (uniform01(rng) < 0.2) {
      d.text += " in " + pick(rng, places()).name;
    } else if (uniform01(rng) < 0.1) {
      d.location_hint = pick(rng, places()).name;
    }
    for (const auto& other : cats) d.gold[other.name] = other.name == cat.name ? 1 : 0;
    out.tweets.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < cfg.offtopic_docs; ++i) {
    std::vector<std::string> words;
    for (std::size_t f = 0; f < cfg.fillers_per_doc + cfg.cues_per_doc; ++f) words.push_back(pick(rng, filler_terms()));
    RawDocument d{make_id("tw", n++), render_tweet(rng, words, {}), timestamp_for(rng), Source::twitter, std::nullopt,
                  {}};
    for (const auto& cat : cats) d.gold[cat.name] = 0;
    out.tweets.push_back(std::move(d));
  }

  // General text: names, general and domain terms next to contextual
  // (tier 3) terms, with everyday fillers.
  n = 0;
  for (std::size_t i = 0; i < cfg.general_docs_per_category * cats.size(); ++i) {
    const auto& cat = cats[i % cats.size()];
    std::vector<std::string> words;
    for (int k = 0; k < 3; ++k) words.push_back(pick(rng, cat.tiers[static_cast<std::size_t>(1 + uniform_index(rng, 2))]));
    words.push_back(pick(rng, cat.tiers[0]));
    for (int k = 0; k < 3; ++k) words.push_back(pick(rng, cat.tiers[3]));
    for (int k = 0; k < 6; ++k) words.push_back(pick(rng, filler_terms()));
    out.general.push_back({make_id("gn", n++), render_tweet(rng, words, {}), timestamp_for(rng), Source::news,
                           std::nullopt, {}});
  }

  // KB text: only lexicon terms (tiers 0-2) among clinical vocabulary.
  n = 0;
  for (std::size_t i = 0; i < cfg.kb_docs_per_category * cats.size(); ++i) {
    const auto& cat = cats[i % cats.size()];
    std::vector<std::string> words;
    for (int k = 0; k < 5; ++k) words.push_back(pick(rng, cat.tiers[uniform_index(rng, 3)]));
    for (int k = 0; k < 5; ++k) words.push_back(pick(rng, kb_fillers()));
    out.kb.push_back({make_id("kb", n++), render_tweet(rng, words, {}), timestamp_for(rng), Source::other,
                      std::nullopt, {}});
  }
  return out;
}

VocabularyShift vocabulary_shift(const BenchmarkConfig& cfg) {
  static const std::map<std::string, std::vector<std::string>> shifted = {
      {"addiction", {"sesh", "plug", "blackout", "tolerance"}},
      {"anxiety", {"spiral", "overthink", "heartrace", "meltdown"}},
      {"depression", {"bedrot", "sadpost", "voidmood", "flatline"}},
  };
  VocabularyShift out;
  out.shift_lexicon.version = 1;
  for (const auto& [name, terms] : shifted) {
    for (const auto& t : terms) out.shift_lexicon.categories[name].push_back({t, 1.0, Provenance::seed});
  }
  validate(out.shift_lexicon);

  const auto& cats = benchmark_categories();
  Rng rng(mix_seed(cfg.seed, 301));
  std::size_t n = 0;
  const std::size_t docs = std::max<std::size_t>(cfg.docs_per_category / 2, 1);
  for (std::size_t i = 0; i < docs * cats.size(); ++i) {
    const auto& cat = cats[i % cats.size()];
    const auto& novel = shifted.at(cat.name);
    std::vector<std::string> words;
    std::vector<std::string> cues;
    for (std::size_t c = 0; c < cfg.cues_per_doc; ++c) {
      // mostly shifted vocabulary, sometimes an old contextual term
      cues.push_back(uniform01(rng) < 0.8 ? pick(rng, novel) : pick(rng, cat.tiers[3]));
    }
    words = cues;
    for (std::size_t f = 0; f < cfg.fillers_per_doc; ++f) words.push_back(pick(rng, filler_terms()));
    RawDocument d{make_id("ex", n++), render_tweet(rng, words, cues), timestamp_for(rng), Source::reddit,
                  std::nullopt, {}};
    for (const auto& other : cats) d.gold[other.name] = other.name == cat.name ? 1 : 0;
    out.external.push_back(std::move(d));
  }
  n = 0;
  for (std::size_t i = 0; i < cfg.kb_docs_per_category * cats.size(); ++i) {
    const auto& cat = cats[i % cats.size()];
    std::vector<std::string> words;
    for (int k = 0; k < 2; ++k) words.push_back(pick(rng, shifted.at(cat.name)));
    for (int k = 0; k < 3; ++k) words.push_back(pick(rng, cat.tiers[uniform_index(rng, 3)]));
    for (int k = 0; k < 5; ++k) words.push_back(pick(rng, kb_fillers()));
    out.kb_extra.push_back({make_id("kx", n++), render_tweet(rng, words, {}), timestamp_for(rng), Source::other,
                            std::nullopt, {}});
  }
  return out;
}

NeologismScenario neologism_scenario(std::uint64_t seed) {
  NeologismScenario out;
  out.lexicon = tier_lexicon({0, 1});
  Rng rng(mix_seed(seed, 401));
  const auto& cats = benchmark_categories();
  const auto make = [&](std::string_view prefix, std::size_t count, bool with_neologism) {
    std::vector<RawDocument> docs;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& cat = cats[i % cats.size()];
      std::vector<std::string> words;
      for (int k = 0; k < 3; ++k) words.push_back(pick(rng, cat.tiers[uniform_index(rng, 2)]));
      if (with_neologism && cat.name == "anxiety" && uniform01(rng) < 0.6) {
        words.push_back("zoomfatigue");
        words.push_back(pick(rng, cat.tiers[1]));
      }
      for (int k = 0; k < 5; ++k) words.push_back(pick(rng, filler_terms()));
      docs.push_back({make_id(prefix, i), render_tweet(rng, words, {}), timestamp_for(rng), Source::twitter,
                      std::nullopt, {}});
    }
    return docs;
  };
  out.baseline = make("bl", 600, false);
  out.window = make("wn", 600, true);
  return out;
}

}  // namespace neurosym::synth

namespace neurosym::synth {

BenchmarkConfig sample_config(std::uint64_t seed) {
  BenchmarkConfig cfg;
  cfg.docs_per_category = 300;
  cfg.fillers_per_doc = 10;
  cfg.offtopic_docs = 300;
  cfg.general_docs_per_category = 150;
  cfg.kb_docs_per_category = 100;
  cfg.seed = seed;
  return cfg;
}

namespace {

void write_gazetteer(const std::vector<GazetteerEntry>& entries, const std::filesystem::path& path) {
  std::string out = "name\tadmin1\tcountry\tlat\tlon\n";
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "\t%.4f\t%.4f\n", e.lat, e.lon);
    out += e.name + '\t' + e.admin1 + '\t' + e.country + buf;
  }
  write_file(path, out);
}

nlohmann::json pipeline_json(bool sample, std::uint64_t seed) {
  using nlohmann::json;
  const int epochs = sample ? 20 : 10;
  return json{
      {"seed", seed},
      {"workers", 1},
      {"paths",
       {{"corpus", "tweets.jsonl"},
        {"kb_corpus", json::array({"kb.jsonl", "kb_extra.jsonl"})},
        {"general_corpus", "general.jsonl"},
        {"external_corpus", "external.jsonl"},
        {"preprocess", "../preprocess.json"},
        {"general_lexicon", "lexicon_general.json"},
        {"domain_lexicon", "lexicon_domain.json"},
        {"shift_lexicon", "lexicon_shift.json"},
        {"gazetteer", "gazetteer.tsv"},
        {"output", "out"}}},
      {"embedding",
       {{"min_count", 2},
        {"tweet", {{"dim", 64}, {"window", 5}, {"negatives", 5}, {"epochs", epochs}, {"learning_rate", 0.025},
                   {"subsample", 1e-3}, {"center", true}}},
        {"kb", {{"dim", 16}, {"window", 5}, {"negatives", 5}, {"epochs", epochs}, {"learning_rate", 0.025},
                {"subsample", 1e-3}, {"center", true}}},
        {"general", {{"dim", 64}, {"window", 5}, {"negatives", 5}, {"epochs", epochs}, {"learning_rate", 0.025},
                     {"subsample", 1e-3}, {"center", true}}}}},
      {"topic",
       {{"topics", sample ? 6 : 10}, {"beta", 0.01}, {"iters", sample ? 150 : 300}, {"burn_in", sample ? 50 : 100},
        {"fold_in_sweeps", 50}, {"top_k", 10}}},
      {"neologism", {{"window_start", "2020-09-01"}, {"min_rate", 15.0}, {"growth", 3.0}, {"tau_sim", 0.5}}},
      {"filter", {{"percentile", sample ? 25.0 : 75.0}, {"sample_size", 10000}, {"min_documents", 100},
                  {"fallback", 0.6}}},
      {"meta", {{"tau_kp", 0.4}}},
      {"scoring", {{"tau_label", 0.65}}},
      {"sedo", {{"delta", 1.0}, {"epsilon_ridge", nullptr}, {"pair_epsilon", 1e-10}, {"fine_tune_mode", "union"}}},
      {"classify", {{"variant", "brf"}, {"labels", "weak"}, {"n_trees", sample ? 50 : 100}, {"max_depth", 0},
                    {"min_leaf", 1}, {"features_per_split", 0}}},
      {"eval", {{"variants", json::array({"nb", "rf", "brf", "bsrf"})}, {"split", "chronological"},
                {"train_fraction", 0.8}, {"tau_match", 0.6}}},
  };
}

void write_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& dir, bool sample) {
  const auto bench = planted_benchmark(cfg);
  const auto shift = vocabulary_shift(cfg);
  save_raw_jsonl(bench.tweets, dir / "tweets.jsonl");
  save_raw_jsonl(bench.general, dir / "general.jsonl");
  save_raw_jsonl(bench.kb, dir / "kb.jsonl");
  save_raw_jsonl(shift.kb_extra, dir / "kb_extra.jsonl");
  save_raw_jsonl(shift.external, dir / "external.jsonl");
  save_lexicon(bench.general_lexicon, dir / "lexicon_general.json");
  save_lexicon(bench.domain_lexicon, dir / "lexicon_domain.json");
  save_lexicon(shift.shift_lexicon, dir / "lexicon_shift.json");
  write_gazetteer(bench.gazetteer, dir / "gazetteer.tsv");
  write_file(dir / "pipeline.json", pipeline_json(sample, cfg.seed).dump(2) + "\n");
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, std::uint64_t seed) {
  write_file(dir / "stopwords.txt", stopword_file_contents());
  const auto pre = default_preprocess_config(3);
  write_file(dir / "preprocess.json",
             nlohmann::json{{"n_max", 3}, {"stopwords_digest", pre.stopwords_digest}, {"strip_urls", true}}.dump(2) +
                 "\n");

  const auto syn = dir / "synthetic";
  save_raw_jsonl(two_cluster_corpus(seed), syn / "two_cluster.jsonl");
  save_raw_jsonl(planted_topic_corpus(seed).documents, syn / "planted_topics.jsonl");
  const auto neo = neologism_scenario(seed);
  save_raw_jsonl(neo.baseline, syn / "neologism_baseline.jsonl");
  save_raw_jsonl(neo.window, syn / "neologism_window.jsonl");
  save_lexicon(neo.lexicon, syn / "neologism_lexicon.json");

  BenchmarkConfig full;
  full.seed = seed;
  write_benchmark(full, dir / "benchmark", false);
  write_benchmark(sample_config(seed), dir / "sample", true);
}

}  // namespace neurosym::synth
