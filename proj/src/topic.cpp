#include "neurosym/topic.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

namespace neurosym {

using nlohmann::json;

std::string_view to_string(TopicVariant v) {
  return v == TopicVariant::unigram_lda ? "unigram_LDA" : "ngram_nLDA";
}

TopicVariant parse_topic_variant(std::string_view s) {
  const auto lower = to_lower_ascii(s);
  if (lower == "unigram_lda" || lower == "lda") return TopicVariant::unigram_lda;
  if (lower == "ngram_nlda" || lower == "nlda") return TopicVariant::ngram_nlda;
  throw Error("unknown topic variant: " + std::string(s));
}

std::optional<std::size_t> TopicModel::term_index(const std::string& term) const {
  auto it = term_index_.find(term);
  if (it == term_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> TopicModel::doc_index(const std::string& id) const {
  auto it = doc_index_.find(id);
  if (it == doc_index_.end()) return std::nullopt;
  return it->second;
}

void TopicModel::rebuild_index() {
  term_index_.clear();
  doc_index_.clear();
  for (std::size_t i = 0; i < vocab.size(); ++i) term_index_.emplace(vocab[i], i);
  for (std::size_t i = 0; i < doc_ids.size(); ++i) doc_index_.emplace(doc_ids[i], i);
}

GibbsSampler::GibbsSampler(std::vector<std::vector<std::size_t>> docs, std::size_t vocab_size, int topics,
                           double alpha, double beta, std::uint64_t seed)
    : docs_(std::move(docs)),
      n_dk_(docs_.size(), std::vector<int>(static_cast<std::size_t>(topics), 0)),
      n_kw_(static_cast<std::size_t>(topics), std::vector<int>(vocab_size, 0)),
      n_k_(static_cast<std::size_t>(topics), 0),
      vocab_size_(vocab_size),
      topics_(topics),
      alpha_(alpha),
      beta_(beta),
      rng_(mix_seed(seed, 7)),
      weights_(static_cast<std::size_t>(topics)) {
  z_.resize(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    z_[d].resize(docs_[d].size());
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const int k = static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(topics_)));
      z_[d][i] = k;
      ++n_dk_[d][k];
      ++n_kw_[k][docs_[d][i]];
      ++n_k_[k];
    }
  }
}

void GibbsSampler::sweep() {
  const double vbeta = static_cast<double>(vocab_size_) * beta_;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    auto& ndk = n_dk_[d];
    for (std::size_t i = 0; i < docs_[d].size(); ++i) {
      const auto w = docs_[d][i];
      const int old = z_[d][i];
      --ndk[old];
      --n_kw_[old][w];
      --n_k_[old];
      double total = 0;
      for (int k = 0; k < topics_; ++k) {
        total += (ndk[k] + alpha_) * (n_kw_[k][w] + beta_) / (n_k_[k] + vbeta);
        weights_[k] = total;
      }
      const double r = uniform01(rng_) * total;
      int k = static_cast<int>(std::upper_bound(weights_.begin(), weights_.end(), r) - weights_.begin());
      k = std::min(k, topics_ - 1);
      z_[d][i] = k;
      ++ndk[k];
      ++n_kw_[k][w];
      ++n_k_[k];
    }
  }
}

Matrix GibbsSampler::phi() const {
  Matrix phi(topics_, static_cast<Eigen::Index>(vocab_size_));
  const double vbeta = static_cast<double>(vocab_size_) * beta_;
  for (int k = 0; k < topics_; ++k) {
    const double denom = n_k_[k] + vbeta;
    for (std::size_t w = 0; w < vocab_size_; ++w) {
      phi(k, static_cast<Eigen::Index>(w)) = (n_kw_[k][w] + beta_) / denom;
    }
  }
  return phi;
}

Matrix GibbsSampler::theta() const {
  Matrix theta(static_cast<Eigen::Index>(docs_.size()), topics_);
  const double kalpha = topics_ * alpha_;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    const double denom = static_cast<double>(docs_[d].size()) + kalpha;
    for (int k = 0; k < topics_; ++k) theta(static_cast<Eigen::Index>(d), k) = (n_dk_[d][k] + alpha_) / denom;
  }
  return theta;
}

bool GibbsSampler::counts_consistent() const {
  long long from_docs = 0;
  std::vector<long long> per_topic(static_cast<std::size_t>(topics_), 0);
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    long long sum = 0;
    for (int k = 0; k < topics_; ++k) {
      if (n_dk_[d][k] < 0) return false;
      sum += n_dk_[d][k];
      per_topic[k] += n_dk_[d][k];
    }
    if (sum != static_cast<long long>(docs_[d].size())) return false;
    from_docs += sum;
  }
  long long from_words = 0;
  for (int k = 0; k < topics_; ++k) {
    long long row = 0;
    for (auto c : n_kw_[k]) {
      if (c < 0) return false;
      row += c;
    }
    if (row != n_k_[k] || row != per_topic[k]) return false;
    from_words += row;
  }
  return from_words == from_docs;
}

const std::vector<std::string>& topic_stream(const TokenizedDocument& doc, TopicVariant variant) {
  return variant == TopicVariant::unigram_lda ? doc.tokens : doc.ngrams;
}

TopicModel train_lda(const CorpusSnapshot& corpus, TopicVariant variant, const LdaConfig& cfg,
                     const SweepObserver& observer) {
  if (cfg.topics < 2) throw Error("train_lda: K must be >= 2");
  if (cfg.burn_in < 0 || cfg.iters <= cfg.burn_in) throw Error("train_lda: need iters > burn_in >= 0");
  if (cfg.beta <= 0) throw Error("train_lda: beta must be > 0");
  if (corpus.empty()) throw Error("train_lda: empty corpus");

  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& doc : corpus.documents())
    for (const auto& t : topic_stream(doc, variant)) ++counts[t];
  const auto vocab = Vocab::from_counts(counts, cfg.min_count);
  if (vocab.empty()) throw Error("train_lda: empty corpus (no terms)");

  std::vector<std::vector<std::size_t>> docs;
  docs.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    std::vector<std::size_t> ids;
    for (const auto& t : topic_stream(doc, variant)) {
      if (auto i = vocab.find(t)) ids.push_back(*i);
    }
    docs.push_back(std::move(ids));
  }

  const double alpha = cfg.effective_alpha();
  GibbsSampler sampler(std::move(docs), vocab.size(), cfg.topics, alpha, cfg.beta, cfg.seed);
  Matrix phi_sum = Matrix::Zero(cfg.topics, static_cast<Eigen::Index>(vocab.size()));
  Matrix theta_sum = Matrix::Zero(static_cast<Eigen::Index>(corpus.size()), cfg.topics);
  int samples = 0;
  for (int it = 0; it < cfg.iters; ++it) {
    sampler.sweep();
    if (observer) observer(sampler, it);
    if (it >= cfg.burn_in) {
      phi_sum += sampler.phi();
      theta_sum += sampler.theta();
      ++samples;
    }
  }

  TopicModel model;
  model.topics = cfg.topics;
  model.alpha = alpha;
  model.beta = cfg.beta;
  model.variant = variant;
  model.seed = cfg.seed;
  model.fold_in_sweeps = cfg.fold_in_sweeps;
  model.vocab = vocab.terms;
  model.phi = phi_sum / samples;
  model.theta = theta_sum / samples;
  for (const auto& doc : corpus.documents()) model.doc_ids.push_back(doc.id);
  model.rebuild_index();
  spdlog::debug("lda: {} topics over {} terms, {} docs", cfg.topics, vocab.size(), corpus.size());
  return model;
}

namespace {

std::uint64_t fnv1a(const std::vector<std::size_t>& ids) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto id : ids) {
    h ^= static_cast<std::uint64_t>(id);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TopicMixture doc_topics(const TopicModel& model, const std::vector<std::string>& terms) {
  const int K = model.topics;
  std::vector<std::size_t> ids;
  for (const auto& t : terms) {
    if (auto i = model.term_index(t)) ids.push_back(*i);
  }
  if (ids.empty()) return {Vector::Constant(K, 1.0 / K), true};

  Rng rng(mix_seed(model.seed ^ fnv1a(ids), 11));
  std::vector<int> z(ids.size());
  std::vector<int> ndk(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    z[i] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(K)));
    ++ndk[z[i]];
  }
  std::vector<double> weights(static_cast<std::size_t>(K));
  Vector acc = Vector::Zero(K);
  int samples = 0;
  const int sweeps = std::max(1, model.fold_in_sweeps);
  const double denom = static_cast<double>(ids.size()) + K * model.alpha;
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      --ndk[z[i]];
      double total = 0;
      for (int k = 0; k < K; ++k) {
        total += (ndk[k] + model.alpha) * model.phi(k, static_cast<Eigen::Index>(ids[i]));
        weights[k] = total;
      }
      const double r = uniform01(rng) * total;
      int k = static_cast<int>(std::upper_bound(weights.begin(), weights.end(), r) - weights.begin());
      z[i] = std::min(k, K - 1);
      ++ndk[z[i]];
    }
    if (s >= sweeps / 2) {
      for (int k = 0; k < K; ++k) acc(k) += (ndk[k] + model.alpha) / denom;
      ++samples;
    }
  }
  acc /= samples;
  acc /= acc.sum();
  return {acc, false};
}

TopicMixture doc_topics(const TopicModel& model, const TokenizedDocument& doc) {
  return doc_topics(model, topic_stream(doc, model.variant));
}

Vector topic_mixture_for(const TopicModel& model, const TokenizedDocument& doc) {
  if (model.theta.rows() > 0) {
    if (auto i = model.doc_index(doc.id)) return model.theta.row(static_cast<Eigen::Index>(*i)).transpose();
  }
  return doc_topics(model, doc).distribution;
}

TopicEmbeddings topic_embedding(const TopicModel& tm, const EmbeddingModel& em, int top_k) {
  if (top_k < 1) throw Error("topic_embedding: top_k must be >= 1");
  TopicEmbeddings out{Matrix::Zero(tm.topics, em.dim), std::vector<bool>(static_cast<std::size_t>(tm.topics))};
  const auto V = tm.vocab.size();
  std::vector<std::size_t> order(V);
  for (int k = 0; k < tm.topics; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return tm.phi(k, static_cast<Eigen::Index>(a)) > tm.phi(k, static_cast<Eigen::Index>(b));
    });
    double weight = 0;
    int taken = 0;
    Vector acc = Vector::Zero(em.dim);
    for (auto w : order) {
      if (taken >= top_k) break;
      auto row = em.resolve(tm.vocab[w]);
      if (!row) continue;
      const double p = tm.phi(k, static_cast<Eigen::Index>(w));
      acc += p * em.input.row(static_cast<Eigen::Index>(*row)).transpose();
      weight += p;
      ++taken;
    }
    if (taken == 0 || weight <= 0) {
      out.missing[k] = true;
      continue;
    }
    out.vectors.row(k) = (acc / weight).transpose();
  }
  return out;
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path, bool persist_theta) {
  json j;
  j["K"] = model.topics;
  j["alpha"] = model.alpha;
  j["beta"] = model.beta;
  j["variant"] = to_string(model.variant);
  j["seed"] = model.seed;
  j["fold_in_sweeps"] = model.fold_in_sweeps;
  std::string joined;
  for (const auto& t : model.vocab) joined += t + '\n';
  j["vocab_digest"] = sha256_hex(joined);
  j["vocab"] = model.vocab;
  std::vector<double> phi;
  phi.reserve(static_cast<std::size_t>(model.phi.size()));
  for (Eigen::Index k = 0; k < model.phi.rows(); ++k)
    for (Eigen::Index w = 0; w < model.phi.cols(); ++w) phi.push_back(model.phi(k, w));
  j["phi"] = phi;
  j["doc_ids"] = model.doc_ids;
  if (persist_theta) {
    std::vector<double> theta;
    for (Eigen::Index d = 0; d < model.theta.rows(); ++d)
      for (Eigen::Index k = 0; k < model.theta.cols(); ++k) theta.push_back(model.theta(d, k));
    j["theta"] = theta;
  }
  write_file(path, j.dump());
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  TopicModel m;
  m.topics = j.at("K").get<int>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.variant = parse_topic_variant(j.at("variant").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.fold_in_sweeps = j.value("fold_in_sweeps", 50);
  m.vocab = j.at("vocab").get<std::vector<std::string>>();
  const auto phi = j.at("phi").get<std::vector<double>>();
  const auto V = static_cast<Eigen::Index>(m.vocab.size());
  if (static_cast<Eigen::Index>(phi.size()) != m.topics * V) throw Error("topicmodel: phi size mismatch");
  m.phi.resize(m.topics, V);
  for (Eigen::Index k = 0; k < m.topics; ++k)
    for (Eigen::Index w = 0; w < V; ++w) m.phi(k, w) = phi[static_cast<std::size_t>(k * V + w)];
  m.doc_ids = j.value("doc_ids", std::vector<std::string>());
  if (j.contains("theta")) {
    const auto theta = j["theta"].get<std::vector<double>>();
    const auto D = static_cast<Eigen::Index>(m.doc_ids.size());
    if (static_cast<Eigen::Index>(theta.size()) != D * m.topics) throw Error("topicmodel: theta size mismatch");
    m.theta.resize(D, m.topics);
    for (Eigen::Index d = 0; d < D; ++d)
      for (Eigen::Index k = 0; k < m.topics; ++k) m.theta(d, k) = theta[static_cast<std::size_t>(d * m.topics + k)];
  }
  m.rebuild_index();
  return m;
}

}  // namespace neurosym
