#include "neurosym/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

namespace neurosym {

std::optional<std::size_t> Vocab::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocab Vocab::from_terms(std::vector<std::string> terms, std::vector<std::uint64_t> counts,
                        std::uint64_t min_count) {
  if (terms.size() != counts.size()) throw Error("vocab: term/count length mismatch");
  Vocab v;
  v.terms = std::move(terms);
  v.counts = std::move(counts);
  v.min_count = min_count;
  v.index_.reserve(v.terms.size());
  for (std::size_t i = 0; i < v.terms.size(); ++i) {
    if (!v.index_.emplace(v.terms[i], i).second) throw Error("vocab: duplicate term " + v.terms[i]);
  }
  return v;
}

Vocab Vocab::from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                         std::uint64_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [term, c] : counts) {
    if (c >= min_count) kept.emplace_back(term, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> terms;
  std::vector<std::uint64_t> cs;
  for (auto& [t, c] : kept) {
    terms.push_back(std::move(t));
    cs.push_back(c);
  }
  return from_terms(std::move(terms), std::move(cs), min_count);
}

namespace {

std::unordered_map<std::string, std::uint64_t> count_terms(const CorpusSnapshot& corpus) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& doc : corpus.documents()) {
    for (const auto& g : doc.ngrams) ++counts[g];
    for (const auto& h : doc.hashtags) ++counts[h];
  }
  return counts;
}

}  // namespace

Vocab build_vocab(const CorpusSnapshot& corpus, std::uint64_t min_count) {
  if (min_count < 1) throw Error("build_vocab: min_count must be >= 1");
  auto vocab = Vocab::from_counts(count_terms(corpus), min_count);
  if (vocab.empty()) throw Error("build_vocab: empty vocabulary (min_count " + std::to_string(min_count) + ")");
  return vocab;
}

std::optional<std::size_t> EmbeddingModel::resolve(std::string_view term) const {
  if (auto i = vocab.find(term)) return i;
  std::string lemma;
  for (const auto& part : split(term, '_')) {
    if (!lemma.empty()) lemma += '_';
    lemma += lemmatize(part);
  }
  if (lemma != term) return vocab.find(lemma);
  return std::nullopt;
}

std::optional<Vector> EmbeddingModel::vector(std::string_view term) const {
  auto i = resolve(term);
  if (!i) return std::nullopt;
  return Vector(input.row(static_cast<Eigen::Index>(*i)).transpose());
}

EmbeddingModel initialize_model(Vocab vocab, const TrainConfig& cfg) {
  if (cfg.dim < 2) throw Error("embedding: dim must be >= 2");
  EmbeddingModel m;
  m.dim = cfg.dim;
  m.config = cfg;
  const auto n = static_cast<Eigen::Index>(vocab.size());
  m.vocab = std::move(vocab);
  m.input.resize(n, cfg.dim);
  m.output = RowMatrix::Zero(n, cfg.dim);
  Rng rng(mix_seed(cfg.seed, 0));
  const double scale = 1.0 / cfg.dim;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < cfg.dim; ++c) m.input(r, c) = (uniform01(rng) - 0.5) * scale;
  }
  return m;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace

double sgns_pair_loss(const Vector& center, const Vector& context, const std::vector<Vector>& negatives) {
  double loss = -log_sigmoid(context.dot(center));
  for (const auto& u : negatives) loss -= log_sigmoid(-u.dot(center));
  return loss;
}

SgnsGradient sgns_pair_gradient(const Vector& center, const Vector& context,
                                const std::vector<Vector>& negatives) {
  SgnsGradient g;
  // d/dx -log s(x) = s(x) - 1 ; d/dx -log s(-x) = s(x)
  const double pos = sigmoid(context.dot(center)) - 1.0;
  g.center = pos * context;
  g.context = pos * center;
  for (const auto& u : negatives) {
    const double neg = sigmoid(u.dot(center));
    g.center += neg * u;
    g.negatives.push_back(neg * center);
  }
  return g;
}

namespace {

// Ascent on log s(u_o.v) + sum log s(-u_n.v); `scratch` holds the center delta.
void sgns_update(double* center, double* out_base, int dim, std::size_t context,
                 std::span<const std::size_t> negatives, double lr, std::vector<double>& scratch) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  const auto step = [&](std::size_t target, double label) {
    double* u = out_base + target * static_cast<std::size_t>(dim);
    double dot = 0;
    for (int i = 0; i < dim; ++i) dot += u[i] * center[i];
    const double g = (label - sigmoid(dot)) * lr;
    for (int i = 0; i < dim; ++i) scratch[i] += g * u[i];
    for (int i = 0; i < dim; ++i) u[i] += g * center[i];
  };
  step(context, 1.0);
  for (auto n : negatives) step(n, 0.0);
  for (int i = 0; i < dim; ++i) center[i] += scratch[i];
}

}  // namespace

void apply_sgns_update(EmbeddingModel& model, std::size_t center, std::size_t context,
                       std::span<const std::size_t> negatives, double lr) {
  std::vector<double> scratch(static_cast<std::size_t>(model.dim));
  sgns_update(model.input.data() + center * static_cast<std::size_t>(model.dim), model.output.data(),
              model.dim, context, negatives, lr, scratch);
}

double keep_probability(std::uint64_t count, std::uint64_t total, double subsample) {
  if (!(subsample > 0) || std::isinf(subsample) || count == 0) return 1.0;
  const double thresh = subsample * static_cast<double>(total);
  const double c = static_cast<double>(count);
  return std::min(1.0, (std::sqrt(c / thresh) + 1.0) * thresh / c);
}

namespace {

// A document as positions; each position lists vocab ids of the terms
// anchored there.
using Positions = std::vector<std::vector<std::size_t>>;

std::vector<Positions> encode_corpus(const CorpusSnapshot& corpus, const Vocab& vocab) {
  std::vector<Positions> out;
  out.reserve(corpus.size());
  const auto n_max = static_cast<std::size_t>(corpus.preprocess_config().n_max);
  for (const auto& doc : corpus.documents()) {
    Positions pos(doc.tokens.size());
    // ngrams are grouped by n: block n starts after sum_{m<n}(len-m+1) entries
    std::size_t offset = 0;
    const auto len = doc.tokens.size();
    for (std::size_t n = 1; n <= n_max && n <= len; ++n) {
      const auto count = len - n + 1;
      for (std::size_t i = 0; i < count; ++i) {
        if (auto id = vocab.find(doc.ngrams[offset + i])) pos[i].push_back(*id);
      }
      offset += count;
    }
    for (const auto& h : doc.hashtags) {
      pos.emplace_back();
      if (auto id = vocab.find(h)) pos.back().push_back(*id);
    }
    std::erase_if(pos, [](const auto& p) { return p.empty(); });
    if (!pos.empty()) out.push_back(std::move(pos));
  }
  return out;
}

class NegativeTable {
 public:
  explicit NegativeTable(const Vocab& vocab) {
    cumulative_.reserve(vocab.size());
    double acc = 0;
    for (auto c : vocab.counts) {
      acc += std::pow(static_cast<double>(std::max<std::uint64_t>(c, 1)), 0.75);
      cumulative_.push_back(acc);
    }
  }
  std::size_t draw(Rng& rng) const {
    const double r = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

void check_finite(const EmbeddingModel& m, int epoch, std::uint64_t step) {
  if (!m.input.allFinite() || !m.output.allFinite()) {
    throw Error("train_skipgram: non-finite vector at epoch " + std::to_string(epoch) + ", step " +
                std::to_string(step));
  }
}

void run_training(EmbeddingModel& model, const std::vector<Positions>& docs, const TrainConfig& cfg) {
  if (cfg.epochs <= 0 || docs.empty()) return;
  if (cfg.window < 1) throw Error("train_skipgram: window must be >= 1");
  if (cfg.negatives < 1) throw Error("train_skipgram: negatives must be >= 1");

  const auto& vocab = model.vocab;
  std::uint64_t total = 0;
  for (const auto& d : docs)
    for (const auto& p : d) total += p.size();
  std::uint64_t vocab_total = 0;
  for (auto c : vocab.counts) vocab_total += c;
  if (vocab_total == 0) vocab_total = total;
  std::vector<double> keep(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    keep[i] = keep_probability(std::max<std::uint64_t>(vocab.counts[i], 1), vocab_total, cfg.subsample);
  }
  const NegativeTable table(vocab);
  const double planned = static_cast<double>(total) * cfg.epochs + 1.0;
  const auto window = static_cast<std::size_t>(cfg.window);
  const auto dim = model.dim;

  auto worker = [&](unsigned w, unsigned stride, int epoch, std::uint64_t base_processed) {
    Rng rng(mix_seed(cfg.seed, 1000003ULL * static_cast<std::uint64_t>(epoch + 1) + w));
    std::vector<double> scratch(static_cast<std::size_t>(dim));
    std::vector<std::size_t> negs(static_cast<std::size_t>(cfg.negatives));
    std::uint64_t processed = base_processed;
    for (std::size_t d = w; d < docs.size(); d += stride) {
      // subsampled copy of the document
      Positions doc;
      doc.reserve(docs[d].size());
      for (const auto& p : docs[d]) {
        std::vector<std::size_t> kept;
        for (auto id : p) {
          if (keep[id] >= 1.0 || uniform01(rng) < keep[id]) kept.push_back(id);
        }
        doc.push_back(std::move(kept));
      }
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(processed) / planned);
        processed += docs[d][i].size() * stride;
        const auto lo = i >= window ? i - window : 0;
        const auto hi = std::min(doc.size() - 1, i + window);
        for (auto center : doc[i]) {
          double* v = model.input.data() + center * static_cast<std::size_t>(dim);
          for (std::size_t j = lo; j <= hi; ++j) {
            if (j == i) continue;
            for (auto ctx : doc[j]) {
              std::size_t filled = 0;
              while (filled < negs.size()) {
                const auto n = table.draw(rng);
                if (n == ctx) continue;
                negs[filled++] = n;
              }
              sgns_update(v, model.output.data(), dim, ctx, negs, lr, scratch);
            }
          }
        }
      }
    }
  };

  std::uint64_t processed = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.workers <= 1) {
      worker(0, 1, epoch, processed);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < cfg.workers; ++w) pool.emplace_back(worker, w, cfg.workers, epoch, processed);
    }
    processed += total;
    check_finite(model, epoch, processed);
    spdlog::debug("skipgram: epoch {} done", epoch + 1);
  }
}

}  // namespace

EmbeddingModel train_skipgram(const CorpusSnapshot& corpus, Vocab vocab, const TrainConfig& cfg) {
  if (vocab.empty()) throw Error("train_skipgram: empty vocabulary");
  auto model = initialize_model(std::move(vocab), cfg);
  run_training(model, encode_corpus(corpus, model.vocab), cfg);
  if (cfg.center) center_vectors(model);
  return model;
}

EmbeddingModel fine_tune_embeddings(const EmbeddingModel& base, const CorpusSnapshot& corpus,
                                    std::uint64_t min_count, const TrainConfig& cfg) {
  if (cfg.dim != base.dim) throw Error("fine_tune_embeddings: dim mismatch");
  auto counts = count_terms(corpus);
  std::vector<std::string> terms = base.vocab.terms;
  std::vector<std::uint64_t> cs = base.vocab.counts;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (auto it = counts.find(terms[i]); it != counts.end()) {
      cs[i] += it->second;
      counts.erase(it);
    }
  }
  auto fresh = Vocab::from_counts(counts, min_count);
  terms.insert(terms.end(), fresh.terms.begin(), fresh.terms.end());
  cs.insert(cs.end(), fresh.counts.begin(), fresh.counts.end());

  auto model = initialize_model(Vocab::from_terms(std::move(terms), std::move(cs), min_count), cfg);
  const auto old_rows = base.input.rows();
  model.input.topRows(old_rows) = base.input;
  model.output.topRows(old_rows) = base.output;
  run_training(model, encode_corpus(corpus, model.vocab), cfg);
  if (cfg.center) center_vectors(model);
  return model;
}

void center_vectors(EmbeddingModel& model) {
  if (model.input.rows() == 0) return;
  const Eigen::RowVectorXd mean = model.input.colwise().mean();
  model.input.rowwise() -= mean;
}

DocEmbedding doc_embedding(const EmbeddingModel& model, const std::vector<std::string>& tokens) {
  DocEmbedding out{Vector::Zero(model.dim), true};
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (auto i = model.resolve(t)) {
      out.vector += model.input.row(static_cast<Eigen::Index>(*i)).transpose();
      ++hits;
    }
  }
  if (hits > 0) {
    out.vector /= static_cast<double>(hits);
    out.all_oov = false;
  }
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error("cosine: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

void save_word2vec_text(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << model.vocab.size() << ' ' << model.dim << '\n';
  for (std::size_t r = 0; r < model.vocab.size(); ++r) {
    out << model.vocab.terms[r];
    for (int c = 0; c < model.dim; ++c) out << ' ' << model.input(static_cast<Eigen::Index>(r), c);
    out << '\n';
  }
  write_file(path, out.str());
}

EmbeddingModel load_word2vec_text(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::size_t n = 0;
  int dim = 0;
  if (!(in >> n >> dim) || dim < 2) throw Error("embeddings: bad header in " + path.string());
  std::vector<std::string> terms(n);
  RowMatrix input(static_cast<Eigen::Index>(n), dim);
  for (std::size_t r = 0; r < n; ++r) {
    if (!(in >> terms[r])) throw Error("embeddings: truncated file " + path.string());
    for (int c = 0; c < dim; ++c) {
      if (!(in >> input(static_cast<Eigen::Index>(r), c))) {
        throw Error("embeddings: bad value for term " + terms[r]);
      }
    }
  }
  EmbeddingModel m;
  m.vocab = Vocab::from_terms(std::move(terms), std::vector<std::uint64_t>(n, 0), 0);
  m.dim = dim;
  m.input = std::move(input);
  m.output = RowMatrix::Zero(static_cast<Eigen::Index>(n), dim);
  m.config.dim = dim;
  return m;
}

}  // namespace neurosym
