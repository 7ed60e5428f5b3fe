#include "neurosym/sedo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

namespace neurosym {

using nlohmann::json;

AnchorSet make_anchor_set(std::vector<std::string> terms, Matrix tweet, Matrix kb) {
  if (tweet.cols() != kb.cols() || static_cast<std::size_t>(tweet.cols()) != terms.size()) {
    throw Error("anchor set: column counts differ");
  }
  std::set<std::string> seen(terms.begin(), terms.end());
  if (seen.size() != terms.size()) throw Error("anchor set: duplicate terms");
  AnchorSet a{std::move(terms), std::move(tweet), std::move(kb), false};
  a.rank_deficient = a.tweet.cols() < a.tweet.rows();
  return a;
}

AnchorSet build_anchor_pairs(const EmbeddingModel& tweet, const EmbeddingModel& kb, const Lexicon& lex) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> rows;
  for (const auto& [_, terms] : lex.categories) {
    for (const auto& t : terms) {
      auto rt = tweet.resolve(t.term);
      auto rk = kb.resolve(t.term);
      if (rt && rk) rows.emplace(t.term, std::make_pair(*rt, *rk));
    }
  }
  if (rows.empty()) throw Error("build_anchor_pairs: no lexicon term is known to both embedding models");
  std::vector<std::string> terms;
  Matrix T(tweet.dim, static_cast<Eigen::Index>(rows.size()));
  Matrix M(kb.dim, static_cast<Eigen::Index>(rows.size()));
  Eigen::Index col = 0;
  for (const auto& [term, r] : rows) {
    terms.push_back(term);
    T.col(col) = tweet.input.row(static_cast<Eigen::Index>(r.first)).transpose();
    M.col(col) = kb.input.row(static_cast<Eigen::Index>(r.second)).transpose();
    ++col;
  }
  auto anchors = make_anchor_set(std::move(terms), std::move(T), std::move(M));
  if (anchors.rank_deficient) {
    spdlog::warn("sedo: {} anchors for tweet dim {}; the tweet Gram matrix is rank deficient", anchors.size(),
                 anchors.tweet.rows());
  }
  return anchors;
}

double default_ridge(const AnchorSet& anchors) {
  const auto d_m = anchors.kb.rows();
  if (d_m == 0) return 0.0;
  return 1e-6 * anchors.kb.squaredNorm() / static_cast<double>(d_m);
}

SedoAlignment assemble(AnchorSet anchors, double delta, double epsilon_ridge) {
  if (!(delta > 0)) throw Error("assemble: delta must be > 0");
  if (epsilon_ridge < 0) throw Error("assemble: epsilon_ridge must be >= 0");
  SedoAlignment a;
  a.delta = delta;
  a.epsilon_ridge = epsilon_ridge;
  const auto& T = anchors.tweet;
  const auto& M = anchors.kb;
  a.P = M * M.transpose();
  a.Q = delta * (T * T.transpose());
  a.Z = (1.0 + delta) * (M * T.transpose());
  if (epsilon_ridge > 0) {
    a.P.diagonal().array() += epsilon_ridge;
    a.Q.diagonal().array() += epsilon_ridge;
  }
  a.W = Matrix::Zero(M.rows(), T.rows());
  a.anchors = std::move(anchors);
  return a;
}

double relative_residual(const Matrix& P, const Matrix& Q, const Matrix& Z, const Matrix& W) {
  const double denom = std::max(Z.norm(), std::numeric_limits<double>::epsilon());
  return (P * W + W * Q - Z).norm() / denom;
}

SedoAlignment solve_sylvester(SedoAlignment a, double pair_epsilon) {
  if (a.P.rows() != a.P.cols() || a.Q.rows() != a.Q.cols() || a.Z.rows() != a.P.rows() ||
      a.Z.cols() != a.Q.rows()) {
    throw Error("solve_sylvester: inconsistent P/Q/Z shapes");
  }
  const Matrix P = 0.5 * (a.P + a.P.transpose());
  const Matrix Q = 0.5 * (a.Q + a.Q.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig_p(P);
  Eigen::SelfAdjointEigenSolver<Matrix> eig_q(Q);
  if (eig_p.info() != Eigen::Success || eig_q.info() != Eigen::Success) {
    throw Error("solve_sylvester: eigendecomposition failed");
  }
  const Matrix& U = eig_p.eigenvectors();
  const Matrix& V = eig_q.eigenvectors();
  const Vector& lambda = eig_p.eigenvalues();
  const Vector& sigma = eig_q.eigenvalues();

  Matrix C = U.transpose() * a.Z * V;
  std::size_t singular = 0;
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double denom = lambda(i) + sigma(j);
      if (std::abs(denom) < pair_epsilon) {
        C(i, j) = 0.0;
        ++singular;
      } else {
        C(i, j) /= denom;
      }
    }
  }
  if (C.size() > 0 && singular == static_cast<std::size_t>(C.size())) {
    throw Error("solve_sylvester: degenerate alignment (every eigenvalue pair is singular)");
  }
  a.W = U * C * V.transpose();
  a.P = P;
  a.Q = Q;
  a.singular_pairs = singular;
  a.residual = relative_residual(a.P, a.Q, a.Z, a.W);
  a.solved = true;
  if (singular > 0) spdlog::warn("sedo: {} singular eigenvalue pairs zeroed", singular);
  return a;
}

double alignment_objective(const Matrix& W, const Matrix& tweet, const Matrix& kb, double delta) {
  return (tweet - W.transpose() * kb).squaredNorm() + delta * (W * tweet - kb).squaredNorm();
}

Vector modulate(const SedoAlignment& a, const Vector& v) {
  if (v.size() != a.W.cols()) {
    throw Error("modulate: vector has dim " + std::to_string(v.size()) + ", alignment expects " +
                std::to_string(a.W.cols()));
  }
  return a.W * v;
}

SedoAlignment fine_tune(const SedoAlignment& a, const AnchorSet& new_anchors, FineTuneMode mode,
                        double pair_epsilon) {
  if (new_anchors.size() == 0) throw Error("fine_tune: no new anchors");
  if (new_anchors.tweet.rows() != a.W.cols() || new_anchors.kb.rows() != a.W.rows()) {
    throw Error("fine_tune: anchor dimensions do not match the alignment");
  }
  AnchorSet merged;
  if (mode == FineTuneMode::replace) {
    merged = new_anchors;
  } else {
    if (a.anchors.tweet.cols() != static_cast<Eigen::Index>(a.anchors.terms.size())) {
      throw Error("fine_tune: alignment has no anchor vectors; rehydrate it first");
    }
    std::map<std::string, std::pair<Vector, Vector>> cols;
    for (std::size_t i = 0; i < a.anchors.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      cols[a.anchors.terms[i]] = {a.anchors.tweet.col(c), a.anchors.kb.col(c)};
    }
    for (std::size_t i = 0; i < new_anchors.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      cols[new_anchors.terms[i]] = {new_anchors.tweet.col(c), new_anchors.kb.col(c)};
    }
    std::vector<std::string> terms;
    Matrix T(a.W.cols(), static_cast<Eigen::Index>(cols.size()));
    Matrix M(a.W.rows(), static_cast<Eigen::Index>(cols.size()));
    Eigen::Index c = 0;
    for (auto& [term, v] : cols) {
      terms.push_back(term);
      T.col(c) = v.first;
      M.col(c) = v.second;
      ++c;
    }
    merged = make_anchor_set(std::move(terms), std::move(T), std::move(M));
  }
  return solve_sylvester(assemble(std::move(merged), a.delta, a.epsilon_ridge), pair_epsilon);
}

void rehydrate_anchors(SedoAlignment& a, const EmbeddingModel& tweet, const EmbeddingModel& kb) {
  const auto n = static_cast<Eigen::Index>(a.anchors.terms.size());
  Matrix T(tweet.dim, n), M(kb.dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& term = a.anchors.terms[static_cast<std::size_t>(i)];
    auto rt = tweet.resolve(term);
    auto rk = kb.resolve(term);
    if (!rt || !rk) throw Error("rehydrate_anchors: anchor term no longer in both models: " + term);
    T.col(i) = tweet.input.row(static_cast<Eigen::Index>(*rt)).transpose();
    M.col(i) = kb.input.row(static_cast<Eigen::Index>(*rk)).transpose();
  }
  a.anchors = make_anchor_set(a.anchors.terms, std::move(T), std::move(M));
}

void save_alignment(const SedoAlignment& a, const std::filesystem::path& path) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(a.W.size()));
  for (Eigen::Index r = 0; r < a.W.rows(); ++r)
    for (Eigen::Index c = 0; c < a.W.cols(); ++c) w.push_back(a.W(r, c));
  json j{{"delta", a.delta},
         {"epsilon_ridge", a.epsilon_ridge},
         {"anchor_terms", a.anchors.terms},
         {"W", w},
         {"residual", a.residual},
         {"singular_pairs", a.singular_pairs},
         {"dims", {{"d_m", a.W.rows()}, {"d_t", a.W.cols()}}}};
  write_file(path, j.dump());
}

SedoAlignment load_alignment(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  SedoAlignment a;
  a.delta = j.at("delta").get<double>();
  a.epsilon_ridge = j.at("epsilon_ridge").get<double>();
  a.residual = j.at("residual").get<double>();
  a.singular_pairs = j.value("singular_pairs", std::size_t{0});
  a.anchors.terms = j.at("anchor_terms").get<std::vector<std::string>>();
  const auto rows = j.at("dims").at("d_m").get<Eigen::Index>();
  const auto cols = j.at("dims").at("d_t").get<Eigen::Index>();
  const auto w = j.at("W").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw Error("sedo.json: W size mismatch");
  a.W.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) a.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
  a.solved = true;
  return a;
}

}  // namespace neurosym
