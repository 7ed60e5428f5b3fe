#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "neurosym/common.hpp"
#include "neurosym/embedding.hpp"
#include "neurosym/lexicon.hpp"

namespace neurosym {

/// Terms embedded in both spaces. Column i of `tweet` (d_t x n) and of `kb`
/// (d_m x n) embed terms[i].
struct AnchorSet {
  std::vector<std::string> terms;
  Matrix tweet;
  Matrix kb;
  // n < d_t: the tweet Gram matrix is rank deficient.
  bool rank_deficient = false;

  std::size_t size() const { return terms.size(); }
};

/// Lexicon terms (all categories) known to both models, sorted ascending.
/// Throws when no term qualifies.
AnchorSet build_anchor_pairs(const EmbeddingModel& tweet, const EmbeddingModel& kb, const Lexicon& lex);

/// Anchor set from explicit columns; terms must be unique.
AnchorSet make_anchor_set(std::vector<std::string> terms, Matrix tweet, Matrix kb);

struct SedoAlignment {
  Matrix W;  // d_m x d_t
  double delta = 1.0;
  double epsilon_ridge = 0.0;
  Matrix P;  // M M^T (+ eps I)
  Matrix Q;  // delta T T^T (+ eps I)
  Matrix Z;  // (1 + delta) M T^T
  double residual = 0.0;
  std::size_t singular_pairs = 0;
  AnchorSet anchors;
  bool solved = false;

  Eigen::Index kb_dim() const { return W.rows(); }
  Eigen::Index tweet_dim() const { return W.cols(); }
};

/// 1e-6 * trace(M M^T) / d_m.
double default_ridge(const AnchorSet& anchors);

/// P = M M^T, Q = delta T T^T, Z = (1 + delta) M T^T, with eps * I added to
/// P and Q when epsilon_ridge > 0.
SedoAlignment assemble(AnchorSet anchors, double delta, double epsilon_ridge);

/// Solves P W + W Q = Z through the eigendecompositions of the symmetrized
/// P = U L U^T and Q = V S V^T:
///   W = U [ (U^T Z V)_ij / (l_i + s_j) ] V^T.
/// Pairs with |l_i + s_j| < pair_epsilon contribute zero and are counted.
SedoAlignment solve_sylvester(SedoAlignment a, double pair_epsilon = 1e-10);

/// ||P W + W Q - Z||_F / max(||Z||_F, eps)
double relative_residual(const Matrix& P, const Matrix& Q, const Matrix& Z, const Matrix& W);

/// ||T - W^T M||_F^2 + delta ||W T - M||_F^2, the objective the Sylvester
/// equation is the stationarity condition of.
double alignment_objective(const Matrix& W, const Matrix& tweet, const Matrix& kb, double delta);

/// W v: a tweet-space vector carried into the KB space.
Vector modulate(const SedoAlignment& a, const Vector& v);

enum class FineTuneMode { union_anchors, replace };

/// Re-solves on old + new anchors (new columns win on shared terms) or on
/// the new anchors alone. Uses the delta and ridge of `a`.
SedoAlignment fine_tune(const SedoAlignment& a, const AnchorSet& new_anchors, FineTuneMode mode,
                        double pair_epsilon = 1e-10);

/// Rebuilds the anchor columns of a loaded alignment from the two models.
void rehydrate_anchors(SedoAlignment& a, const EmbeddingModel& tweet, const EmbeddingModel& kb);

void save_alignment(const SedoAlignment& a, const std::filesystem::path& path);
SedoAlignment load_alignment(const std::filesystem::path& path);

}  // namespace neurosym
