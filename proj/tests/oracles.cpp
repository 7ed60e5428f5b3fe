#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>

#include <sys/wait.h>
#include <unistd.h>

namespace oracle {

Matrix kronecker_solve(const Matrix& P, const Matrix& Q, const Matrix& Z) {
  const auto m = P.rows();
  const auto t = Q.rows();
  Matrix K = Matrix::Zero(m * t, m * t);
  // column-major vec: entry (i, j) of W sits at j * m + i
  for (Eigen::Index j = 0; j < t; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto row = j * m + i;
      for (Eigen::Index k = 0; k < m; ++k) K(row, j * m + k) += P(i, k);
      for (Eigen::Index l = 0; l < t; ++l) K(row, l * m + i) += Q(l, j);
    }
  }
  Vector z(m * t);
  for (Eigen::Index j = 0; j < t; ++j)
    for (Eigen::Index i = 0; i < m; ++i) z(j * m + i) = Z(i, j);
  const Vector w = K.fullPivLu().solve(z);
  Matrix W(m, t);
  for (Eigen::Index j = 0; j < t; ++j)
    for (Eigen::Index i = 0; i < m; ++i) W(i, j) = w(j * m + i);
  return W;
}

Matrix random_normal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = nd(rng);
  return A;
}

Matrix random_spd(int n, Rng& rng) {
  const Matrix A = random_normal(n, n, rng);
  return A * A.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
}

double alignment_objective(const Matrix& W, const Matrix& T, const Matrix& M, double delta) {
  double first = 0, second = 0;
  // T - W^T M : d_t x n
  for (Eigen::Index r = 0; r < T.rows(); ++r) {
    for (Eigen::Index c = 0; c < T.cols(); ++c) {
      double s = T(r, c);
      for (Eigen::Index k = 0; k < M.rows(); ++k) s -= W(k, r) * M(k, c);
      first += s * s;
    }
  }
  // W T - M : d_m x n
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      double s = -M(r, c);
      for (Eigen::Index k = 0; k < T.rows(); ++k) s += W(r, k) * T(k, c);
      second += s * s;
    }
  }
  return first + delta * second;
}

Matrix objective_fd_gradient(const Matrix& W, const Matrix& T, const Matrix& M, double delta, double h) {
  Matrix G(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      Matrix plus = W, minus = W;
      plus(i, j) += h;
      minus(i, j) -= h;
      G(i, j) = (alignment_objective(plus, T, M, delta) - alignment_objective(minus, T, M, delta)) / (2 * h);
    }
  }
  return G;
}

double sgns_loss(const Vector& v, const Vector& u, const std::vector<Vector>& negs) {
  const auto log_sigmoid = [](double x) { return -std::log1p(std::exp(-x)); };
  double loss = -log_sigmoid(u.dot(v));
  for (const auto& n : negs) loss -= log_sigmoid(-n.dot(v));
  return loss;
}

double aligned_tv_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double worst = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      double tv = 0;
      for (std::size_t w = 0; w < a[k].size(); ++w) tv += std::abs(a[k][w] - b[perm[k]][w]);
      worst = std::max(worst, tv / 2);
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double gaussian_posterior(double x, double mean0, double var0, double mean1, double var1, double prior1) {
  const auto density = [](double x, double m, double v) {
    return std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * M_PI * v);
  };
  const double p1 = prior1 * density(x, mean1, var1);
  const double p0 = (1 - prior1) * density(x, mean0, var0);
  return p1 / (p0 + p1);
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto base = std::filesystem::temp_directory_path() /
              ("neurosym_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

int run(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace oracle
