#pragma once
// Brute-force reference implementations used only by the tests. They build
// the full md^2-sized objects explicitly and share no code with the library
// solvers.

#include "netlds/ensemble.hpp"
#include "netlds/graph.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using netlds::Index;
using netlds::Matrix;
using netlds::Vector;

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector vec(const Matrix& a) {
  Vector v(a.size());
  Index k = 0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) v(k++) = a(i, j);
  return v;
}

inline Vector stack(const std::vector<Matrix>& mats) {
  Index total = 0;
  for (const auto& a : mats) total += a.size();
  Vector v(total);
  Index off = 0;
  for (const auto& a : mats) {
    v.segment(off, a.size()) = vec(a);
    off += a.size();
  }
  return v;
}

inline std::vector<Matrix> unstack(const Vector& v, Index m, Index d) {
  std::vector<Matrix> out;
  for (Index l = 0; l < m; ++l) {
    Matrix a(d, d);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < d; ++i) a(i, j) = v(l * d * d + j * d + i);
    out.push_back(a);
  }
  return out;
}

/// L = D - A from the edge list, built entry by entry.
inline Matrix laplacian(Index m, const std::vector<std::pair<Index, Index>>& edges) {
  Matrix lap = Matrix::Zero(m, m);
  for (auto [i, j] : edges) {
    lap(i, i) += 1;
    lap(j, j) += 1;
    lap(i, j) -= 1;
    lap(j, i) -= 1;
  }
  return lap;
}

/// Q = blkdiag(X_l^T (x) I_d) with X_l the first T states of node l.
inline Matrix dense_q(const netlds::TrajectoryBundle& b) {
  const Index d = b.d, t = b.horizon, m = b.m;
  Matrix q = Matrix::Zero(m * d * t, m * d * d);
  const Matrix eye = Matrix::Identity(d, d);
  for (Index l = 0; l < m; ++l) {
    const Matrix x = b.states[static_cast<std::size_t>(l)].leftCols(t);
    q.block(l * d * t, l * d * d, d * t, d * d) = kron(x.transpose(), eye);
  }
  return q;
}

inline Vector dense_xtilde(const netlds::TrajectoryBundle& b) {
  Vector v(b.m * b.d * b.horizon);
  for (Index l = 0; l < b.m; ++l)
    v.segment(l * b.d * b.horizon, b.d * b.horizon) = vec(b.states[static_cast<std::size_t>(l)].rightCols(b.horizon));
  return v;
}

inline Matrix penalty(const netlds::GraphTopology& g, Index d) {
  return kron(laplacian(g.nodes(), g.edges()), Matrix::Identity(d * d, d * d));
}

/// (Q^T Q + lambda L (x) I) a = Q^T x~ by full-pivot LU on the md^2 system.
inline std::vector<Matrix> laplacian_smoothing(const netlds::TrajectoryBundle& b, const netlds::GraphTopology& g,
                                               double lambda) {
  const Matrix q = dense_q(b);
  const Matrix k = q.transpose() * q + lambda * penalty(g, b.d);
  const Vector a = k.fullPivLu().solve(q.transpose() * dense_xtilde(b));
  return unstack(a, b.m, b.d);
}

/// SVD pseudo-inverse applied to rhs with the relative cutoff `tol`.
inline Vector svd_pinv_solve(const Matrix& a, const Vector& rhs, double tol = 1e-10) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = s.size() ? tol * s(0) : 0.0;
  Vector coeff = svd.matrixU().transpose() * rhs;
  for (Index i = 0; i < s.size(); ++i) coeff(i) = s(i) > cut ? coeff(i) / s(i) : 0.0;
  return svd.matrixV() * coeff;
}

/// a = M (Q M)^+ x~ with M = W (x) I_{d^2}; the minimum-norm minimiser over the subspace.
inline std::vector<Matrix> subspace_ls(const netlds::TrajectoryBundle& b, const Matrix& w) {
  const Matrix m = kron(w, Matrix::Identity(b.d * b.d, b.d * b.d));
  const Matrix q = dense_q(b);
  const Vector coeff = svd_pinv_solve(q * m, dense_xtilde(b));
  return unstack(m * coeff, b.m, b.d);
}

/// a = Q^+ x~.
inline std::vector<Matrix> min_norm_ls(const netlds::TrajectoryBundle& b) {
  return unstack(svd_pinv_solve(dense_q(b), dense_xtilde(b)), b.m, b.d);
}

/// One A minimising sum_l ||X~_l - A X_l||_F^2: A^T = [X_1 .. X_m]^T^+ [X~_1 .. X~_m]^T.
inline Matrix pooled_ols(const netlds::TrajectoryBundle& b) {
  Matrix x(b.d, b.m * b.horizon), xt(b.d, b.m * b.horizon);
  for (Index l = 0; l < b.m; ++l) {
    x.middleCols(l * b.horizon, b.horizon) = b.states[static_cast<std::size_t>(l)].leftCols(b.horizon);
    xt.middleCols(l * b.horizon, b.horizon) = b.states[static_cast<std::size_t>(l)].rightCols(b.horizon);
  }
  Matrix at(b.d, b.d);
  for (Index i = 0; i < b.d; ++i) at.col(i) = svd_pinv_solve(x.transpose(), xt.row(i).transpose());
  return at.transpose();
}

/// max over tau, l of (m / tau) sum_{i <= tau} v_{m-i+1, l}^2 by direct summation.
inline double theta(const netlds::LaplacianSpectrum& spec) {
  const Index m = spec.size();
  double best = 0.0;
  for (Index tau = 1; tau <= m; ++tau)
    for (Index l = 0; l < m; ++l) {
      double s = 0.0;
      for (Index i = 1; i <= tau; ++i) s += spec.eigenvectors(l, m - i) * spec.eigenvectors(l, m - i);
      best = std::max(best, static_cast<double>(m) / static_cast<double>(tau) * s);
    }
  return best;
}

/// Tr Gamma_t(A) by explicit matrix powers and the trace of their sum.
inline double trace_grammian(const Matrix& a, Index t) {
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = Matrix::Zero(a.rows(), a.cols());
  for (Index k = 0; k <= t; ++k) {
    sum += power * power.transpose();
    power = power * a;
  }
  return sum.trace();
}

inline double rel_err(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    num += (a[l] - b[l]).squaredNorm();
    den += b[l].squaredNorm();
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double max_abs_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) worst = std::max(worst, (a[l] - b[l]).cwiseAbs().maxCoeff());
  return worst;
}

// ---- random instances ------------------------------------------------------

inline Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = n(rng);
  return a;
}

/// Random spanning tree plus a few extra edges.
inline netlds::GraphTopology random_graph(std::mt19937_64& rng, Index m) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index v = 2; v <= m; ++v) {
    std::uniform_int_distribution<Index> parent(1, v - 1);
    edges.emplace_back(parent(rng), v);
  }
  std::bernoulli_distribution extra(0.3);
  for (Index i = 1; i <= m; ++i)
    for (Index j = i + 1; j <= m; ++j) {
      const bool present = std::any_of(edges.begin(), edges.end(), [&](auto e) {
        return (e.first == i && e.second == j) || (e.first == j && e.second == i);
      });
      if (!present && extra(rng)) edges.emplace_back(i, j);
    }
  return netlds::GraphTopology::custom(m, edges);
}

inline netlds::SystemEnsemble random_ensemble(std::mt19937_64& rng, Index m, Index d, double scale = 0.4) {
  std::vector<Matrix> mats;
  for (Index l = 0; l < m; ++l) mats.push_back(scale * gaussian(rng, d, d) / std::sqrt(static_cast<double>(d)));
  return netlds::SystemEnsemble(std::move(mats));
}

inline netlds::TrajectoryBundle random_bundle(std::mt19937_64& rng, Index m, Index d, Index horizon) {
  const auto truth = random_ensemble(rng, m, d);
  return netlds::simulate(truth, horizon, {}, rng());
}

}  // namespace oracle
