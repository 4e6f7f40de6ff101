#include "netlds/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace netlds {

Vector GramBlocks::rhs() const {
  const Index d = dim();
  const Index d2 = d * d;
  Vector out(nodes() * d2);
  for (Index l = 0; l < nodes(); ++l) out.segment(l * d2, d2) = vec(c[static_cast<std::size_t>(l)]);
  return out;
}

GramBlocks gram_blocks(const TrajectoryBundle& bundle) {
  bundle.validate();
  GramBlocks out;
  out.horizon = bundle.horizon;
  out.y.reserve(static_cast<std::size_t>(bundle.m));
  out.c.reserve(static_cast<std::size_t>(bundle.m));
  for (Index l = 0; l < bundle.m; ++l) {
    const auto x = bundle.regressors(l);
    const auto xt = bundle.targets(l);
    Matrix y = x * x.transpose();
    // exact symmetry; the product is symmetric only up to rounding otherwise
    y = 0.5 * (y + y.transpose()).eval();
    out.y.push_back(std::move(y));
    out.c.emplace_back(xt * x.transpose());
  }
  return out;
}

PenalizedOperator::PenalizedOperator(GramBlocks blocks, const GraphTopology& graph, double lambda)
    : blocks_(std::move(blocks)), neighbors_(graph.neighbors()), lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (blocks_.nodes() != graph.nodes())
    throw std::invalid_argument("Gram blocks cover " + std::to_string(blocks_.nodes()) + " nodes but graph has " +
                                std::to_string(graph.nodes()));
  if (blocks_.c.size() != blocks_.y.size()) throw std::invalid_argument("Gram blocks are inconsistent");
}

Vector PenalizedOperator::apply(const Vector& a) const {
  const Index m = nodes();
  const Index d = dim();
  const Index d2 = d * d;
  if (a.size() != m * d2) throw std::invalid_argument("operator input has the wrong length");
  Vector out(a.size());
  for (Index l = 0; l < m; ++l) {
    Eigen::Map<const Matrix> al(a.data() + l * d2, d, d);
    Eigen::Map<Matrix> ol(out.data() + l * d2, d, d);
    ol.noalias() = al * blocks_.y[static_cast<std::size_t>(l)];
    if (lambda_ != 0.0) {
      const auto& nb = neighbors_[static_cast<std::size_t>(l)];
      auto seg = out.segment(l * d2, d2);
      seg += (lambda_ * static_cast<double>(nb.size())) * a.segment(l * d2, d2);
      for (Index k : nb) seg -= lambda_ * a.segment(k * d2, d2);
    }
  }
  return out;
}

Matrix PenalizedOperator::row_system() const {
  const Index m = nodes();
  const Index d = dim();
  Matrix k = Matrix::Zero(m * d, m * d);
  for (Index l = 0; l < m; ++l) {
    const auto& nb = neighbors_[static_cast<std::size_t>(l)];
    k.block(l * d, l * d, d, d) = blocks_.y[static_cast<std::size_t>(l)];
    k.block(l * d, l * d, d, d).diagonal().array() += lambda_ * static_cast<double>(nb.size());
    for (Index n : nb) k.block(l * d, n * d, d, d).diagonal().array() -= lambda_;
  }
  return k;
}

double PenalizedOperator::definiteness_ratio() const {
  auto extremes = [](const Matrix& y) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(y, Eigen::EigenvaluesOnly);
    return std::pair{es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1)};
  };
  if (lambda_ > 0.0) {
    Matrix total = Matrix::Zero(dim(), dim());
    for (const auto& y : blocks_.y) total += y;
    const auto [lo, hi] = extremes(total);
    return hi > 0.0 ? std::max(0.0, lo / hi) : 0.0;
  }
  double lo_min = std::numeric_limits<double>::infinity();
  double hi_max = 0.0;
  for (const auto& y : blocks_.y) {
    const auto [lo, hi] = extremes(y);
    lo_min = std::min(lo_min, lo);
    hi_max = std::max(hi_max, hi);
  }
  return hi_max > 0.0 ? std::max(0.0, lo_min / hi_max) : 0.0;
}

namespace {

[[noreturn]] void throw_singular(const PenalizedOperator& op) {
  if (op.lambda() > 0.0) {
    throw SingularOperatorError(
        "penalized operator is singular: the pooled Gram matrix sum_l X_l X_l^T is rank deficient; "
        "collect longer trajectories");
  }
  throw SingularOperatorError(
      "penalized operator is singular at lambda=0: some X_l X_l^T is rank deficient (T < d?); "
      "use lambda > 0 or a longer horizon");
}

SolveResult solve_dense(const PenalizedOperator& op, const Vector& rhs) {
  const Index m = op.nodes();
  const Index d = op.dim();
  const Index d2 = d * d;
  Eigen::LLT<Matrix> llt(op.row_system());
  if (llt.info() != Eigen::Success) throw_singular(op);

  // z_i[l*d + j] = A_l(i, j)
  Matrix rows(m * d, d);
  for (Index l = 0; l < m; ++l) {
    Eigen::Map<const Matrix> cl(rhs.data() + l * d2, d, d);
    rows.middleRows(l * d, d) = cl.transpose();
  }
  const Matrix z = llt.solve(rows);
  SolveResult out;
  out.x.resize(m * d2);
  for (Index l = 0; l < m; ++l) {
    Eigen::Map<Matrix> al(out.x.data() + l * d2, d, d);
    al = z.middleRows(l * d, d).transpose();
  }
  out.dense = true;
  const double bnorm = rhs.norm();
  out.relative_residual = bnorm > 0.0 ? (op.apply(out.x) - rhs).norm() / bnorm : 0.0;
  return out;
}

class BlockJacobi {
 public:
  explicit BlockJacobi(const PenalizedOperator& op) : d_(op.dim()) {
    for (Index l = 0; l < op.nodes(); ++l) {
      Matrix block = op.blocks().y[static_cast<std::size_t>(l)];
      block.diagonal().array() += op.lambda() * static_cast<double>(op.neighbors()[static_cast<std::size_t>(l)].size());
      Eigen::LLT<Matrix> llt(block);
      if (llt.info() != Eigen::Success)
        throw SingularOperatorError("block-Jacobi preconditioner block " + std::to_string(l + 1) + " is singular");
      inverses_.push_back(llt.solve(Matrix::Identity(d_, d_)));
    }
  }

  Vector apply(const Vector& r) const {
    const Index d2 = d_ * d_;
    Vector out(r.size());
    for (std::size_t l = 0; l < inverses_.size(); ++l) {
      const Index off = static_cast<Index>(l) * d2;
      Eigen::Map<const Matrix> rl(r.data() + off, d_, d_);
      Eigen::Map<Matrix>(out.data() + off, d_, d_).noalias() = rl * inverses_[l];
    }
    return out;
  }

 private:
  Index d_;
  std::vector<Matrix> inverses_;
};

SolveResult solve_cg(const PenalizedOperator& op, const Vector& rhs, const SolverOptions& options) {
  const Index n = op.unknowns();
  const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(10 * n);
  constexpr int kResidualRefresh = 50;

  std::optional<BlockJacobi> precond;
  if (options.block_jacobi) precond.emplace(op);
  auto precondition = [&](const Vector& r) { return precond ? precond->apply(r) : r; };

  SolveResult out;
  out.x = Vector::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return out;

  Vector r = rhs;
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  double relres = 1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector ap = op.apply(p);
    const double pap = p.dot(ap);
    if (!(pap > std::numeric_limits<double>::min() * p.squaredNorm()) || !std::isfinite(pap)) throw_singular(op);
    const double alpha = rz / pap;
    out.x.noalias() += alpha * p;
    if (it % kResidualRefresh == 0) {
      r = rhs - op.apply(out.x);
    } else {
      r.noalias() -= alpha * ap;
    }
    relres = r.norm() / bnorm;
    out.iterations = it;
    if (relres <= options.tol) {
      relres = (rhs - op.apply(out.x)).norm() / bnorm;
      if (relres <= options.tol) {
        out.relative_residual = relres;
        return out;
      }
      r = rhs - op.apply(out.x);
    }
    z = precondition(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw ConvergenceError("conjugate gradient did not reach relative residual " + std::to_string(options.tol) +
                             " within " + std::to_string(max_iter) + " iterations (final " + std::to_string(relres) +
                             ")",
                         relres, max_iter);
}

}  // namespace

SolveResult solve_spd(const PenalizedOperator& op, const Vector& rhs, const SolverOptions& options) {
  if (rhs.size() != op.unknowns()) throw std::invalid_argument("right-hand side has the wrong length");
  if (op.definiteness_ratio() <= options.singular_tol) throw_singular(op);
  if (op.unknowns() <= options.dense_max_unknowns) return solve_dense(op, rhs);
  return solve_cg(op, rhs, options);
}

double default_rank_tol(Index k) {
  return static_cast<double>(std::max<Index>(k, 1)) * std::numeric_limits<double>::epsilon();
}

PinvResult pinv_solve_many(const Matrix& m, const Matrix& rhs, double rank_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("pseudo-inverse needs a square matrix");
  if (rhs.rows() != m.rows()) throw std::invalid_argument("pseudo-inverse right-hand side has the wrong length");
  const Index k = m.rows();
  PinvResult out;
  out.x = Matrix::Zero(k, rhs.cols());
  if (k == 0) return out;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = m.cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(scale, 1.0)) throw std::invalid_argument("pseudo-inverse input is not symmetric");

  const double tol = rank_tol < 0.0 ? default_rank_tol(k) : rank_tol;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver did not converge in pinv_solve");
  const Vector& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (top == 0.0) return out;
  const double cutoff = tol * top;
  Vector inv = Vector::Zero(k);
  for (Index i = 0; i < k; ++i) {
    if (ev(i) > cutoff) {
      inv(i) = 1.0 / ev(i);
      ++out.rank;
    }
  }
  const Matrix& v = es.eigenvectors();
  out.x = v * (inv.asDiagonal() * (v.transpose() * rhs));
  return out;
}

Vector pinv_solve(const Matrix& m, const Vector& rhs, double rank_tol) {
  return pinv_solve_many(m, rhs, rank_tol).x.col(0);
}

}  // namespace netlds
