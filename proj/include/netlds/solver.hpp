#pragma once

#include "netlds/common.hpp"
#include "netlds/ensemble.hpp"
#include "netlds/graph.hpp"

namespace netlds {

/// Per-node second moments of a trajectory bundle.
///
///   Y_l = X_l X_l^T      (so Q^T Q = blkdiag(Y_l (x) I_d))
///   C_l = X~_l X_l^T     (so (Q^T x~)_l = vec(C_l))
struct GramBlocks {
  Index horizon = 0;
  std::vector<Matrix> y;
  std::vector<Matrix> c;

  Index nodes() const noexcept { return static_cast<Index>(y.size()); }
  Index dim() const noexcept { return y.empty() ? 0 : y.front().rows(); }
  /// Stacked vec(C_1), ..., vec(C_m).
  Vector rhs() const;
};

GramBlocks gram_blocks(const TrajectoryBundle& bundle);

/// The normal-equation operator Q^T Q + lambda (L (x) I_{d^2}) acting on the
/// stacked vector a = [vec(A_1); ...; vec(A_m)], never formed densely:
///
///   out_l = vec(A_l Y_l) + lambda (deg(l) a_l - sum_{l' ~ l} a_{l'})
class PenalizedOperator {
 public:
  PenalizedOperator(GramBlocks blocks, const GraphTopology& graph, double lambda);

  Index nodes() const noexcept { return blocks_.nodes(); }
  Index dim() const noexcept { return blocks_.dim(); }
  Index unknowns() const noexcept { return nodes() * dim() * dim(); }
  double lambda() const noexcept { return lambda_; }
  const GramBlocks& blocks() const noexcept { return blocks_; }
  const std::vector<std::vector<Index>>& neighbors() const noexcept { return neighbors_; }

  Vector apply(const Vector& a) const;

  /// The md x md matrix blkdiag(Y_l) + lambda (L (x) I_d). Row i of every A_l
  /// couples only with row i of the other nodes, so the full md^2 system is d
  /// independent copies of this one.
  Matrix row_system() const;

  /// Smallest-to-largest eigenvalue ratio of the part that decides
  /// invertibility: sum_l Y_l when lambda > 0 (connected graph), else the
  /// worst single Y_l. The operator is singular iff this ratio is 0.
  double definiteness_ratio() const;

 private:
  GramBlocks blocks_;
  std::vector<std::vector<Index>> neighbors_;
  double lambda_;
};

/// apply_penalized from the library contract.
inline Vector apply_penalized(const PenalizedOperator& op, const Vector& a) { return op.apply(a); }

struct SolverOptions {
  double tol = 1e-10;                ///< relative residual target
  int max_iter = 0;                  ///< 0 selects 10 * unknowns
  Index dense_max_unknowns = 4096;   ///< md^2 at or below this uses the dense path
  bool block_jacobi = false;         ///< precondition CG with (Y_l + lambda deg(l) I)^{-1}
  double singular_tol = 1e-13;       ///< definiteness ratio at or below this is singular
};

struct SolveResult {
  Vector x;
  int iterations = 0;                ///< 0 for the dense path
  double relative_residual = 0.0;
  bool dense = false;
};

/// Solves op(a) = rhs. Throws SingularOperatorError when the operator has a
/// kernel and ConvergenceError when CG stalls.
SolveResult solve_spd(const PenalizedOperator& op, const Vector& rhs, const SolverOptions& options = {});

/// Relative eigenvalue cutoff for a k x k pseudo-inverse: k * machine epsilon.
double default_rank_tol(Index k);

/// Minimum-norm least squares solve M x = rhs for symmetric PSD M. Eigenvalues
/// at or below rank_tol * max eigenvalue are treated as zero; a negative
/// rank_tol selects default_rank_tol(k).
Vector pinv_solve(const Matrix& m, const Vector& rhs, double rank_tol = -1.0);

/// Column-wise pinv_solve sharing one eigendecomposition.
struct PinvResult {
  Matrix x;
  Index rank = 0;
};
PinvResult pinv_solve_many(const Matrix& m, const Matrix& rhs, double rank_tol = -1.0);

}  // namespace netlds
