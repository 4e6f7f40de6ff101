#include "netlds/estimators.hpp"

#include "netlds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace netlds {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::LaplacianSmoothing: return "laplacian_smoothing";
    case Method::SubspaceLS: return "subspace_ls";
    case Method::NodewiseOLS: return "nodewise_ols";
    case Method::PooledOLS: return "pooled_ols";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "laplacian_smoothing") return Method::LaplacianSmoothing;
  if (name == "subspace_ls") return Method::SubspaceLS;
  if (name == "nodewise_ols") return Method::NodewiseOLS;
  if (name == "pooled_ols") return Method::PooledOLS;
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

void EstimatorConfig::validate(Index m) const {
  if (method == Method::LaplacianSmoothing && (!(lambda >= 0.0) || !std::isfinite(lambda)))
    throw std::invalid_argument("lambda must be finite and >= 0");
  if (method == Method::SubspaceLS && (tau < 1 || tau > m))
    throw std::invalid_argument("tau=" + std::to_string(tau) + " outside [1, " + std::to_string(m) + "]");
}

namespace {

double fit_residual(const TrajectoryBundle& bundle, const std::vector<Matrix>& mats) {
  double total = 0.0;
  for (Index l = 0; l < bundle.m; ++l)
    total += (bundle.targets(l) - mats[static_cast<std::size_t>(l)] * bundle.regressors(l)).squaredNorm();
  return std::sqrt(total);
}

/// A = C Y^+ for symmetric Y, via Y^+ C^T.
PinvResult right_pinv(const Matrix& c, const Matrix& y, double rank_tol) {
  PinvResult r = pinv_solve_many(y, c.transpose(), rank_tol);
  r.x.transposeInPlace();
  return r;
}

}  // namespace

double penalized_objective(const TrajectoryBundle& bundle, const GraphTopology& g, const std::vector<Matrix>& mats,
                           double lambda) {
  if (static_cast<Index>(mats.size()) != bundle.m) throw std::invalid_argument("objective: wrong number of matrices");
  const double fit = fit_residual(bundle, mats);
  return fit * fit + lambda * quadratic_variation(mats, g);
}

EstimateSet laplacian_smoothing(const TrajectoryBundle& bundle, const GraphTopology& g, double lambda,
                                const SolverOptions& options) {
  if (bundle.m != g.nodes()) throw std::invalid_argument("bundle and graph disagree on m");
  const PenalizedOperator op(gram_blocks(bundle), g, lambda);
  const SolveResult solved = solve_spd(op, op.blocks().rhs(), options);

  EstimateSet out;
  const Index d = bundle.d;
  out.mats.reserve(static_cast<std::size_t>(bundle.m));
  for (Index l = 0; l < bundle.m; ++l) out.mats.push_back(unvec(solved.x.segment(l * d * d, d * d), d));

  auto& diag = out.diagnostics;
  diag.method = Method::LaplacianSmoothing;
  diag.hyper = lambda;
  diag.solver_residual = solved.relative_residual;
  diag.solver_iters = solved.iterations;
  diag.dense_solve = solved.dense;
  diag.fit_residual = fit_residual(bundle, out.mats);
  diag.objective = diag.fit_residual * diag.fit_residual + lambda * quadratic_variation(out.mats, g);
  return out;
}

EstimateSet subspace_ls(const TrajectoryBundle& bundle, const LaplacianSpectrum& spec, Index tau, double rank_tol) {
  const Index m = bundle.m;
  const Index d = bundle.d;
  if (spec.size() != m) throw std::invalid_argument("bundle and spectrum disagree on m");
  if (tau < 1 || tau > m)
    throw std::invalid_argument("tau=" + std::to_string(tau) + " outside [1, " + std::to_string(m) + "]");

  const GramBlocks blocks = gram_blocks(bundle);
  const Matrix basis = spec.low_frequency_basis(tau);  // row l is f_l^T

  // B = sum_l (f_l f_l^T) (x) Y_l and H = sum_l f_l^T (x) C_l, so that the
  // subspace coefficients G = [G_1 .. G_tau] satisfy G B = H row by row.
  Matrix b = Matrix::Zero(tau * d, tau * d);
  Matrix h = Matrix::Zero(d, tau * d);
  for (Index l = 0; l < m; ++l) {
    const Matrix& y = blocks.y[static_cast<std::size_t>(l)];
    const Matrix& c = blocks.c[static_cast<std::size_t>(l)];
    for (Index k = 0; k < tau; ++k) {
      const double fk = basis(l, k);
      if (fk == 0.0) continue;
      h.middleCols(k * d, d) += fk * c;
      for (Index j = 0; j < tau; ++j) b.block(k * d, j * d, d, d) += (fk * basis(l, j)) * y;
    }
  }
  const PinvResult coeffs = right_pinv(h, b, rank_tol);

  EstimateSet out;
  out.mats.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  for (Index l = 0; l < m; ++l)
    for (Index k = 0; k < tau; ++k) out.mats[static_cast<std::size_t>(l)] += basis(l, k) * coeffs.x.middleCols(k * d, d);

  auto& diag = out.diagnostics;
  diag.method = Method::SubspaceLS;
  diag.hyper = static_cast<double>(tau);
  diag.effective_rank = coeffs.rank * d;
  diag.basis_dependent = spec.splits_eigenspace(tau);
  diag.fit_residual = fit_residual(bundle, out.mats);
  diag.objective = diag.fit_residual * diag.fit_residual;
  return out;
}

EstimateSet nodewise_ols(const TrajectoryBundle& bundle, double rank_tol) {
  const GramBlocks blocks = gram_blocks(bundle);
  EstimateSet out;
  Index min_rank = bundle.d;
  for (Index l = 0; l < bundle.m; ++l) {
    PinvResult r = right_pinv(blocks.c[static_cast<std::size_t>(l)], blocks.y[static_cast<std::size_t>(l)], rank_tol);
    min_rank = std::min(min_rank, r.rank);
    out.mats.push_back(std::move(r.x));
  }
  auto& diag = out.diagnostics;
  diag.method = Method::NodewiseOLS;
  diag.effective_rank = min_rank;
  diag.fit_residual = fit_residual(bundle, out.mats);
  diag.objective = diag.fit_residual * diag.fit_residual;
  return out;
}

EstimateSet pooled_ols(const TrajectoryBundle& bundle, double rank_tol) {
  const GramBlocks blocks = gram_blocks(bundle);
  Matrix y = Matrix::Zero(bundle.d, bundle.d);
  Matrix c = Matrix::Zero(bundle.d, bundle.d);
  for (Index l = 0; l < bundle.m; ++l) {
    y += blocks.y[static_cast<std::size_t>(l)];
    c += blocks.c[static_cast<std::size_t>(l)];
  }
  PinvResult r = right_pinv(c, y, rank_tol);
  EstimateSet out;
  out.mats.assign(static_cast<std::size_t>(bundle.m), r.x);
  auto& diag = out.diagnostics;
  diag.method = Method::PooledOLS;
  diag.effective_rank = r.rank;
  diag.fit_residual = fit_residual(bundle, out.mats);
  diag.objective = diag.fit_residual * diag.fit_residual;
  return out;
}

EstimateSet estimate(const TrajectoryBundle& bundle, const GraphTopology& g, const LaplacianSpectrum& spec,
                     const EstimatorConfig& config) {
  config.validate(bundle.m);
  switch (config.method) {
    case Method::LaplacianSmoothing: return laplacian_smoothing(bundle, g, config.lambda, config.solver);
    case Method::SubspaceLS: return subspace_ls(bundle, spec, config.tau, config.rank_tol);
    case Method::NodewiseOLS: return nodewise_ols(bundle, config.rank_tol);
    case Method::PooledOLS: return pooled_ols(bundle, config.rank_tol);
  }
  throw std::invalid_argument("unknown estimator");
}

void attach_truth(EstimateSet& est, const SystemEnsemble& truth, const TrajectoryBundle& bundle,
                  const GraphTopology& g, double delta, double r) {
  auto& diag = est.diagnostics;
  diag.mse = mse(est.mats, truth.mats());
  if (diag.method == Method::LaplacianSmoothing)
    diag.objective_at_truth = penalized_objective(bundle, g, truth.mats(), diag.hyper);
  try {
    diag.gammas = gamma_diagnostics(truth, bundle.horizon, delta, r);
  } catch (const OverflowError&) {
    diag.gammas.reset();
  }
}

std::string_view to_string(LambdaRule rule) {
  switch (rule) {
    case LambdaRule::PathBalance: return "path";
    case LambdaRule::CompleteBalance: return "complete";
    case LambdaRule::StarBalance: return "star";
    case LambdaRule::Benchmark: return "benchmark";
  }
  return "unknown";
}

LambdaRule lambda_rule_from_string(std::string_view name) {
  if (name == "path") return LambdaRule::PathBalance;
  if (name == "complete") return LambdaRule::CompleteBalance;
  if (name == "star") return LambdaRule::StarBalance;
  if (name == "benchmark") return LambdaRule::Benchmark;
  throw std::invalid_argument("unknown lambda rule '" + std::string(name) + "'");
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
}

[[noreturn]] void zero_smoothness() {
  throw std::invalid_argument(
      "smoothness budget S_m is 0, the balancing rule divides by it; use subspace_ls with tau=1 or a large fixed "
      "lambda");
}

}  // namespace

double lambda_rule(LambdaRule rule, const LambdaRuleParams& p) {
  require_positive(p.m, "m");
  if (rule == LambdaRule::Benchmark) {
    if (!(p.beta > 0.0 && p.beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
    return 20.0 * std::pow(p.m, 4.0 * p.beta / 5.0);
  }
  require_positive(p.r, "R");
  require_positive(p.d, "d");
  require_positive(p.horizon, "T");
  if (p.s_m < 0.0 || p.p1 < 0.0) throw std::invalid_argument("S_m and p1 must be nonnegative");
  switch (rule) {
    case LambdaRule::PathBalance:
      if (p.s_m == 0.0) zero_smoothness();
      return std::pow(p.r * p.d, 0.8) * std::pow(p.m / p.s_m, 0.4) * std::pow(p.horizon, 0.2);
    case LambdaRule::CompleteBalance:
      if (p.s_m == 0.0) zero_smoothness();
      return std::cbrt(p.horizon * p.r * p.r * p.d * p.d / (p.m * p.s_m));
    case LambdaRule::StarBalance: {
      const double s_tilde = p.s_m + p.m * p.m * p.p1;
      if (s_tilde == 0.0) zero_smoothness();
      return std::cbrt(p.horizon * p.r * p.r * p.d * p.d * p.m / s_tilde);
    }
    case LambdaRule::Benchmark: break;
  }
  throw std::invalid_argument("unknown lambda rule");
}

std::string_view to_string(TauRule rule) {
  return rule == TauRule::PathBalance ? "path" : "benchmark";
}

TauRule tau_rule_from_string(std::string_view name) {
  if (name == "path") return TauRule::PathBalance;
  if (name == "benchmark") return TauRule::Benchmark;
  throw std::invalid_argument("unknown tau rule '" + std::string(name) + "'");
}

Index tau_rule(TauRule rule, const TauRuleParams& p) {
  require_positive(p.m, "m");
  const auto m = static_cast<Index>(std::llround(p.m));
  double raw = 0.0;
  if (rule == TauRule::Benchmark) {
    raw = std::round(1.5 * std::cbrt(p.m));
  } else {
    require_positive(p.r, "R");
    require_positive(p.d, "d");
    require_positive(p.horizon, "T");
    require_positive(p.c_prime, "C'");
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (p.s_m < 0.0 || p.gamma2 < 0.0) throw std::invalid_argument("S_m and gamma2 must be nonnegative");
    const double xi = std::log(1.0 / p.delta) + std::log1p(p.gamma2 / p.horizon);
    const double r2 = p.r * p.r;
    const double variance_cap = std::cbrt(p.m * p.horizon / (p.c_prime * p.d * r2 * r2 * xi));
    const double bias_balance = std::max(std::cbrt(2.0 * p.m * p.m * p.s_m * p.horizon / (r2 * p.d * p.d)), 1.0);
    raw = std::floor(std::min(variance_cap, bias_balance));
  }
  return std::clamp<Index>(static_cast<Index>(raw), 1, m);
}

double star_p1(const SystemEnsemble& truth, const LaplacianSpectrum& spec) {
  if (spec.size() != truth.size()) throw std::invalid_argument("spectrum and ensemble disagree on m");
  Matrix acc = Matrix::Zero(truth.dim(), truth.dim());
  for (Index l = 0; l < truth.size(); ++l) acc += spec.eigenvectors(l, 0) * truth[l];
  return acc.squaredNorm();
}

}  // namespace netlds
