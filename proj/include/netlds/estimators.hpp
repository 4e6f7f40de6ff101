#pragma once

#include "netlds/common.hpp"
#include "netlds/ensemble.hpp"
#include "netlds/graph.hpp"
#include "netlds/solver.hpp"

#include <optional>
#include <string_view>

namespace netlds {

enum class Method { LaplacianSmoothing, SubspaceLS, NodewiseOLS, PooledOLS };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct EstimatorConfig {
  Method method = Method::LaplacianSmoothing;
  double lambda = 0.0;              ///< LaplacianSmoothing only, >= 0
  Index tau = 1;                    ///< SubspaceLS only, in [1, m]
  SolverOptions solver;
  double rank_tol = -1.0;           ///< pseudo-inverse cutoff, negative selects the default

  void validate(Index m) const;
};

struct EstimateDiagnostics {
  Method method = Method::NodewiseOLS;
  double hyper = 0.0;               ///< lambda or tau, 0 for the OLS baselines
  double fit_residual = 0.0;        ///< ||x~ - Q a||_2
  double solver_residual = 0.0;     ///< relative residual of the normal equations
  int solver_iters = 0;
  bool dense_solve = false;
  std::optional<Index> effective_rank;  ///< rank of the Gram system that was pseudo-inverted
  bool basis_dependent = false;     ///< tau cuts through a repeated Laplacian eigenvalue
  double objective = 0.0;           ///< penalized objective at the estimate (LaplacianSmoothing)
  std::optional<double> objective_at_truth;
  std::optional<double> mse;
  std::optional<GammaDiagnostics> gammas;
};

struct EstimateSet {
  std::vector<Matrix> mats;
  EstimateDiagnostics diagnostics;
};

/// sum_l ||X~_l - A_l X_l||_F^2 + lambda * sum_{edges} ||A_l - A_l'||_F^2
double penalized_objective(const TrajectoryBundle& bundle, const GraphTopology& g, const std::vector<Matrix>& mats,
                           double lambda);

/// Solves [Q^T Q + lambda (L (x) I)] a = Q^T x~. Throws SingularOperatorError
/// instead of falling back to a pseudo-inverse.
EstimateSet laplacian_smoothing(const TrajectoryBundle& bundle, const GraphTopology& g, double lambda,
                                const SolverOptions& options = {});

/// Minimum-norm least squares over span(P^(tau) (x) I_{d^2}), solved through
/// the tau*d x tau*d system B = sum_l (f_l f_l^T) (x) Y_l with
/// f_l = (v_{m,l}, ..., v_{m-tau+1,l}).
EstimateSet subspace_ls(const TrajectoryBundle& bundle, const LaplacianSpectrum& spec, Index tau,
                        double rank_tol = -1.0);

/// A_l = C_l Y_l^+ per node.
EstimateSet nodewise_ols(const TrajectoryBundle& bundle, double rank_tol = -1.0);

/// One A = (sum_l C_l)(sum_l Y_l)^+ shared by every node.
EstimateSet pooled_ols(const TrajectoryBundle& bundle, double rank_tol = -1.0);

/// Dispatches on config.method. `spec` is only read for SubspaceLS.
EstimateSet estimate(const TrajectoryBundle& bundle, const GraphTopology& g, const LaplacianSpectrum& spec,
                     const EstimatorConfig& config);

/// Fills mse, gamma diagnostics and (for LaplacianSmoothing) the objective at
/// the true matrices.
void attach_truth(EstimateSet& est, const SystemEnsemble& truth, const TrajectoryBundle& bundle,
                  const GraphTopology& g, double delta = 0.05, double r = 1.0);

enum class LambdaRule {
  PathBalance,      ///< (R d)^{4/5} (m / S_m)^{2/5} T^{1/5}
  CompleteBalance,  ///< (T R^2 d^2 / (m S_m))^{1/3}
  StarBalance,      ///< (T R^2 d^2 m / (S_m + m^2 p1))^{1/3}
  Benchmark,        ///< 20 m^{4 beta / 5}
};

std::string_view to_string(LambdaRule rule);
LambdaRule lambda_rule_from_string(std::string_view name);

struct LambdaRuleParams {
  double r = 1.0;
  double d = 1.0;
  double m = 1.0;
  double horizon = 1.0;
  double s_m = 0.0;
  double beta = 1.0;
  double p1 = 0.0;  ///< star graph only
};

double lambda_rule(LambdaRule rule, const LambdaRuleParams& p);

enum class TauRule {
  /// floor(min{(m T / (C' d R^4 xi))^{1/3}, max{(2 m^2 S_m T / (R^2 d^2))^{1/3}, 1}}),
  /// xi = log(1/delta) + log(1 + gamma2 / T)
  PathBalance,
  /// min{round(1.5 m^{1/3}), m}
  Benchmark,
};

std::string_view to_string(TauRule rule);
TauRule tau_rule_from_string(std::string_view name);

struct TauRuleParams {
  double r = 1.0;
  double d = 1.0;
  double m = 1.0;
  double horizon = 1.0;
  double s_m = 0.0;
  double delta = 0.05;
  double gamma2 = 0.0;
  double c_prime = 1.0;  ///< unspecified universal constant, exposed as a knob
};

/// Result clamped to [1, m].
Index tau_rule(TauRule rule, const TauRuleParams& p);

/// sum_i <a*, v_1 (x) e_i>^2 = ||sum_l v_{1,l} A*_l||_F^2, the exact value of
/// the star-graph bias term when the truth is known.
double star_p1(const SystemEnsemble& truth, const LaplacianSpectrum& spec);

}  // namespace netlds
