#pragma once

#include "netlds/common.hpp"

#include <functional>
#include <optional>
#include <string_view>

namespace netlds {

struct EnsembleMeta {
  std::optional<double> beta;    ///< Hoelder exponent used to sample the ensemble
  bool normalized = false;       ///< divided by the largest spectral radius
  std::optional<double> s_m;     ///< quadratic variation on the path graph
};

/// Ground-truth system matrices A*_1 .. A*_m, all d x d.
class SystemEnsemble {
 public:
  SystemEnsemble(std::vector<Matrix> mats, EnsembleMeta meta = {});

  Index size() const noexcept { return static_cast<Index>(mats_.size()); }
  Index dim() const noexcept { return d_; }
  const std::vector<Matrix>& mats() const noexcept { return mats_; }
  const Matrix& operator[](Index l) const { return mats_.at(static_cast<std::size_t>(l)); }
  const EnsembleMeta& meta() const noexcept { return meta_; }

  /// Spectral radius of each matrix.
  Vector spectral_radii() const;

 private:
  Index d_;
  std::vector<Matrix> mats_;
  EnsembleMeta meta_;
};

/// Entry function f(i, j, x) with 1-based (i, j) and x in (0, 1].
using EntryFunction = std::function<double(Index i, Index j, double x)>;

enum class HolderFamily {
  /// f_ij(x) = 4 x^beta - sin(2 pi i j x / d)
  Benchmark,
};

/// A_{l,i,j} = f_ij(l / m) for l = 1..m; meta.s_m is the path-graph variation.
SystemEnsemble sample_holder_ensemble(Index m, Index d, double beta, HolderFamily family = HolderFamily::Benchmark);
SystemEnsemble sample_holder_ensemble(Index m, Index d, const EntryFunction& f, std::optional<double> beta = std::nullopt);

/// Max modulus over the (complex) eigenvalues.
double spectral_radius(const Matrix& a);

/// Divides every matrix by max_l rho(A_l). Throws if every radius is zero.
SystemEnsemble normalize_spectral_radius(const SystemEnsemble& e);

enum class NoiseKind { GaussianUnit, Rademacher };

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// Centered noise with independent unit-variance coordinates. `r` is the
/// subgaussian constant fed to the hyperparameter formulas; it does not
/// change the sampled values.
struct NoiseModel {
  NoiseKind kind = NoiseKind::GaussianUnit;
  double r = 1.0;
};

/// Observed states x_{l,1} .. x_{l,T+1} of every node; x_{l,0} = 0 is implied.
struct TrajectoryBundle {
  Index m = 0;
  Index d = 0;
  Index horizon = 0;                 ///< T
  std::uint64_t seed = 0;
  std::vector<Matrix> states;        ///< per node, d x (T+1), column t-1 holds x_{l,t}
  std::vector<Matrix> noise;         ///< per node, d x (T+1) when simulated, else empty

  /// Checks shapes and finiteness; throws std::invalid_argument.
  void validate() const;
  /// X_l = [x_{l,1} .. x_{l,T}]
  auto regressors(Index l) const { return states.at(static_cast<std::size_t>(l)).leftCols(horizon); }
  /// X~_l = [x_{l,2} .. x_{l,T+1}]
  auto targets(Index l) const { return states.at(static_cast<std::size_t>(l)).rightCols(horizon); }
};

/// Seed of the independent stream used for node l.
std::uint64_t node_stream_seed(std::uint64_t master_seed, Index l);

/// x_{l,t+1} = A_l x_{l,t} + eta_{l,t+1}, x_{l,0} = 0, t = 0..T.
/// Node l draws from its own stream seeded by node_stream_seed(seed, l), so
/// the result does not depend on `threads`.
TrajectoryBundle simulate(const SystemEnsemble& e, Index horizon, const NoiseModel& noise, std::uint64_t seed,
                          int threads = 1);

/// Gamma_t(A) = sum_{k=0}^{t} A^k (A^k)^T.
Matrix grammian(const Matrix& a, Index t);

struct GammaDiagnostics {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
};

/// gamma1 = (1 + R^2 log(m/delta)) max_l sum_{t=0}^{T-1} Tr Gamma_t(A_l)
/// gamma2 = sum_l sum_{t=1}^{T} Tr(Gamma_t(A_l) - I)
/// gamma3 = sum_l sum_{t=0}^{T-1} Tr Gamma_t(A_l)
GammaDiagnostics gamma_diagnostics(const SystemEnsemble& e, Index horizon, double delta, double r = 1.0);

}  // namespace netlds
