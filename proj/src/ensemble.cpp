#include "netlds/ensemble.hpp"

#include "netlds/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace netlds {

namespace {

constexpr double kOverflowLimit = 1e150;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool finite_and_bounded(const Matrix& a) {
  return a.allFinite() && (a.size() == 0 || a.cwiseAbs().maxCoeff() <= kOverflowLimit);
}

}  // namespace

SystemEnsemble::SystemEnsemble(std::vector<Matrix> mats, EnsembleMeta meta)
    : d_(mats.empty() ? 0 : mats.front().rows()), mats_(std::move(mats)), meta_(meta) {
  if (mats_.empty()) throw std::invalid_argument("ensemble needs at least one matrix");
  if (d_ < 1) throw std::invalid_argument("state dimension must be at least 1");
  for (const auto& a : mats_) {
    if (a.rows() != d_ || a.cols() != d_) throw std::invalid_argument("ensemble matrices must all be d x d");
    if (!a.allFinite()) throw std::invalid_argument("ensemble matrices must be finite");
  }
  if (meta_.normalized) {
    const double worst = spectral_radii().maxCoeff();
    if (worst > 1.0 + 1e-9)
      throw std::invalid_argument("ensemble flagged normalized but max spectral radius is " + std::to_string(worst));
  }
}

Vector SystemEnsemble::spectral_radii() const {
  Vector out(size());
  for (Index l = 0; l < size(); ++l) out(l) = spectral_radius(mats_[static_cast<std::size_t>(l)]);
  return out;
}

SystemEnsemble sample_holder_ensemble(Index m, Index d, const EntryFunction& f, std::optional<double> beta) {
  if (m < 2) throw std::invalid_argument("ensembles on a graph need m >= 2");
  if (d < 1) throw std::invalid_argument("state dimension must be at least 1");
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(m));
  for (Index l = 1; l <= m; ++l) {
    const double x = static_cast<double>(l) / static_cast<double>(m);
    Matrix a(d, d);
    for (Index i = 1; i <= d; ++i)
      for (Index j = 1; j <= d; ++j) a(i - 1, j - 1) = f(i, j, x);
    mats.push_back(std::move(a));
  }
  EnsembleMeta meta;
  meta.beta = beta;
  meta.s_m = quadratic_variation(mats, GraphTopology::path(m));
  return SystemEnsemble(std::move(mats), meta);
}

SystemEnsemble sample_holder_ensemble(Index m, Index d, double beta, HolderFamily family) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  switch (family) {
    case HolderFamily::Benchmark: {
      const double dd = static_cast<double>(d);
      auto f = [beta, dd](Index i, Index j, double x) {
        return 4.0 * std::pow(x, beta) -
               std::sin(2.0 * std::numbers::pi * static_cast<double>(i * j) / dd * x);
      };
      return sample_holder_ensemble(m, d, f, beta);
    }
  }
  throw std::invalid_argument("unknown Hoelder family");
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral radius needs a square matrix");
  if (!a.allFinite()) throw std::invalid_argument("spectral radius of a non-finite matrix");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw Error("eigensolver failed while computing a spectral radius");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SystemEnsemble normalize_spectral_radius(const SystemEnsemble& e) {
  const double scale = e.spectral_radii().maxCoeff();
  if (!(scale > 0.0)) throw std::invalid_argument("cannot normalize: every matrix has spectral radius 0");
  std::vector<Matrix> mats;
  mats.reserve(e.mats().size());
  for (const auto& a : e.mats()) mats.push_back(a / scale);
  EnsembleMeta meta = e.meta();
  meta.normalized = true;
  if (meta.s_m) *meta.s_m /= scale * scale;
  return SystemEnsemble(std::move(mats), meta);
}

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::GaussianUnit ? "gaussian" : "rademacher";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "gaussian") return NoiseKind::GaussianUnit;
  if (name == "rademacher") return NoiseKind::Rademacher;
  throw std::invalid_argument("unknown noise model '" + std::string(name) + "'");
}

void TrajectoryBundle::validate() const {
  if (m < 1 || d < 1 || horizon < 1) throw std::invalid_argument("bundle needs m, d, T >= 1");
  if (static_cast<Index>(states.size()) != m) throw std::invalid_argument("bundle state count does not match m");
  for (const auto& s : states) {
    if (s.rows() != d || s.cols() != horizon + 1) throw std::invalid_argument("bundle states must be d x (T+1)");
    if (!s.allFinite()) throw std::invalid_argument("bundle states must be finite");
  }
  if (!noise.empty()) {
    if (static_cast<Index>(noise.size()) != m) throw std::invalid_argument("bundle noise count does not match m");
    for (const auto& s : noise)
      if (s.rows() != d || s.cols() != horizon + 1) throw std::invalid_argument("bundle noise must be d x (T+1)");
  }
}

std::uint64_t node_stream_seed(std::uint64_t master_seed, Index l) {
  return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(l) + 0x7A3C5E11ULL));
}

namespace {

void simulate_node(const Matrix& a, Index horizon, const NoiseModel& noise, std::uint64_t seed, Matrix& states,
                   Matrix& eta, Index node) {
  const Index d = a.rows();
  std::mt19937_64 gen(seed);
  eta.resize(d, horizon + 1);
  if (noise.kind == NoiseKind::GaussianUnit) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index t = 0; t <= horizon; ++t)
      for (Index i = 0; i < d; ++i) eta(i, t) = normal(gen);
  } else {
    for (Index t = 0; t <= horizon; ++t)
      for (Index i = 0; i < d; ++i) eta(i, t) = (gen() >> 63) ? 1.0 : -1.0;
  }
  states.resize(d, horizon + 1);
  states.col(0) = eta.col(0);
  for (Index t = 1; t <= horizon; ++t) {
    states.col(t) = a * states.col(t - 1) + eta.col(t);
    if (!states.col(t).allFinite() || states.col(t).cwiseAbs().maxCoeff() > kOverflowLimit) {
      throw OverflowError("trajectory of node " + std::to_string(node + 1) + " exceeded 1e150 at t=" +
                          std::to_string(t + 1) + "; the system is explosive, shorten T or normalize the ensemble");
    }
  }
}

}  // namespace

TrajectoryBundle simulate(const SystemEnsemble& e, Index horizon, const NoiseModel& noise, std::uint64_t seed,
                          int threads) {
  if (horizon < 1) throw std::invalid_argument("horizon T must be at least 1");
  TrajectoryBundle out;
  out.m = e.size();
  out.d = e.dim();
  out.horizon = horizon;
  out.seed = seed;
  out.states.resize(static_cast<std::size_t>(out.m));
  out.noise.resize(static_cast<std::size_t>(out.m));

  auto run_range = [&](Index begin, Index end) {
    for (Index l = begin; l < end; ++l) {
      simulate_node(e[l], horizon, noise, node_stream_seed(seed, l), out.states[static_cast<std::size_t>(l)],
                    out.noise[static_cast<std::size_t>(l)], l);
    }
  };

  const Index workers = std::clamp<Index>(threads, 1, out.m);
  if (workers == 1) {
    run_range(0, out.m);
    return out;
  }
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  const Index chunk = (out.m + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        run_range(w * chunk, std::min(out.m, (w + 1) * chunk));
      } catch (...) {
        failures[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

Matrix grammian(const Matrix& a, Index t) {
  if (a.rows() != a.cols()) throw std::invalid_argument("grammian needs a square matrix");
  if (t < 0) throw std::invalid_argument("grammian horizon must be nonnegative");
  const Index d = a.rows();
  Matrix power = Matrix::Identity(d, d);
  Matrix sum = Matrix::Identity(d, d);
  for (Index k = 1; k <= t; ++k) {
    power = a * power;
    sum.noalias() += power * power.transpose();
    if (!finite_and_bounded(sum)) {
      throw OverflowError("controllability Grammian overflowed at k=" + std::to_string(k) +
                          "; the matrix is explosive, use a shorter horizon or normalize it");
    }
  }
  return sum;
}

GammaDiagnostics gamma_diagnostics(const SystemEnsemble& e, Index horizon, double delta, double r) {
  if (horizon < 1) throw std::invalid_argument("horizon T must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const Index d = e.dim();
  GammaDiagnostics out;
  double worst_sum = 0.0;
  for (const auto& a : e.mats()) {
    // trace(Gamma_t) = sum_{k<=t} ||A^k||_F^2
    Matrix power = Matrix::Identity(d, d);
    double trace = static_cast<double>(d);
    double sum_0_to_tm1 = 0.0;
    double sum_1_to_t = 0.0;
    for (Index t = 0; t <= horizon; ++t) {
      if (t > 0) {
        power = a * power;
        trace += power.squaredNorm();
        if (!std::isfinite(trace) || trace > kOverflowLimit)
          throw OverflowError("Grammian trace overflowed; the ensemble is explosive over this horizon");
      }
      if (t <= horizon - 1) sum_0_to_tm1 += trace;
      if (t >= 1) sum_1_to_t += trace - static_cast<double>(d);
    }
    worst_sum = std::max(worst_sum, sum_0_to_tm1);
    out.gamma2 += sum_1_to_t;
    out.gamma3 += sum_0_to_tm1;
  }
  out.gamma1 = (1.0 + r * r * std::log(static_cast<double>(e.size()) / delta)) * worst_sum;
  return out;
}

}  // namespace netlds
