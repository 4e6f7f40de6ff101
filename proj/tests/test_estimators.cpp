#include "netlds/estimators.hpp"
#include "netlds/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace netlds;

namespace {

LaplacianSpectrum spec_of(const GraphTopology& g) { return spectrum(build_laplacian(g)); }

}  // namespace

TEST_CASE("laplacian smoothing, lambda zero is nodewise OLS") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    const auto b = oracle::random_bundle(rng, 4, 3, 8);
    const auto g = oracle::random_graph(rng, 4);
    const auto est = laplacian_smoothing(b, g, 0.0);
    for (Index l = 0; l < 4; ++l) {
      const Matrix x = b.regressors(l), xt = b.targets(l);
      const Matrix ols = xt * x.transpose() * (x * x.transpose()).inverse();
      CHECK((est.mats[l] - ols).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("laplacian smoothing, huge lambda pools") {
  std::mt19937_64 rng(32);
  const auto b = oracle::random_bundle(rng, 5, 2, 4);
  const auto g = GraphTopology::path(5);
  const auto est = laplacian_smoothing(b, g, 1e12);
  const Matrix pooled = oracle::pooled_ols(b);
  for (Index l = 0; l < 5; ++l) {
    CHECK((est.mats[l] - pooled).norm() <= 1e-4);
    for (Index k = 0; k < 5; ++k) CHECK((est.mats[l] - est.mats[k]).norm() <= 1e-4);
  }
}

TEST_CASE("laplacian smoothing, hand-built two-node case") {
  TrajectoryBundle b;
  b.m = 2;
  b.d = 2;
  b.horizon = 2;
  Matrix s1(2, 3), s2(2, 3);
  s1 << 1, 0.5, 0.2, 0, 1, -0.3;
  s2 << 0, 1, 1.5, 2, -1, 0.25;
  b.states = {s1, s2};
  const auto g = GraphTopology::path(2);
  const auto est = laplacian_smoothing(b, g, 1.0);
  CHECK(oracle::rel_err(est.mats, oracle::laplacian_smoothing(b, g, 1.0)) <= 1e-10);
  CHECK(est.diagnostics.dense_solve);
  CHECK(est.diagnostics.hyper == 1.0);
}

TEST_CASE("laplacian smoothing matches the dense oracle on random graphs") {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 10; ++rep) {
    const Index m = 2 + rep % 5, d = 1 + rep % 3;
    const auto b = oracle::random_bundle(rng, m, d, d + rep % 4);
    const auto g = oracle::random_graph(rng, m);
    const double lambda = 0.3 * (rep + 1);
    const auto want = oracle::laplacian_smoothing(b, g, lambda);
    CHECK(oracle::rel_err(laplacian_smoothing(b, g, lambda).mats, want) <= 1e-8);
    SolverOptions cg;
    cg.dense_max_unknowns = 0;
    CHECK(oracle::rel_err(laplacian_smoothing(b, g, lambda, cg).mats, want) <= 1e-8);
  }
}

TEST_CASE("laplacian smoothing minimises the penalized objective") {
  std::mt19937_64 rng(34);
  const auto b = oracle::random_bundle(rng, 4, 2, 3);
  const auto g = GraphTopology::star(4);
  const auto est = laplacian_smoothing(b, g, 0.8);
  const double best = penalized_objective(b, g, est.mats, 0.8);
  CHECK(est.diagnostics.objective == doctest::Approx(best).epsilon(1e-12));
  for (int trial = 0; trial < 5; ++trial) {
    auto perturbed = est.mats;
    perturbed[trial % 4] += 1e-3 * oracle::gaussian(rng, 2, 2);
    CHECK(penalized_objective(b, g, perturbed, 0.8) > best);
  }
}

TEST_CASE("laplacian smoothing rejects singular and invalid input") {
  std::mt19937_64 rng(35);
  const auto b = oracle::random_bundle(rng, 3, 4, 2);
  CHECK_THROWS_AS(laplacian_smoothing(b, GraphTopology::path(3), 0.0), SingularOperatorError);
  CHECK_THROWS_AS(laplacian_smoothing(b, GraphTopology::path(3), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(laplacian_smoothing(b, GraphTopology::path(4), 1.0), std::invalid_argument);
}

TEST_CASE("subspace LS reductions") {
  std::mt19937_64 rng(36);
  for (int rep = 0; rep < 5; ++rep) {
    const Index m = 3 + rep % 3, d = 2;
    const auto b = oracle::random_bundle(rng, m, d, 1 + rep % 3);
    const auto g = oracle::random_graph(rng, m);
    const auto spec = spec_of(g);

    const auto full = subspace_ls(b, spec, m);
    CHECK(oracle::rel_err(full.mats, oracle::min_norm_ls(b)) <= 1e-8);

    const auto one = subspace_ls(b, spec, 1);
    const Matrix pooled = oracle::pooled_ols(b);
    for (Index l = 0; l < m; ++l) CHECK((one.mats[l] - pooled).norm() <= 1e-8 * std::max(1.0, pooled.norm()));
  }
}

TEST_CASE("subspace LS matches the dense pseudo-inverse oracle") {
  std::mt19937_64 rng(37);
  const auto b = oracle::random_bundle(rng, 5, 2, 3);
  const auto g = GraphTopology::path(5);
  const auto spec = spec_of(g);
  const auto est = subspace_ls(b, spec, 2);
  CHECK(oracle::rel_err(est.mats, oracle::subspace_ls(b, spec.low_frequency_basis(2))) <= 1e-8);
  REQUIRE(est.diagnostics.effective_rank.has_value());
  CHECK(*est.diagnostics.effective_rank == 2 * 2 * 2);
  CHECK_FALSE(est.diagnostics.basis_dependent);
  CHECK_THROWS(subspace_ls(b, spec, 0));
  CHECK_THROWS(subspace_ls(b, spec, 6));
}

TEST_CASE("subspace LS stays in the subspace") {
  std::mt19937_64 rng(38);
  const auto b = oracle::random_bundle(rng, 6, 3, 2);
  const auto spec = spec_of(oracle::random_graph(rng, 6));
  for (Index tau = 1; tau <= 6; ++tau) {
    const auto est = subspace_ls(b, spec, tau);
    const Matrix w = spec.low_frequency_basis(tau);
    const Vector a = oracle::stack(est.mats);
    const Matrix p = oracle::kron(w * w.transpose(), Matrix::Identity(9, 9));
    CHECK((p * a - a).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("star graph flags a basis-dependent tau") {
  std::mt19937_64 rng(39);
  const auto b = oracle::random_bundle(rng, 5, 2, 3);
  const auto spec = spec_of(GraphTopology::star(5));
  CHECK(subspace_ls(b, spec, 2).diagnostics.basis_dependent);
  CHECK_FALSE(subspace_ls(b, spec, 4).diagnostics.basis_dependent);
}

TEST_CASE("nodewise OLS") {
  std::mt19937_64 rng(40);
  const Index d = 3, T = 6;
  TrajectoryBundle b;
  b.m = 2;
  b.d = d;
  b.horizon = T;
  std::vector<Matrix> truth;
  for (Index l = 0; l < 2; ++l) {
    // Noiseless orbit of an orthogonal matrix: X_l has full rank and X~_l = A X_l exactly.
    Eigen::HouseholderQR<Matrix> qr(oracle::gaussian(rng, d, d));
    const Matrix a = qr.householderQ();
    Matrix s(d, T + 1);
    s.col(0) = oracle::gaussian(rng, d, 1);
    for (Index t = 1; t <= T; ++t) s.col(t) = a * s.col(t - 1);
    b.states.push_back(s);
    truth.push_back(a);
  }
  const auto est = nodewise_ols(b);
  for (Index l = 0; l < 2; ++l) CHECK((est.mats[l] - truth[l]).norm() <= 1e-10);

  const auto under = oracle::random_bundle(rng, 2, 4, 2);
  const auto mn = nodewise_ols(under);
  for (Index l = 0; l < 2; ++l) {
    const Matrix x = under.regressors(l), xt = under.targets(l);
    // T < d: the fit interpolates and the solution has no component outside span(X).
    CHECK((mn.mats[l] * x - xt).norm() <= 1e-9 * std::max(1.0, xt.norm()));
    const Matrix px = x * (x.transpose() * x).inverse() * x.transpose();
    CHECK((mn.mats[l] * px - mn.mats[l]).norm() <= 1e-9);
  }
}

TEST_CASE("pooled OLS") {
  std::mt19937_64 rng(41);
  const auto b = oracle::random_bundle(rng, 4, 3, 5);
  const auto pooled = pooled_ols(b);
  for (const auto& a : pooled.mats) CHECK((a - oracle::pooled_ols(b)).norm() <= 1e-10);

  TrajectoryBundle single;
  single.m = 1;
  single.d = 3;
  single.horizon = 5;
  single.states = {b.states[0]};
  CHECK((pooled_ols(single).mats[0] - nodewise_ols(single).mats[0]).norm() <= 1e-12);

  TrajectoryBundle copies = b;
  copies.noise.clear();
  for (auto& s : copies.states) s = b.states[0];
  const auto shared = pooled_ols(copies);
  CHECK((shared.mats[2] - nodewise_ols(single).mats[0]).norm() <= 1e-10);
}

TEST_CASE("estimate dispatch and truth diagnostics") {
  std::mt19937_64 rng(42);
  const auto truth = oracle::random_ensemble(rng, 5, 2);
  const auto b = simulate(truth, 6, {}, 9);
  const auto g = GraphTopology::path(5);
  const auto spec = spec_of(g);
  EstimatorConfig config;
  config.method = Method::LaplacianSmoothing;
  config.lambda = 2.0;
  auto est = estimate(b, g, spec, config);
  attach_truth(est, truth, b, g);
  REQUIRE(est.diagnostics.mse.has_value());
  CHECK(*est.diagnostics.mse == doctest::Approx(mse(est.mats, truth.mats())));
  REQUIRE(est.diagnostics.objective_at_truth.has_value());
  CHECK(*est.diagnostics.objective_at_truth >= est.diagnostics.objective);
  CHECK(est.diagnostics.gammas.has_value());

  config.method = Method::SubspaceLS;
  config.tau = 9;
  CHECK_THROWS(estimate(b, g, spec, config));
  CHECK(method_from_string("pooled_ols") == Method::PooledOLS);
  CHECK_THROWS(method_from_string("ridge"));
}

TEST_CASE("mse") {
  std::mt19937_64 rng(43);
  std::vector<Matrix> a, t;
  for (int l = 0; l < 4; ++l) {
    a.push_back(oracle::gaussian(rng, 3, 3));
    t.push_back(oracle::gaussian(rng, 3, 3));
  }
  CHECK(mse(a, a) == 0.0);
  CHECK(mse({Matrix::Identity(2, 2)}, {Matrix::Zero(2, 2)}) == 2.0);
  double naive = 0.0;
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) naive += (a[l](i, j) - t[l](i, j)) * (a[l](i, j) - t[l](i, j));
  naive /= 4.0;
  CHECK(std::abs(mse(a, t) - naive) <= 1e-12 * naive);
  CHECK(rmse(a, t) == doctest::Approx(std::sqrt(naive)));
  CHECK_THROWS(mse(a, {t[0]}));
  CHECK_THROWS(mse({Matrix::Zero(2, 2)}, {Matrix::Zero(3, 3)}));
}

TEST_CASE("lambda rules") {
  LambdaRuleParams p;
  p.r = 1;
  p.d = 1;
  p.m = 32;
  p.s_m = 1;
  p.horizon = 1;
  CHECK(lambda_rule(LambdaRule::PathBalance, p) == doctest::Approx(4.0).epsilon(1e-12));

  LambdaRuleParams bench;
  bench.beta = 1.0;
  bench.m = 32;
  CHECK(lambda_rule(LambdaRule::Benchmark, bench) == doctest::Approx(320.0).epsilon(1e-12));

  LambdaRuleParams c;
  c.horizon = 8;
  c.r = 1;
  c.d = 1;
  c.m = 1;
  c.s_m = 1;
  CHECK(lambda_rule(LambdaRule::CompleteBalance, c) == doctest::Approx(2.0).epsilon(1e-12));

  LambdaRuleParams s = c;
  s.m = 2;
  s.p1 = 0.25;
  // (8 * 2 / (1 + 4 * 0.25))^{1/3} = 2
  CHECK(lambda_rule(LambdaRule::StarBalance, s) == doctest::Approx(2.0).epsilon(1e-12));

  c.s_m = 0.0;
  CHECK_THROWS(lambda_rule(LambdaRule::CompleteBalance, c));
  p.s_m = 0.0;
  CHECK_THROWS(lambda_rule(LambdaRule::PathBalance, p));
  CHECK(lambda_rule_from_string("benchmark") == LambdaRule::Benchmark);
}

TEST_CASE("tau rules") {
  TauRuleParams p;
  p.m = 8;
  CHECK(tau_rule(TauRule::Benchmark, p) == 3);
  p.m = 1000;
  CHECK(tau_rule(TauRule::Benchmark, p) == 15);
  p.m = 2;
  CHECK(tau_rule(TauRule::Benchmark, p) == 2);

  TauRuleParams q;
  q.c_prime = 1;
  q.r = 1;
  q.d = 1;
  q.horizon = 1;
  q.delta = std::exp(-1.0);
  q.gamma2 = 0;
  q.m = 8;
  q.s_m = 8;
  CHECK(tau_rule(TauRule::PathBalance, q) == 2);
  q.s_m = 0.0;
  // The max{., 1} floor keeps the rule defined for a perfectly smooth ensemble.
  CHECK(tau_rule(TauRule::PathBalance, q) == 1);
}

TEST_CASE("star p1") {
  const auto spec = spec_of(GraphTopology::star(4));
  std::vector<Matrix> same(4, Matrix::Identity(2, 2));
  // Constant ensembles are orthogonal to every non-constant eigenvector.
  CHECK(star_p1(SystemEnsemble(same), spec) < 1e-20);
  std::mt19937_64 rng(44);
  const auto e = oracle::random_ensemble(rng, 4, 2);
  Matrix s = Matrix::Zero(2, 2);
  for (Index l = 0; l < 4; ++l) s += spec.eigenvectors(l, 0) * e[l];
  CHECK(star_p1(e, spec) == doctest::Approx(s.squaredNorm()).epsilon(1e-12));
}
