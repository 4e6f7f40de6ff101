#include "netlds/solver.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace netlds;

TEST_CASE("gram blocks") {
  TrajectoryBundle b;
  b.m = 1;
  b.d = 2;
  b.horizon = 1;
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 1.0;
  s(1, 1) = 3.0;
  b.states = {s};
  const auto blocks = gram_blocks(b);
  Matrix e1 = Matrix::Zero(2, 2);
  e1(0, 0) = 1.0;
  CHECK(blocks.y[0] == e1);

  std::mt19937_64 rng(21);
  const auto rb = oracle::random_bundle(rng, 3, 2, 4);
  const auto g = gram_blocks(rb);
  const Matrix q = oracle::dense_q(rb);
  Matrix qtq = Matrix::Zero(12, 12);
  for (Index l = 0; l < 3; ++l) qtq.block(4 * l, 4 * l, 4, 4) = oracle::kron(g.y[l], Matrix::Identity(2, 2));
  CHECK((qtq - q.transpose() * q).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.rhs() - q.transpose() * oracle::dense_xtilde(rb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("apply_penalized") {
  std::mt19937_64 rng(22);
  const auto b = oracle::random_bundle(rng, 4, 2, 3);
  const auto graph = oracle::random_graph(rng, 4);
  const Matrix q = oracle::dense_q(b);
  const Vector a = oracle::gaussian(rng, 16, 1);

  const PenalizedOperator plain(gram_blocks(b), graph, 0.0);
  CHECK((apply_penalized(plain, a) - q.transpose() * q * a).cwiseAbs().maxCoeff() < 1e-11);

  const double lambda = 1.7;
  const PenalizedOperator op(gram_blocks(b), graph, lambda);
  const Matrix dense = q.transpose() * q + lambda * oracle::penalty(graph, 2);
  CHECK((apply_penalized(op, a) - dense * a).cwiseAbs().maxCoeff() < 1e-11);

  // Identical matrices at every node: the Laplacian term drops out.
  const Matrix common = oracle::gaussian(rng, 2, 2);
  const Vector same = oracle::stack(std::vector<Matrix>(4, common));
  CHECK((apply_penalized(op, same) - apply_penalized(plain, same)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix rows = op.row_system();
  CHECK(rows.rows() == 8);
  CHECK((rows - rows.transpose()).norm() == 0.0);
}

TEST_CASE("solve_spd") {
  SUBCASE("identity-like operator returns the rhs") {
    GramBlocks blocks;
    blocks.horizon = 3;
    blocks.y = std::vector<Matrix>(3, Matrix::Identity(2, 2));
    blocks.c = std::vector<Matrix>(3, Matrix::Zero(2, 2));
    const PenalizedOperator op(blocks, GraphTopology::path(3), 0.0);
    std::mt19937_64 rng(1);
    const Vector rhs = oracle::gaussian(rng, 12, 1);
    CHECK((solve_spd(op, rhs).x - rhs).norm() < 1e-14);
    SolverOptions cg;
    cg.dense_max_unknowns = 0;
    CHECK((solve_spd(op, rhs, cg).x - rhs).norm() < 1e-10);
  }

  SUBCASE("random instance against a dense factorisation") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 5; ++rep) {
      const auto b = oracle::random_bundle(rng, 3, 2, 3);
      const auto graph = GraphTopology::path(3);
      const PenalizedOperator op(gram_blocks(b), graph, 0.7);
      const Matrix q = oracle::dense_q(b);
      const Matrix dense = q.transpose() * q + 0.7 * oracle::penalty(graph, 2);
      const Vector rhs = op.blocks().rhs();
      const Vector want = dense.fullPivLu().solve(rhs);
      const auto direct = solve_spd(op, rhs);
      CHECK(direct.dense);
      CHECK((direct.x - want).norm() <= 1e-8 * want.norm());
      SolverOptions cg;
      cg.dense_max_unknowns = 0;
      const auto iter = solve_spd(op, rhs, cg);
      CHECK_FALSE(iter.dense);
      CHECK(iter.iterations > 0);
      CHECK((iter.x - want).norm() <= 1e-8 * want.norm());
      cg.block_jacobi = true;
      CHECK((solve_spd(op, rhs, cg).x - want).norm() <= 1e-8 * want.norm());
    }
  }

  SUBCASE("lambda zero with T < d is singular") {
    std::mt19937_64 rng(24);
    const auto b = oracle::random_bundle(rng, 3, 4, 2);
    const PenalizedOperator op(gram_blocks(b), GraphTopology::path(3), 0.0);
    CHECK_THROWS_AS(solve_spd(op, op.blocks().rhs()), SingularOperatorError);
    SolverOptions cg;
    cg.dense_max_unknowns = 0;
    CHECK_THROWS_AS(solve_spd(op, op.blocks().rhs(), cg), SingularOperatorError);
    // Pooling over the graph fixes it once m T >= d.
    const PenalizedOperator pooled(gram_blocks(b), GraphTopology::path(3), 1.0);
    CHECK_NOTHROW(solve_spd(pooled, pooled.blocks().rhs()));
  }

  SUBCASE("iteration cap raises a convergence error") {
    std::mt19937_64 rng(25);
    const auto b = oracle::random_bundle(rng, 6, 3, 4);
    const PenalizedOperator op(gram_blocks(b), GraphTopology::path(6), 2.0);
    SolverOptions cg;
    cg.dense_max_unknowns = 0;
    cg.max_iter = 2;
    try {
      solve_spd(op, op.blocks().rhs(), cg);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.iterations() == 2);
      CHECK(e.residual() > cg.tol);
    }
  }
}

TEST_CASE("pinv_solve") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  Vector rhs(2);
  rhs << 4, 5;
  const Vector x = pinv_solve(m, rhs);
  CHECK(x(0) == doctest::Approx(2.0));
  CHECK(x(1) == 0.0);

  std::mt19937_64 rng(26);
  const Vector r = oracle::gaussian(rng, 5, 1);
  CHECK((pinv_solve(Matrix::Identity(5, 5), r) - r).norm() < 1e-14);

  const Matrix f = oracle::gaussian(rng, 6, 3);
  const Matrix psd = f * f.transpose();
  const Vector b = oracle::gaussian(rng, 6, 1);
  const auto res = pinv_solve_many(psd, b);
  CHECK(res.rank == 3);
  Eigen::HouseholderQR<Matrix> qr(f);
  const Matrix basis = qr.householderQ() * Matrix::Identity(6, 3);
  const Vector projection = basis * (basis.transpose() * b);
  CHECK((psd * res.x - projection).cwiseAbs().maxCoeff() < 1e-9);
  // Minimum norm: no component in the kernel.
  CHECK((basis * (basis.transpose() * res.x) - res.x).norm() < 1e-9);

  CHECK(default_rank_tol(10) == doctest::Approx(10 * std::numeric_limits<double>::epsilon()));
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS(pinv_solve(asym, rhs));
}
