#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "gtcnn/eig.hpp"
#include "gtcnn/graph.hpp"
#include "helpers.hpp"

using namespace gtcnn;

TEST_CASE("sbm at p_in=1, p_out=0 yields disjoint within-community cliques") {
  auto [g, labels] = sbm_generate(4, 2, 1.0, 0.0, 123);
  REQUIRE(labels == std::vector<int>{0, 1, 0, 1});
  // two communities of two nodes -> one undirected edge each
  REQUIRE(g.gso.nnz() == 4);
  REQUIRE(g.gso.coeff(0, 2) == 1.0);
  REQUIRE(g.gso.coeff(1, 3) == 1.0);
  REQUIRE(g.gso.coeff(0, 1) == 0.0);
  REQUIRE(g.symmetric);
}

TEST_CASE("sbm undirected edge count tracks the analytic expectation") {
  // E[edges] = p_in * C * C(20,2) + p_out * (C(100,2) - C * C(20,2)) = 760 + 800
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto [g, labels] = sbm_generate(100, 5, 0.8, 0.2, seed);
    total += g.gso.nnz() / 2.0;
  }
  const double mean = total / 20.0;
  REQUIRE(mean >= 1560.0 * 0.95);
  REQUIRE(mean <= 1560.0 * 1.05);
}

TEST_CASE("sbm edges replay the seeded Bernoulli stream") {
  auto [g, labels] = sbm_generate(3, 3, 0.5, 0.5, 7);
  Rng replay(7);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const bool edge = replay.uniform() < 0.5;
      REQUIRE((g.gso.coeff(i, j) == 1.0) == edge);
    }
}

TEST_CASE("sbm rejects invalid parameters") {
  REQUIRE_THROWS_AS(sbm_generate(2, 3, 0.5, 0.1, 0), ParameterError);
  REQUIRE_THROWS_AS(sbm_generate(5, 2, 0.3, 0.5, 0), ParameterError);
  REQUIRE_THROWS_AS(sbm_generate(5, 2, 1.2, 0.1, 0), ParameterError);
}

TEST_CASE("line graph shifts signals forward in time and is nilpotent") {
  REQUIRE(line_graph(1).gso.nnz() == 0);
  REQUIRE_THROWS_AS(line_graph(0), ParameterError);

  Graph g3 = line_graph(3);
  REQUIRE(g3.gso.nnz() == 2);
  REQUIRE(g3.gso.coeff(1, 0) == 1.0);
  REQUIRE(g3.gso.coeff(2, 1) == 1.0);

  Eigen::MatrixXd p4 = testutil::dense_power(line_graph(4).gso.to_dense(), 4);
  REQUIRE(p4.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cyclic graph wraps around and satisfies lambda^t = 1") {
  Graph g1 = cyclic_graph(1);
  REQUIRE(g1.gso.coeff(0, 0) == 1.0);

  Graph g2 = cyclic_graph(2);
  REQUIRE(g2.symmetric);
  REQUIRE(g2.gso.coeff(0, 1) == 1.0);
  REQUIRE(g2.gso.coeff(1, 0) == 1.0);

  Graph g4 = cyclic_graph(4);
  REQUIRE(g4.gso.nnz() == 4);
  // S^4 = I certifies every eigenvalue is a 4th root of unity
  Eigen::MatrixXd p4 = testutil::dense_power(g4.gso.to_dense(), 4);
  REQUIRE((p4 - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE_THROWS_AS(cyclic_graph(0), ParameterError);
}

TEST_CASE("laplacian of known small graphs") {
  Graph k2 = make_graph(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}),
                        GraphKind::spatial, true);
  Eigen::MatrixXd l2 = laplacian(k2).to_dense();
  Eigen::MatrixXd expect(2, 2);
  expect << 1, -1, -1, 1;
  REQUIRE((l2 - expect).cwiseAbs().maxCoeff() == 0.0);

  Graph tri = make_graph(
      SparseMatrix::from_triplets(
          3, 3, {{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}, {0, 2, 1}, {2, 0, 1}}),
      GraphKind::spatial, true);
  Eigen::MatrixXd lt = laplacian(tri).to_dense();
  for (int i = 0; i < 3; ++i) REQUIRE(lt(i, i) == 2.0);
  REQUIRE(lt(0, 1) == -1.0);
  EigenDecomposition d = sym_eig(laplacian(tri));
  REQUIRE(std::abs(d.eigenvalues[2]) <= 1e-12);
}

TEST_CASE("laplacian row sums vanish on a random sbm") {
  auto [g, labels] = sbm_generate(20, 4, 0.7, 0.2, 5);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(20);
  REQUIRE(laplacian(g).apply(ones).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("laplacian requires a symmetric graph") {
  REQUIRE_THROWS_AS(laplacian(line_graph(3)), ContractError);
}

TEST_CASE("heat diffusion identities") {
  Graph k2 = make_graph(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}),
                        GraphKind::spatial, true);
  Eigen::Vector2d x0(1.0, 0.0);

  SECTION("time zero is the identity") {
    REQUIRE((heat_diffusion(k2, x0, 0.0) - x0).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("long time reaches the uniform stationary state") {
    Eigen::VectorXd xinf = heat_diffusion(k2, x0, 1e3);
    REQUIRE(std::abs(xinf[0] - 0.5) <= 1e-9);
    REQUIRE(std::abs(xinf[1] - 0.5) <= 1e-9);
  }
  SECTION("negative time is rejected") {
    REQUIRE_THROWS_AS(heat_diffusion(k2, x0, -1.0), ParameterError);
  }
}

TEST_CASE("heat diffusion on P3 matches the truncated Taylor series") {
  Graph p3 = make_graph(
      SparseMatrix::from_triplets(3, 3, {{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}}),
      GraphKind::spatial, true);
  Eigen::Vector3d x0(1.0, 0.0, 0.0);
  Eigen::MatrixXd l = laplacian(p3).to_dense();
  Eigen::VectorXd taylor = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd term = x0;
  taylor += term;
  for (int k = 1; k <= 30; ++k) {
    term = (-l * term) / static_cast<double>(k);
    taylor += term;
  }
  REQUIRE((heat_diffusion(p3, x0, 1.0) - taylor).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("heat diffusion conserves mass at all times") {
  gtcnn::Rng rng(11);
  auto [g, labels] = sbm_generate(15, 3, 0.6, 0.2, 31);
  HeatKernel kernel(g);
  Eigen::VectorXd x0 = testutil::random_vector(15, rng);
  for (double t : {0.0, 0.3, 1.0, 5.0, 12.0}) {
    Eigen::VectorXd xt = kernel.at(x0, t);
    REQUIRE(std::abs(xt.sum() - x0.sum()) <= 1e-9 * x0.cwiseAbs().sum());
  }
}

TEST_CASE("permutations act as P^T S P and P^T x") {
  SECTION("identity leaves the graph unchanged") {
    auto [g, labels] = sbm_generate(6, 2, 0.8, 0.3, 2);
    Graph pg = permute_graph(g, Permutation::identity(6));
    REQUIRE((pg.gso.to_dense() - g.gso.to_dense()).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("swap(0,1) fixes the symmetric 2-swap") {
    Graph k2 = make_graph(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}),
                          GraphKind::spatial, true);
    Graph pg = permute_graph(k2, Permutation({1, 0}));
    REQUIRE((pg.gso.to_dense() - k2.gso.to_dense()).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("degree multiset is preserved") {
    gtcnn::Rng rng(9);
    auto [g, labels] = sbm_generate(10, 2, 0.7, 0.3, 17);
    Permutation p = Permutation::random(10, rng);
    Graph pg = permute_graph(g, p);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(10);
    std::vector<double> d0, d1;
    Eigen::VectorXd deg0 = g.gso.apply(ones), deg1 = pg.gso.apply(ones);
    for (int i = 0; i < 10; ++i) {
      d0.push_back(deg0[i]);
      d1.push_back(deg1[i]);
    }
    std::sort(d0.begin(), d0.end());
    std::sort(d1.begin(), d1.end());
    REQUIRE(d0 == d1);
  }
  SECTION("permuting then inverting restores graph and signal exactly") {
    gtcnn::Rng rng(13);
    auto [g, labels] = sbm_generate(8, 2, 0.6, 0.2, 3);
    Permutation p = Permutation::random(8, rng);
    Eigen::VectorXd x = testutil::random_vector(8, rng);
    Graph round = permute_graph(permute_graph(g, p), p.inverse());
    REQUIRE((round.gso.to_dense() - g.gso.to_dense()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((permute_signal(permute_signal(x, p), p.inverse()) - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("spectrum is invariant under permutation") {
    gtcnn::Rng rng(21);
    auto [g, labels] = sbm_generate(12, 3, 0.7, 0.2, 19);
    Permutation p = Permutation::random(12, rng);
    Eigen::VectorXd e0 = sym_eig(g.gso).eigenvalues;
    Eigen::VectorXd e1 = sym_eig(permute_graph(g, p).gso).eigenvalues;
    REQUIRE((e0 - e1).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SECTION("size mismatches and non-bijections are rejected") {
    auto [g, labels] = sbm_generate(5, 1, 0.5, 0.5, 1);
    REQUIRE_THROWS_AS(permute_graph(g, Permutation::identity(4)), ParameterError);
    REQUIRE_THROWS_AS(Permutation({0, 0, 2}), ParameterError);
  }
}
