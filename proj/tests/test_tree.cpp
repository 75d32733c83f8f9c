#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crbsde/tree.hpp"
#include "testutil.hpp"

using namespace crbsde;
using crbsde::testing::Rng;

TEST_CASE("binary tree structure and martingale labels") {
  const ScenarioTree t = ScenarioTree::binary(3, 1.0);
  CHECK(t.num_steps() == 3);
  CHECK(t.leaf_count() == 8);
  CHECK(t.dt() == doctest::Approx(1.0 / 3.0));
  CHECK(t.is_binary());
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < t.node_count(k); ++i) {
      auto [b, e] = t.children(k, i);
      double p = 0, drift = 0, quad = 0;
      for (int c = b; c < e; ++c) {
        p += t.level(k + 1).branch_prob(c);
        drift += t.level(k + 1).branch_prob(c) * t.level(k + 1).branch_db(c);
        quad += t.level(k + 1).branch_prob(c) * t.level(k + 1).branch_db(c) *
                t.level(k + 1).branch_db(c);
      }
      CHECK(p == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::abs(drift) < 1e-14);
      CHECK(quad == doctest::Approx(t.dt()).epsilon(1e-14));
    }
  // path probabilities on a level sum to one
  CHECK(t.level(3).path_prob.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("malformed trees are rejected") {
  CHECK_THROWS_AS(ScenarioTree(1.0, {{-1}, {0, 0}}, {{1.0}, {0.6, 0.6}},
                               {{0.0}, {1.0, -1.0}}),
                  config_error);
  CHECK_THROWS_AS(ScenarioTree(1.0, {{-1}, {0, 0}}, {{1.0}, {0.5, 0.5}},
                               {{0.0}, {1.0, -0.5}}),
                  config_error);
  CHECK_THROWS_AS(ScenarioTree::binary(0, 1.0), config_error);
}

TEST_CASE("cond_expect_F symmetric average and constants") {
  const ScenarioTree t = ScenarioTree::binary(1, 1.0);
  ArrayXd x(2);
  x << 1.0, 3.0;
  const ArrayXd e = cond_expect_F(t, 1, x);
  CHECK(e(0) == doctest::Approx(2.0));

  const ScenarioTree t3 = ScenarioTree::random_mary(3, 1.0, 7);
  ArrayXd c = ArrayXd::Constant(t3.node_count(3), 0.37);
  ArrayXd cur = c;
  for (int k = 3; k >= 1; --k) {
    cur = cond_expect_F(t3, k, cur);
    CHECK((cur - 0.37).abs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(cond_expect_F(t3, 0, cur), error);
  CHECK_THROWS_AS(cond_expect_F(t3, 4, c), error);
}

TEST_CASE("nested cond_expect_F equals direct path-measure summation") {
  // Independent oracle: at any node, the iterated one-step expectation of a
  // terminal payoff equals the leaf-probability-weighted average over the
  // node's subtree.
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const ScenarioTree t = testing::random_tree(rng, 3, 3, /*binary_only=*/false);
    const ArrayXd x = testing::random_values(rng, t.leaf_count(), -5, 5);
    ArrayXd nested = x;
    for (int k = 3; k >= 1; --k) nested = cond_expect_F(t, k, nested);
    for (int leaf = 0; leaf < t.leaf_count(); ++leaf) {
      // oracle: group leaves by root child... root subtree = all leaves
      (void)leaf;
    }
    double direct = 0.0;
    for (int leaf = 0; leaf < t.leaf_count(); ++leaf)
      direct += t.level(3).path_prob(leaf) * x(leaf);
    CHECK(std::abs(nested(0) - direct) <= 1e-12);

    // and at level 1 nodes: conditional on the node, weights renormalize
    ArrayXd nested1 = x;
    for (int k = 3; k >= 2; --k) nested1 = cond_expect_F(t, k, nested1);
    for (int i = 0; i < t.node_count(1); ++i) {
      double num = 0.0, den = 0.0;
      for (int leaf = 0; leaf < t.leaf_count(); ++leaf) {
        if (t.ancestor(leaf, 1) != i) continue;
        num += t.level(3).path_prob(leaf) * x(leaf);
        den += t.level(3).path_prob(leaf);
      }
      CHECK(std::abs(nested1(i) - num / den) <= 1e-12);
    }
  }
}

TEST_CASE("martingale_coeff on binary trees") {
  const ScenarioTree t = ScenarioTree::binary(2, 1.0);
  const double s = std::sqrt(t.dt());

  SUBCASE("constants have null integrand") {
    ArrayXd x = ArrayXd::Constant(4, 3.25);
    CHECK(martingale_coeff(t, 2, x).abs().maxCoeff() == 0.0);
  }
  SUBCASE("the increment itself has unit coefficient") {
    ArrayXd x(2);
    x << s, -s;
    const ArrayXd z = martingale_coeff(t, 1, x);
    CHECK(z(0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("random values are reconstructed exactly") {
    Rng rng(33);
    for (int rep = 0; rep < 50; ++rep) {
      const ScenarioTree tr = testing::random_tree(rng, 1, 4);
      const int N = tr.num_steps();
      const ArrayXd x = testing::random_values(rng, tr.node_count(N), -4, 4);
      const ArrayXd z = martingale_coeff(tr, N, x);
      const ArrayXd m = cond_expect_F(tr, N, x);
      for (int i = 0; i < tr.node_count(N - 1); ++i) {
        auto [b, e] = tr.children(N - 1, i);
        for (int c = b; c < e; ++c)
          CHECK(std::abs(x(c) - m(i) - z(i) * tr.level(N).branch_db(c)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("martingale_coeff rejects non-representable m-ary values") {
  // Three branches cannot carry an arbitrary vector in a 1-d representation.
  Rng rng(5);
  bool rejected = false;
  for (int rep = 0; rep < 20 && !rejected; ++rep) {
    const ScenarioTree t = ScenarioTree::random_mary(1, 1.0, rng.raw());
    if (t.node_count(1) < 3) continue;
    const ArrayXd x = testing::random_values(rng, t.node_count(1), -2, 2);
    try {
      martingale_coeff(t, 1, x);
    } catch (const numerical_error&) {
      rejected = true;
    }
  }
  CHECK(rejected);
}

TEST_CASE("chain tree carries deterministic data") {
  const ScenarioTree t = ScenarioTree::chain(10, 2.0);
  CHECK(t.leaf_count() == 1);
  ArrayXd x(1);
  x << 1.5;
  CHECK(cond_expect_F(t, 10, x)(0) == 1.5);
  CHECK(martingale_coeff(t, 10, x)(0) == 0.0);
}
