#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crbsde/dynkin.hpp"
#include "testutil.hpp"

using namespace crbsde;
using crbsde::testing::Rng;

namespace {

AdaptedProcess zero_g(const SubFiltration& g) {
  AdaptedProcess p;
  p.tag = Filt::G;
  p.levels.resize(g.num_levels());
  for (int k = 0; k < g.num_levels(); ++k) p.levels[k] = ArrayXd::Zero(g.atom_count(k));
  return p;
}

AdaptedProcess random_g(Rng& rng, const SubFiltration& g, double lo, double hi,
                        bool zero_terminal) {
  AdaptedProcess p = zero_g(g);
  for (int k = 0; k < g.num_levels(); ++k)
    p.levels[k] = testing::random_values(rng, g.atom_count(k), lo, hi);
  if (zero_terminal) p.levels.back().setZero();
  return p;
}

}  // namespace

TEST_CASE("snell envelope basics") {
  SUBCASE("nonincreasing deterministic profile is its own envelope") {
    const ScenarioTree t = ScenarioTree::binary(3, 1.0);
    const SubFiltration g = SubFiltration::trivial(t);
    AdaptedProcess phi = zero_g(g);
    const double vals[4] = {3.0, 2.0, 1.5, 0.0};
    for (int k = 0; k <= 3; ++k) phi.levels[k](0) = vals[k];
    const AdaptedProcess r = snell_envelope(t, g, phi);
    for (int k = 0; k <= 3; ++k) CHECK(r.levels[k](0) == doctest::Approx(vals[k]));
  }
  SUBCASE("zero reward gives zero envelope") {
    const ScenarioTree t = ScenarioTree::binary(2, 1.0);
    const SubFiltration g = SubFiltration::full(t);
    const AdaptedProcess r = snell_envelope(t, g, zero_g(g));
    for (const auto& lv : r.levels) CHECK(lv.abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("snell envelope equals the exhaustive optimal-stopping value") {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const ScenarioTree t = testing::random_tree(rng, 1, 3);
    const SubFiltration g = testing::random_filtration(rng, t);
    const AdaptedProcess phi = random_g(rng, g, -2, 2, false);
    const AdaptedProcess r = snell_envelope(t, g, phi);
    for (int from = 0; from <= t.num_steps(); ++from) {
      const auto taus = enumerate_stopping_times(t, g, from);
      ArrayXd best = ArrayXd::Constant(g.atom_count(from), -1e300);
      for (const auto& tau : taus) {
        const ArrayXd val =
            cond_expect_terminal(t, g, from, sample_at(t, g, phi, tau));
        best = best.max(val);
      }
      CHECK((r.levels[from] - best).abs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("snell envelope dominates and is a supermartingale") {
  Rng rng(22);
  for (int rep = 0; rep < 30; ++rep) {
    const ScenarioTree t = testing::random_tree(rng, 1, 4, false);
    const SubFiltration g = testing::random_filtration(rng, t);
    const AdaptedProcess phi = random_g(rng, g, -2, 2, false);
    const AdaptedProcess r = snell_envelope(t, g, phi);
    for (int k = 0; k <= t.num_steps(); ++k)
      CHECK((r.levels[k] - phi.levels[k]).minCoeff() >= -1e-12);
    for (int k = 0; k < t.num_steps(); ++k) {
      const ArrayXd cont = cond_expect_atom(g, k + 1, r.levels[k + 1]);
      CHECK((r.levels[k] - cont).minCoeff() >= -1e-12);
    }
  }
}

TEST_CASE("coupled families") {
  SUBCASE("rewards sandwiching zero give the zero pair") {
    Rng rng(23);
    const ScenarioTree t = ScenarioTree::binary(3, 1.0);
    const SubFiltration g = SubFiltration::delayed(t, 1);
    RewardPair rw;
    rw.lower = random_g(rng, g, -2, -0.1, true);
    rw.upper = random_g(rng, g, 0.1, 2, true);
    const SnellPair pair = coupled_families(t, g, rw);
    for (const auto& lv : pair.up.levels) CHECK(lv.abs().maxCoeff() == 0.0);
    for (const auto& lv : pair.down.levels) CHECK(lv.abs().maxCoeff() == 0.0);
  }
  SUBCASE("forced stop value on a one-step instance") {
    // equal rewards 0.3 pre-terminal: the pair is (0.3, 0) and the value 0.3
    const ScenarioTree t = ScenarioTree::binary(1, 1.0);
    const SubFiltration g = SubFiltration::full(t);
    RewardPair rw;
    rw.lower = zero_g(g);
    rw.upper = zero_g(g);
    rw.lower.levels[0](0) = 0.3;
    rw.upper.levels[0](0) = 0.3;
    const SnellPair pair = coupled_families(t, g, rw);
    CHECK(pair.up.levels[0](0) == doctest::Approx(0.3));
    CHECK(pair.down.levels[0](0) == doctest::Approx(0.0));
    const ValueProfile v = game_value_recursive(t, g, rw);
    CHECK(v.value.levels[0](0) == doctest::Approx(0.3));
  }
  SUBCASE("random pairs are nonnegative supermartingales; adding a constant dominates") {
    Rng rng(24);
    for (int rep = 0; rep < 20; ++rep) {
      const ScenarioTree t = testing::random_tree(rng, 1, 3);
      const SubFiltration g = testing::random_filtration(rng, t);
      RewardPair rw;
      rw.lower = random_g(rng, g, -1.5, 0.7, true);
      rw.upper = rw.lower;
      for (int k = 0; k < g.num_levels() - 1; ++k)
        rw.upper.levels[k] += testing::random_values(rng, g.atom_count(k), 0.05, 1.5);
      const SnellPair pair = coupled_families(t, g, rw);
      for (int k = 0; k <= t.num_steps(); ++k) {
        CHECK(pair.up.levels[k].minCoeff() >= -1e-12);
        CHECK(pair.down.levels[k].minCoeff() >= -1e-12);
        if (k < t.num_steps()) {
          CHECK((pair.up.levels[k] -
                 cond_expect_atom(g, k + 1, pair.up.levels[k + 1])).minCoeff() >= -1e-12);
          CHECK((pair.down.levels[k] -
                 cond_expect_atom(g, k + 1, pair.down.levels[k + 1])).minCoeff() >= -1e-12);
        }
        // sandwich of the difference
        const ArrayXd y = pair.up.levels[k] - pair.down.levels[k];
        CHECK((y - rw.lower.levels[k]).minCoeff() >= -1e-10);
        CHECK((rw.upper.levels[k] - y).minCoeff() >= -1e-10);
      }
      // minimality: the same iteration started well above the data also
      // settles on a coupled pair, and it dominates the one from zero
      AdaptedProcess up_hi = pair.up, down_hi = pair.down;
      for (int k = 0; k <= t.num_steps(); ++k) {
        up_hi.levels[k].setConstant(5.0);
        down_hi.levels[k].setConstant(5.0);
      }
      for (int sweep = 0; sweep < 10 * (t.num_steps() + 1) + 32; ++sweep) {
        AdaptedProcess up_arg = down_hi, down_arg = up_hi;
        for (int k = 0; k <= t.num_steps(); ++k) {
          up_arg.levels[k] += rw.lower.levels[k];
          down_arg.levels[k] -= rw.upper.levels[k];
        }
        up_hi = snell_envelope(t, g, up_arg);
        down_hi = snell_envelope(t, g, down_arg);
      }
      for (int k = 0; k <= t.num_steps(); ++k) {
        CHECK((up_hi.levels[k] - pair.up.levels[k]).minCoeff() >= -1e-10);
        CHECK((down_hi.levels[k] - pair.down.levels[k]).minCoeff() >= -1e-10);
      }
    }
  }
  SUBCASE("crossed rewards admit no integrable pair and hit the cap") {
    const ScenarioTree t = ScenarioTree::binary(1, 1.0);
    const SubFiltration g = SubFiltration::trivial(t);
    RewardPair rw;
    rw.lower = zero_g(g);
    rw.upper = zero_g(g);
    rw.lower.levels[0](0) = 0.3;
    rw.upper.levels[0](0) = 0.2;
    CHECK_THROWS_AS(coupled_families(t, g, rw), cap_error);
  }
}

TEST_CASE("driverless band game has value zero") {
  const ScenarioTree t = ScenarioTree::binary(3, 1.0);
  const SubFiltration g = SubFiltration::delayed(t, 2);
  RewardPair rw;
  rw.lower = zero_g(g);
  rw.upper = zero_g(g);
  for (int k = 0; k < 3; ++k) {
    rw.lower.levels[k].setConstant(-1.0);
    rw.upper.levels[k].setConstant(1.0);
  }
  const ValueProfile v = game_value_recursive(t, g, rw);
  for (const auto& lv : v.value.levels) CHECK(lv.abs().maxCoeff() == 0.0);
}

TEST_CASE("crossed one-step rewards: tie conventions give different fair values") {
  // One step, trivial information, lower reward 0.3 and upper reward 0.2 at
  // time 0, zero terminals. Exhausting the four stopping pairs by hand:
  // under the tie-to-maximizer criterion the table is
  //   (tau=0, any sigma) -> 0.3,  (1,0) -> 0.2,  (1,1) -> 0
  // so both game values are 0.3; handing ties to the minimizer flips the
  // diagonal to 0.2 and both values become 0.2.
  const ScenarioTree t = ScenarioTree::binary(1, 1.0);
  const SubFiltration g = SubFiltration::trivial(t);
  RewardPair rw;
  rw.lower = zero_g(g);
  rw.upper = zero_g(g);
  rw.lower.levels[0](0) = 0.3;
  rw.upper.levels[0](0) = 0.2;

  const ValueProfile rec_lo = game_value_recursive(t, g, rw, GameTie::lower);
  const ValueProfile bf_lo = game_value_bruteforce(t, g, rw, GameTie::lower);
  CHECK(rec_lo.value.levels[0](0) == doctest::Approx(0.3));
  CHECK(bf_lo.lower_value.levels[0](0) == doctest::Approx(0.3));
  CHECK(bf_lo.upper_value.levels[0](0) == doctest::Approx(0.3));

  const ValueProfile rec_up = game_value_recursive(t, g, rw, GameTie::upper);
  const ValueProfile bf_up = game_value_bruteforce(t, g, rw, GameTie::upper);
  CHECK(rec_up.value.levels[0](0) == doctest::Approx(0.2));
  CHECK(bf_up.lower_value.levels[0](0) == doctest::Approx(0.2));
  CHECK(bf_up.upper_value.levels[0](0) == doctest::Approx(0.2));
}

TEST_CASE("recursive value equals brute force and the game is fair") {
  Rng rng(25);
  for (int rep = 0; rep < 40; ++rep) {
    const ScenarioTree t = testing::random_tree(rng, 1, 3);
    const SubFiltration g = testing::random_filtration(rng, t);
    RewardPair rw;
    rw.lower = random_g(rng, g, -2, 2, true);  // may cross
    rw.upper = random_g(rng, g, -2, 2, true);
    const GameTie tie = rep % 2 == 0 ? GameTie::lower : GameTie::upper;
    ValueProfile rec;
    bool sandwiched = true;
    for (int k = 0; k < g.num_levels(); ++k)
      sandwiched = sandwiched && (rw.lower.levels[k] <= rw.upper.levels[k]).all();
    rec = game_value_recursive(t, g, rw, tie);
    const ValueProfile bf = game_value_bruteforce(t, g, rw, tie);
    CHECK(bf.gap <= 1e-10);  // fairness on finite trees
    for (int k = 0; k <= t.num_steps(); ++k) {
      CHECK((bf.upper_value.levels[k] - bf.lower_value.levels[k]).minCoeff() >=
            -1e-12);
      CHECK((rec.value.levels[k] - bf.lower_value.levels[k]).abs().maxCoeff() <=
            1e-10);
    }
  }
}

TEST_CASE("single stopping time from the terminal level") {
  Rng rng(26);
  const ScenarioTree t = ScenarioTree::binary(2, 1.0);
  const SubFiltration g = SubFiltration::full(t);
  RewardPair rw;
  rw.lower = random_g(rng, g, -1, 1, true);
  rw.upper = rw.lower;
  const ValueProfile bf = game_value_bruteforce(t, g, rw);
  CHECK(bf.lower_value.levels[2].abs().maxCoeff() == 0.0);
  CHECK(bf.upper_value.levels[2].abs().maxCoeff() == 0.0);
}

TEST_CASE("reward shift") {
  SUBCASE("zero terminal is the identity") {
    Rng rng(27);
    const ScenarioTree t = ScenarioTree::binary(2, 1.0);
    const SubFiltration g = SubFiltration::delayed(t, 1);
    const AdaptedProcess xi = random_g(rng, g, -1, 1, true);
    const AdaptedProcess zeta = random_g(rng, g, -1, 1, true);
    const ShiftedRewards sr = reward_shift(t, g, xi, zeta);
    for (int k = 0; k <= 2; ++k) {
      CHECK((sr.rewards.lower.levels[k] - xi.levels[k]).abs().maxCoeff() == 0.0);
      CHECK(sr.shift.levels[k].abs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("constant terminal shifts rewards and values by the constant") {
    Rng rng(28);
    const ScenarioTree t = ScenarioTree::binary(2, 1.0);
    const SubFiltration g = SubFiltration::full(t);
    AdaptedProcess xi = random_g(rng, g, -1, 1, false);
    AdaptedProcess zeta = xi;
    for (int k = 0; k < 2; ++k)
      zeta.levels[k] += testing::random_values(rng, g.atom_count(k), 0.1, 1.0);
    xi.levels[2].setConstant(0.37);
    zeta.levels[2] = xi.levels[2];
    const ShiftedRewards sr = reward_shift(t, g, xi, zeta);
    for (int k = 0; k <= 2; ++k)
      CHECK((sr.shift.levels[k] - 0.37).abs().maxCoeff() <= 1e-14);
    CHECK(sr.rewards.lower.levels[2].abs().maxCoeff() == 0.0);
  }
  SUBCASE("unequal terminals are rejected") {
    Rng rng(29);
    const ScenarioTree t = ScenarioTree::binary(1, 1.0);
    const SubFiltration g = SubFiltration::full(t);
    AdaptedProcess xi = random_g(rng, g, -1, 1, false);
    AdaptedProcess zeta = xi;
    zeta.levels[1](0) += 1.0;
    CHECK_THROWS_AS(reward_shift(t, g, xi, zeta), precondition_error);
  }
  SUBCASE("game value identity under shifting") {
    Rng rng(30);
    for (int rep = 0; rep < 20; ++rep) {
      const ScenarioTree t = testing::random_tree(rng, 1, 3);
      const SubFiltration g = testing::random_filtration(rng, t);
      AdaptedProcess xi = random_g(rng, g, -1, 1, false);
      AdaptedProcess zeta = xi;
      for (int k = 0; k < g.num_levels() - 1; ++k)
        zeta.levels[k] += testing::random_values(rng, g.atom_count(k), 0.0, 1.0);
      zeta.levels.back() = xi.levels.back();
      const ShiftedRewards sr = reward_shift(t, g, xi, zeta);
      const ValueProfile shifted = game_value_recursive(t, g, sr.rewards);
      // value(original rewards) must equal value(shifted) + shift; the
      // original game is evaluated by brute force on the raw criterion
      const auto taus = enumerate_stopping_times(t, g, 0);
      double best = -1e300;
      for (const auto& tau : taus) {
        double worst = 1e300;
        for (const auto& sig : taus) {
          ArrayXd leafval = ArrayXd::Zero(t.leaf_count());
          for (int leaf = 0; leaf < t.leaf_count(); ++leaf) {
            const int ta = tau.level_of_leaf[leaf], ts = sig.level_of_leaf[leaf];
            if (ta <= ts)
              leafval(leaf) = xi.levels[ta](g.atom_of(ta, t.ancestor(leaf, ta)));
            else
              leafval(leaf) = zeta.levels[ts](g.atom_of(ts, t.ancestor(leaf, ts)));
          }
          worst = std::min(worst, expect(t, t.num_steps(), leafval));
        }
        best = std::max(best, worst);
      }
      CHECK(std::abs(best - (shifted.value.levels[0](0) + sr.shift.levels[0](0))) <=
            1e-12);
    }
  }
}
