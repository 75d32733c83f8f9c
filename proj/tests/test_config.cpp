#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crbsde/config.hpp"
#include "crbsde/scenario_io.hpp"

using namespace crbsde;

namespace {

const char* kMinimalSolve = R"({
  "mode": "solve",
  "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
  "subfiltration": {"kind": "trivial"},
  "terminal": "0",
  "driver": {"expr": "0", "lambda": 0.0},
  "lower": "-1",
  "upper": "1"
})";

}  // namespace

TEST_CASE("minimal solve config parses") {
  const ScenarioConfig c = parse_config(kMinimalSolve);
  CHECK(c.mode == "solve");
  CHECK(c.tree.kind == "binary");
  CHECK(c.tree.steps == 2);
  CHECK(c.filt.kind == "trivial");
  CHECK(c.solver.method == "picard");
}

TEST_CASE("schema errors name the offending field") {
  // missing obstacle
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "mode": "solve",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "trivial"},
    "terminal": "0",
    "driver": {"expr": "0", "lambda": 0.0},
    "lower": "-1"
  })"),
                       doctest::Contains("\"upper\""), config_error);
  // unknown key with its path
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "mode": "solve",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0, "bogus": 1},
    "subfiltration": {"kind": "trivial"},
    "terminal": "0",
    "driver": {"expr": "0", "lambda": 0.0},
    "lower": "-1",
    "upper": "1"
  })"),
                       doctest::Contains("$.tree"), config_error);
  // expression error names the position
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "mode": "solve",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "trivial"},
    "terminal": "1 +",
    "driver": {"expr": "0", "lambda": 0.0},
    "lower": "-1",
    "upper": "1"
  })"),
                       doctest::Contains("position"), config_error);
  // y is not allowed in obstacle slots
  CHECK_THROWS_WITH_AS(parse_config(R"({
    "mode": "solve",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "trivial"},
    "terminal": "0",
    "driver": {"expr": "0", "lambda": 0.0},
    "lower": "y",
    "upper": "1"
  })"),
                       doctest::Contains("y/z"), config_error);
  CHECK_THROWS_AS(parse_config("not json"), config_error);
  CHECK_THROWS_AS(parse_config(R"({"mode": "fly"})"), config_error);
}

TEST_CASE("round trip through emit_config") {
  auto roundtrip = [](const std::string& text) {
    const ScenarioConfig c = parse_config(text);
    const std::string emitted = emit_config(c).dump();
    const ScenarioConfig c2 = parse_config(emitted);
    CHECK(emit_config(c2).dump() == emitted);
  };
  roundtrip(kMinimalSolve);
  roundtrip(R"({
    "mode": "skorokhod",
    "path": [0.5, -0.25, 1.5],
    "lower": [0, 0, 0],
    "upper": [1, 1, 1]
  })");
  roundtrip(R"({
    "mode": "switch",
    "tree": {"kind": "random-binary", "steps": 3, "horizon": 2.0, "seed": 9},
    "subfiltration": {"kind": "delayed", "delay": 2},
    "psi_open": "1",
    "psi_closed": "0",
    "stop_cost": "0.3",
    "start_cost": "0.2 + t"
  })");
  roundtrip(R"({
    "mode": "compare",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "full"},
    "a": "0.5",
    "b": "0",
    "first": {"terminal": "1", "c": "0", "lower": "-2", "upper": "2"},
    "second": {"terminal": "0", "c": "0", "lower": "-2", "upper": "2"}
  })");
  roundtrip(R"({
    "mode": "penalize-sweep",
    "tree": {"kind": "binary", "steps": 3, "horizon": 1.0},
    "subfiltration": {"kind": "trivial"},
    "terminal": "0",
    "driver": {"expr": "1", "lambda": 0.0},
    "lower": "-0.2",
    "upper": "0.2",
    "penalty_grid": {"min_exp": 2, "max_exp": 6, "scale_by_inv_dt": true}
  })");
  roundtrip(R"({
    "mode": "saddle",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "trivial"},
    "a": "0.25",
    "b": "0",
    "c": "1",
    "terminal": "0",
    "lower": "-0.2",
    "upper": "0.2",
    "from_level": 0
  })");
  roundtrip(R"({
    "mode": "dynkin",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "full"},
    "reward_lower": "-1",
    "reward_upper": "1"
  })");
  roundtrip(R"({
    "mode": "gen",
    "tree": {"kind": "binary", "steps": 2, "horizon": 1.0},
    "subfiltration": {"kind": "custom", "atoms": [[0],[0,0],[0,0,1,1]]}
  })");
}

TEST_CASE("scenario files round trip") {
  const ScenarioTree tree = ScenarioTree::random_binary(3, 1.5, 77);
  const SubFiltration filt = SubFiltration::delayed(tree, 1);
  const Scenario sc{tree, filt};
  const std::string text = write_scenario(sc);
  const Scenario back = read_scenario(text);
  CHECK(back.tree.num_steps() == 3);
  CHECK(back.tree.horizon() == 1.5);
  for (int k = 0; k <= 3; ++k) {
    CHECK((back.tree.level(k).branch_prob - tree.level(k).branch_prob)
              .abs()
              .maxCoeff() == 0.0);
    CHECK((back.tree.level(k).branch_db - tree.level(k).branch_db)
              .abs()
              .maxCoeff() == 0.0);
    CHECK(back.filt.atom_count(k) == filt.atom_count(k));
    for (int i = 0; i < tree.node_count(k); ++i)
      CHECK(back.filt.atom_of(k, i) == filt.atom_of(k, i));
  }
  CHECK(write_scenario(back) == text);
  CHECK_THROWS_AS(read_scenario("{}"), config_error);
  CHECK_THROWS_AS(read_scenario("no"), config_error);
}
