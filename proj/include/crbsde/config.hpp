#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "crbsde/errors.hpp"
#include "crbsde/expression.hpp"

namespace crbsde {

struct TreeSpec {
  std::string kind = "binary";  // binary | chain | random-binary | file
  int steps = 1;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::string path;  // for kind == file
};

struct FiltSpec {
  std::string kind = "full";  // full | trivial | delayed | custom | from-file
  int delay = 1;
  std::vector<std::vector<int>> atoms;  // for kind == custom
};

struct SolverSpec {
  std::string method = "picard";  // constant | picard | penalized
  double penalty = 64.0;          // for method == penalized
};

struct PenaltyGridSpec {
  int min_exp = 4;
  int max_exp = 12;
  bool scale_by_inv_dt = true;
};

struct LinearBlock {
  std::string terminal;
  std::string c;
  std::string lower;
  std::string upper;
};

/// Parsed and validated run configuration. Expressions are re-parsed at
/// build time; this struct stores their canonical text.
struct ScenarioConfig {
  int format_version = 1;
  std::string mode;  // solve | dynkin | skorokhod | switch | compare | saddle |
                     // penalize-sweep | gen
  TreeSpec tree;
  FiltSpec filt;

  // solve / penalize-sweep / saddle
  std::string terminal, lower, upper;
  std::string driver_expr;
  double lipschitz = 0.0;
  SolverSpec solver;
  PenaltyGridSpec penalty_grid;

  // dynkin
  std::string reward_lower, reward_upper;

  // skorokhod
  std::vector<double> sk_path, sk_lower, sk_upper;

  // switch
  std::string psi_open, psi_closed, stop_cost, start_cost;

  // compare / saddle
  std::string lin_a, lin_b;
  LinearBlock first, second;
  int from_level = 0;
};

/// Strict parse: unknown keys anywhere are rejected with their JSON path,
/// missing keys are named, expressions are syntax-checked and restricted to
/// the variables their slot allows.
ScenarioConfig parse_config(const std::string& text);

/// Canonical JSON form; parse(emit(c)) reproduces c exactly.
nlohmann::ordered_json emit_config(const ScenarioConfig& c);

}  // namespace crbsde
