#include "crbsde/config.hpp"

#include <set>

namespace crbsde {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& required,
                const std::set<std::string>& optional) {
  if (!j.is_object())
    throw config_error("config error at " + path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!required.count(key) && !optional.count(key))
      throw config_error("config error at " + path + ": unknown key \"" + key + "\"");
  }
  for (const auto& key : required)
    if (!j.contains(key))
      throw config_error("config error at " + path + ": missing key \"" + key + "\"");
}

std::string get_string(const json& j, const std::string& path, const char* key) {
  if (!j[key].is_string())
    throw config_error("config error at " + path + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

double get_number(const json& j, const std::string& path, const char* key) {
  if (!j[key].is_number())
    throw config_error("config error at " + path + "." + key + ": expected a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& path, const char* key) {
  if (!j[key].is_number_integer())
    throw config_error("config error at " + path + "." + key + ": expected an integer");
  return j[key].get<int>();
}

// Expressions in process slots may read the grid time and the path state;
// only the driver may read y and z.
std::string checked_expr(const json& j, const std::string& path, const char* key,
                         bool allow_yz) {
  const std::string text = get_string(j, path, key);
  Expression e;
  try {
    e = Expression::parse(text);
  } catch (const config_error& err) {
    throw config_error("config error at " + path + "." + key + ": " + err.what());
  }
  if (!allow_yz && (e.uses_y() || e.uses_z()))
    throw config_error("config error at " + path + "." + key +
                       ": y/z are not available in this slot");
  return text;
}

std::vector<double> get_array(const json& j, const std::string& path,
                              const char* key) {
  if (!j[key].is_array())
    throw config_error("config error at " + path + "." + key +
                       ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number())
      throw config_error("config error at " + path + "." + key +
                         ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TreeSpec parse_tree(const json& j, const std::string& path) {
  TreeSpec t;
  check_keys(j, path, {"kind"}, {"steps", "horizon", "seed", "path"});
  t.kind = get_string(j, path, "kind");
  if (t.kind == "file") {
    check_keys(j, path, {"kind", "path"}, {});
    t.path = get_string(j, path, "path");
    return t;
  }
  if (t.kind != "binary" && t.kind != "chain" && t.kind != "random-binary")
    throw config_error("config error at " + path + ".kind: unknown tree kind \"" +
                       t.kind + "\"");
  check_keys(j, path, {"kind", "steps", "horizon"}, {"seed"});
  t.steps = get_int(j, path, "steps");
  t.horizon = get_number(j, path, "horizon");
  if (j.contains("seed")) t.seed = static_cast<std::uint64_t>(get_int(j, path, "seed"));
  return t;
}

FiltSpec parse_filt(const json& j, const std::string& path) {
  FiltSpec f;
  check_keys(j, path, {"kind"}, {"delay", "atoms"});
  f.kind = get_string(j, path, "kind");
  if (f.kind == "delayed") {
    check_keys(j, path, {"kind", "delay"}, {});
    f.delay = get_int(j, path, "delay");
  } else if (f.kind == "custom") {
    check_keys(j, path, {"kind", "atoms"}, {});
    if (!j["atoms"].is_array())
      throw config_error("config error at " + path + ".atoms: expected an array");
    for (const auto& lv : j["atoms"])
      f.atoms.push_back(lv.get<std::vector<int>>());
  } else if (f.kind != "full" && f.kind != "trivial" && f.kind != "from-file") {
    throw config_error("config error at " + path +
                       ".kind: unknown subfiltration kind \"" + f.kind + "\"");
  }
  return f;
}

LinearBlock parse_block(const json& j, const std::string& path) {
  LinearBlock b;
  check_keys(j, path, {"terminal", "c", "lower", "upper"}, {});
  b.terminal = checked_expr(j, path, "terminal", false);
  b.c = checked_expr(j, path, "c", false);
  b.lower = checked_expr(j, path, "lower", false);
  b.upper = checked_expr(j, path, "upper", false);
  return b;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config error: not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  if (!j.is_object() || !j.contains("mode"))
    throw config_error("config error at $: missing key \"mode\"");
  c.mode = get_string(j, "$", "mode");
  if (j.contains("format_version")) c.format_version = get_int(j, "$", "format_version");

  auto with = [](std::set<std::string> extra) {
    extra.insert("mode");
    return extra;
  };
  auto with_opt = [](std::set<std::string> extra) {
    extra.insert("format_version");
    return extra;
  };

  if (c.mode == "solve" || c.mode == "penalize-sweep") {
    check_keys(j, "$",
               with({"tree", "subfiltration", "terminal", "driver", "lower", "upper"}),
               c.mode == "penalize-sweep" ? with_opt({"solver", "penalty_grid"})
                                          : with_opt({"solver"}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
    c.terminal = checked_expr(j, "$", "terminal", false);
    c.lower = checked_expr(j, "$", "lower", false);
    c.upper = checked_expr(j, "$", "upper", false);
    check_keys(j["driver"], "$.driver", {"expr", "lambda"}, {});
    c.driver_expr = checked_expr(j["driver"], "$.driver", "expr", true);
    c.lipschitz = get_number(j["driver"], "$.driver", "lambda");
    if (j.contains("solver")) {
      check_keys(j["solver"], "$.solver", {"method"}, {"penalty"});
      c.solver.method = get_string(j["solver"], "$.solver", "method");
      if (c.solver.method != "constant" && c.solver.method != "picard" &&
          c.solver.method != "penalized")
        throw config_error("config error at $.solver.method: unknown method \"" +
                           c.solver.method + "\"");
      if (j["solver"].contains("penalty"))
        c.solver.penalty = get_number(j["solver"], "$.solver", "penalty");
    }
    if (j.contains("penalty_grid")) {
      const auto& g = j["penalty_grid"];
      check_keys(g, "$.penalty_grid", {}, {"min_exp", "max_exp", "scale_by_inv_dt"});
      if (g.contains("min_exp")) c.penalty_grid.min_exp = get_int(g, "$.penalty_grid", "min_exp");
      if (g.contains("max_exp")) c.penalty_grid.max_exp = get_int(g, "$.penalty_grid", "max_exp");
      if (g.contains("scale_by_inv_dt")) {
        if (!g["scale_by_inv_dt"].is_boolean())
          throw config_error("config error at $.penalty_grid.scale_by_inv_dt: expected a boolean");
        c.penalty_grid.scale_by_inv_dt = g["scale_by_inv_dt"].get<bool>();
      }
    }
  } else if (c.mode == "dynkin") {
    check_keys(j, "$", with({"tree", "subfiltration", "reward_lower", "reward_upper"}),
               with_opt({}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
    c.reward_lower = checked_expr(j, "$", "reward_lower", false);
    c.reward_upper = checked_expr(j, "$", "reward_upper", false);
  } else if (c.mode == "skorokhod") {
    check_keys(j, "$", with({"path", "lower", "upper"}), with_opt({}));
    c.sk_path = get_array(j, "$", "path");
    c.sk_lower = get_array(j, "$", "lower");
    c.sk_upper = get_array(j, "$", "upper");
  } else if (c.mode == "switch") {
    check_keys(j, "$",
               with({"tree", "subfiltration", "psi_open", "psi_closed", "stop_cost",
                     "start_cost"}),
               with_opt({}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
    c.psi_open = checked_expr(j, "$", "psi_open", false);
    c.psi_closed = checked_expr(j, "$", "psi_closed", false);
    c.stop_cost = checked_expr(j, "$", "stop_cost", false);
    c.start_cost = checked_expr(j, "$", "start_cost", false);
  } else if (c.mode == "compare") {
    check_keys(j, "$", with({"tree", "subfiltration", "a", "b", "first", "second"}),
               with_opt({}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
    c.lin_a = checked_expr(j, "$", "a", false);
    c.lin_b = checked_expr(j, "$", "b", false);
    c.first = parse_block(j["first"], "$.first");
    c.second = parse_block(j["second"], "$.second");
  } else if (c.mode == "saddle") {
    check_keys(j, "$",
               with({"tree", "subfiltration", "a", "b", "c", "terminal", "lower",
                     "upper"}),
               with_opt({"from_level"}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
    c.lin_a = checked_expr(j, "$", "a", false);
    c.lin_b = checked_expr(j, "$", "b", false);
    c.driver_expr = checked_expr(j, "$", "c", false);
    c.terminal = checked_expr(j, "$", "terminal", false);
    c.lower = checked_expr(j, "$", "lower", false);
    c.upper = checked_expr(j, "$", "upper", false);
    if (j.contains("from_level")) c.from_level = get_int(j, "$", "from_level");
  } else if (c.mode == "gen") {
    check_keys(j, "$", with({"tree", "subfiltration"}), with_opt({}));
    c.tree = parse_tree(j["tree"], "$.tree");
    c.filt = parse_filt(j["subfiltration"], "$.subfiltration");
  } else {
    throw config_error("config error at $.mode: unknown mode \"" + c.mode + "\"");
  }
  return c;
}

namespace {

ordered_json emit_tree(const TreeSpec& t) {
  ordered_json j;
  j["kind"] = t.kind;
  if (t.kind == "file") {
    j["path"] = t.path;
    return j;
  }
  j["steps"] = t.steps;
  j["horizon"] = t.horizon;
  if (t.kind == "random-binary" || t.seed != 1)
    j["seed"] = static_cast<std::int64_t>(t.seed);
  return j;
}

ordered_json emit_filt(const FiltSpec& f) {
  ordered_json j;
  j["kind"] = f.kind;
  if (f.kind == "delayed") j["delay"] = f.delay;
  if (f.kind == "custom") j["atoms"] = f.atoms;
  return j;
}

}  // namespace

ordered_json emit_config(const ScenarioConfig& c) {
  ordered_json j;
  j["format_version"] = c.format_version;
  j["mode"] = c.mode;
  if (c.mode == "solve" || c.mode == "penalize-sweep") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
    j["terminal"] = c.terminal;
    j["driver"] = {{"expr", c.driver_expr}, {"lambda", c.lipschitz}};
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["solver"] = {{"method", c.solver.method}, {"penalty", c.solver.penalty}};
    if (c.mode == "penalize-sweep")
      j["penalty_grid"] = {{"min_exp", c.penalty_grid.min_exp},
                           {"max_exp", c.penalty_grid.max_exp},
                           {"scale_by_inv_dt", c.penalty_grid.scale_by_inv_dt}};
  } else if (c.mode == "dynkin") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
    j["reward_lower"] = c.reward_lower;
    j["reward_upper"] = c.reward_upper;
  } else if (c.mode == "skorokhod") {
    j["path"] = c.sk_path;
    j["lower"] = c.sk_lower;
    j["upper"] = c.sk_upper;
  } else if (c.mode == "switch") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
    j["psi_open"] = c.psi_open;
    j["psi_closed"] = c.psi_closed;
    j["stop_cost"] = c.stop_cost;
    j["start_cost"] = c.start_cost;
  } else if (c.mode == "compare") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
    j["a"] = c.lin_a;
    j["b"] = c.lin_b;
    auto block = [](const LinearBlock& b) {
      return ordered_json{{"terminal", b.terminal},
                          {"c", b.c},
                          {"lower", b.lower},
                          {"upper", b.upper}};
    };
    j["first"] = block(c.first);
    j["second"] = block(c.second);
  } else if (c.mode == "saddle") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
    j["a"] = c.lin_a;
    j["b"] = c.lin_b;
    j["c"] = c.driver_expr;
    j["terminal"] = c.terminal;
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["from_level"] = c.from_level;
  } else if (c.mode == "gen") {
    j["tree"] = emit_tree(c.tree);
    j["subfiltration"] = emit_filt(c.filt);
  }
  return j;
}

}  // namespace crbsde
