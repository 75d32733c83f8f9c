#include "crbsde/scenario_io.hpp"

namespace crbsde {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json out;
  out["format"] = "crbsde-scenario";
  out["format_version"] = 1;
  out["horizon"] = s.tree.horizon();
  ordered_json levels = ordered_json::array();
  for (int k = 0; k <= s.tree.num_steps(); ++k) {
    const TreeLevel& lv = s.tree.level(k);
    ordered_json jl;
    jl["parent"] = lv.parent;
    std::vector<double> prob(lv.branch_prob.data(),
                             lv.branch_prob.data() + lv.count());
    std::vector<double> db(lv.branch_db.data(), lv.branch_db.data() + lv.count());
    jl["prob"] = prob;
    jl["db"] = db;
    std::vector<int> atoms(lv.count());
    for (int i = 0; i < lv.count(); ++i) atoms[i] = s.filt.atom_of(k, i);
    jl["atom"] = atoms;
    levels.push_back(std::move(jl));
  }
  out["levels"] = std::move(levels);
  return out;
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object() || !j.contains("levels") || !j["levels"].is_array())
    throw config_error("scenario: missing levels array");
  if (j.value("format", "") != std::string("crbsde-scenario"))
    throw config_error("scenario: unknown format tag");
  const double horizon = j.value("horizon", 0.0);
  std::vector<std::vector<int>> parents, atoms;
  std::vector<std::vector<double>> probs, dbs;
  for (const auto& jl : j["levels"]) {
    if (!jl.contains("parent") || !jl.contains("prob") || !jl.contains("db") ||
        !jl.contains("atom"))
      throw config_error("scenario: level entry missing parent/prob/db/atom");
    parents.push_back(jl["parent"].get<std::vector<int>>());
    probs.push_back(jl["prob"].get<std::vector<double>>());
    dbs.push_back(jl["db"].get<std::vector<double>>());
    atoms.push_back(jl["atom"].get<std::vector<int>>());
  }
  ScenarioTree tree(horizon, std::move(parents), std::move(probs), std::move(dbs));
  SubFiltration filt(tree, std::move(atoms));
  return Scenario{std::move(tree), std::move(filt)};
}

std::string write_scenario(const Scenario& s) { return scenario_to_json(s).dump(2); }

Scenario read_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("scenario: bad JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace crbsde
