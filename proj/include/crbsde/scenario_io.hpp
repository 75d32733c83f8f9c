#pragma once

#include <json.hpp>
#include <string>

#include "crbsde/filtration.hpp"
#include "crbsde/tree.hpp"

namespace crbsde {

/// A tree plus its subfiltration, the unit the scenario files carry.
struct Scenario {
  ScenarioTree tree;
  SubFiltration filt;
};

/// JSON scenario format: per level the parent links, branch probabilities,
/// increments and atom labels. Round-trips exactly (doubles are emitted in
/// shortest-round-trip form).
nlohmann::ordered_json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

std::string write_scenario(const Scenario& s);
Scenario read_scenario(const std::string& text);

}  // namespace crbsde
