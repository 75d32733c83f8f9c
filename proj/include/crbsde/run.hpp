#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "crbsde/config.hpp"

namespace crbsde {

struct RunOptions {
  std::uint64_t seed = 0;   ///< nonzero overrides the config's tree seed
  std::string out_dir;      ///< empty: no files, report only
  int threads = 1;          ///< accepted for interface stability; runs are serial
  bool check = false;       ///< run brute-force oracles when the instance is small
};

struct RunReport {
  nlohmann::ordered_json report;   ///< stable except for wall_clock_ms
  std::vector<std::string> files;  ///< paths written under out_dir
};

/// Builds the requested instance, dispatches to the matching solver or
/// audit, writes CSV/JSON artifacts and returns the report. Errors surface
/// as the library's error types; the CLI maps them to exit codes.
RunReport run(const ScenarioConfig& cfg, const RunOptions& opt = {});

/// Verbosity from the CRBSDE_LOG environment variable: 0 quiet (default),
/// 1 info, 2 debug.
int log_level();
void log_info(const std::string& line);

}  // namespace crbsde
