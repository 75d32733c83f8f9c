// Command-line front end: one subcommand per workflow, JSON configs in,
// CSV tables and a JSON report out.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "crbsde/run.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool check = false;
};

int dispatch(const std::string& mode, const Cli& cli) {
  std::ifstream in(cli.config_path);
  if (!in) {
    std::cerr << "error: cannot read config " << cli.config_path << "\n";
    return 2;
  }
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  const crbsde::ScenarioConfig cfg = crbsde::parse_config(text);
  if (cfg.mode != mode)
    throw crbsde::config_error("config mode \"" + cfg.mode +
                               "\" does not match the subcommand \"" + mode + "\"");
  crbsde::RunOptions opt;
  opt.seed = cli.seed;
  opt.out_dir = cli.out_dir;
  opt.threads = cli.threads;
  opt.check = cli.check;
  const crbsde::RunReport rep = crbsde::run(cfg, opt);
  std::cout << rep.report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solver toolkit for doubly conditionally reflected backward "
               "equations on scenario trees"};
  app.require_subcommand(1);

  Cli cli;
  const std::vector<std::string> modes = {"solve",  "dynkin", "skorokhod",
                                          "switch", "compare", "saddle",
                                          "penalize-sweep", "gen"};
  for (const auto& mode : modes) {
    CLI::App* sub = app.add_subcommand(mode);
    sub->add_option("--config", cli.config_path, "path to the JSON config")
        ->required();
    sub->add_option("--seed", cli.seed, "override the config's generator seed");
    sub->add_option("--out", cli.out_dir, "directory for CSV/JSON artifacts");
    sub->add_option("--threads", cli.threads, "worker threads (runs are serial)");
    sub->add_flag("--check", cli.check,
                  "cross-check against brute-force oracles when feasible");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string mode = app.get_subcommands().front()->get_name();
  try {
    return dispatch(mode, cli);
  } catch (const crbsde::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crbsde::precondition_error& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 3;
  } catch (const crbsde::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const crbsde::cap_error& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
