#include "crbsde/run.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "crbsde/analysis.hpp"
#include "crbsde/dynkin.hpp"
#include "crbsde/scenario_io.hpp"
#include "crbsde/skorokhod.hpp"
#include "crbsde/solver.hpp"
#include "crbsde/switching.hpp"

namespace crbsde {

using nlohmann::ordered_json;

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("CRBSDE_LOG");
    if (!env) return 0;
    const std::string v(env);
    if (v == "debug" || v == "2") return 2;
    if (v == "info" || v == "1") return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& line) {
  if (log_level() >= 1) std::cerr << "[crbsde] " << line << "\n";
}

namespace {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot open " + tmp.string() + " for writing");
    out << content;
  }
  fs::rename(tmp, path);
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Emitter {
  const RunOptions& opt;
  RunReport& rep;

  void file(const std::string& name, const std::string& content) {
    if (opt.out_dir.empty()) return;
    const fs::path path = fs::path(opt.out_dir) / name;
    write_atomic(path, content);
    rep.files.push_back(path.string());
  }

  void process_csv(const std::string& name, const AdaptedProcess& p) {
    std::string body = "level,id,value\n";
    for (int k = 0; k < p.num_levels(); ++k)
      for (int i = 0; i < p.levels[k].size(); ++i)
        body += std::to_string(k) + "," + std::to_string(i) + "," +
                csv_number(p.levels[k](i)) + "\n";
    file(name, body);
  }
};

struct Instance {
  std::unique_ptr<ScenarioTree> tree;
  std::unique_ptr<SubFiltration> filt;
};

Instance build_space(const ScenarioConfig& cfg, std::uint64_t seed_override) {
  Instance inst;
  const TreeSpec& t = cfg.tree;
  if (t.kind == "file") {
    std::ifstream in(t.path);
    if (!in) throw config_error("cannot read scenario file " + t.path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    Scenario sc = read_scenario(text);
    inst.tree = std::make_unique<ScenarioTree>(std::move(sc.tree));
    inst.filt = std::make_unique<SubFiltration>(std::move(sc.filt));
    return inst;
  }
  const std::uint64_t seed = seed_override ? seed_override : t.seed;
  if (t.kind == "binary")
    inst.tree = std::make_unique<ScenarioTree>(ScenarioTree::binary(t.steps, t.horizon));
  else if (t.kind == "chain")
    inst.tree = std::make_unique<ScenarioTree>(ScenarioTree::chain(t.steps, t.horizon));
  else
    inst.tree = std::make_unique<ScenarioTree>(
        ScenarioTree::random_binary(t.steps, t.horizon, seed));

  const FiltSpec& f = cfg.filt;
  if (f.kind == "full")
    inst.filt = std::make_unique<SubFiltration>(SubFiltration::full(*inst.tree));
  else if (f.kind == "trivial")
    inst.filt = std::make_unique<SubFiltration>(SubFiltration::trivial(*inst.tree));
  else if (f.kind == "delayed")
    inst.filt =
        std::make_unique<SubFiltration>(SubFiltration::delayed(*inst.tree, f.delay));
  else if (f.kind == "custom")
    inst.filt = std::make_unique<SubFiltration>(SubFiltration(*inst.tree, f.atoms));
  else
    throw config_error("subfiltration kind \"" + f.kind +
                       "\" requires a scenario file");
  return inst;
}

AdaptedProcess eval_process(const ScenarioTree& tree, const std::string& expr_text,
                            int up_to) {
  const Expression e = Expression::parse(expr_text);
  AdaptedProcess p = make_f_process(tree, up_to);
  for (int k = 0; k <= up_to; ++k) {
    const double t = tree.time_at(k);
    for (int i = 0; i < tree.node_count(k); ++i)
      p.levels[k](i) = e.eval(t, 0.0, 0.0, tree.level(k).cum_db(i));
  }
  return p;
}

ArrayXd eval_terminal(const ScenarioTree& tree, const std::string& expr_text) {
  const Expression e = Expression::parse(expr_text);
  const int N = tree.num_steps();
  ArrayXd xi(tree.leaf_count());
  for (int i = 0; i < tree.leaf_count(); ++i)
    xi(i) = e.eval(tree.horizon(), 0.0, 0.0, tree.level(N).cum_db(i));
  return xi;
}

Driver eval_driver(const ScenarioTree& tree, const std::string& expr_text,
                   double lipschitz) {
  const Expression e = Expression::parse(expr_text);
  Driver d;
  d.depends_on_yz = e.uses_y() || e.uses_z();
  d.lipschitz = lipschitz;
  d.f = [e, &tree](int level, int node, double y, double z) {
    return e.eval(tree.time_at(level), y, z, tree.level(level).cum_db(node));
  };
  return d;
}

ordered_json diagnostics_json(const SolveDiagnostics& d) {
  return ordered_json{{"dynamics_residual", d.dynamics_residual},
                      {"constraint_slack", d.constraint_slack},
                      {"flatoff_lower", d.flatoff_lower},
                      {"flatoff_upper", d.flatoff_upper},
                      {"k_min_increment", d.k_min_increment},
                      {"k_adapted", d.k_adapted},
                      {"pass", d.pass()}};
}

LinearDriver eval_linear(const ScenarioTree& tree, const std::string& a,
                         const std::string& b, const std::string& c) {
  LinearDriver ld;
  const int N = tree.num_steps();
  ld.a = eval_process(tree, a, N - 1);
  ld.b = eval_process(tree, b, N - 1);
  ld.c = eval_process(tree, c, N - 1);
  return ld;
}

void run_solve(const ScenarioConfig& cfg, const Instance& inst, Emitter& em,
               ordered_json& results) {
  DCRBSDEProblem p;
  p.tree = inst.tree.get();
  p.filt = inst.filt.get();
  const int N = inst.tree->num_steps();
  p.terminal = eval_terminal(*inst.tree, cfg.terminal);
  p.lower = eval_process(*inst.tree, cfg.lower, N);
  p.upper = eval_process(*inst.tree, cfg.upper, N);
  p.driver = eval_driver(*inst.tree, cfg.driver_expr, cfg.lipschitz);

  SolutionTriple s;
  if (cfg.solver.method == "constant") {
    s = solve_constant_driver(p);
  } else if (cfg.solver.method == "penalized") {
    s = solve_penalized(p, cfg.solver.penalty);
  } else {
    s = solve_picard(p);
  }
  results["iterations"] = s.iterations;
  results["diagnostics"] = diagnostics_json(s.diagnostics);
  results["y0"] = s.y.levels[0](0);
  const ArrayXd k_net = s.k_plus.levels[N] - s.k_minus.levels[N];
  results["k_plus_terminal_max"] = s.k_plus.levels[N].maxCoeff();
  results["k_minus_terminal_max"] = s.k_minus.levels[N].maxCoeff();
  results["k_net_terminal_max_abs"] = k_net.abs().maxCoeff();
  em.process_csv("y.csv", s.y);
  em.process_csv("z.csv", s.z);
  em.process_csv("k_plus.csv", s.k_plus);
  em.process_csv("k_minus.csv", s.k_minus);
}

void run_penalize_sweep(const ScenarioConfig& cfg, const Instance& inst, Emitter& em,
                        ordered_json& results) {
  DCRBSDEProblem p;
  p.tree = inst.tree.get();
  p.filt = inst.filt.get();
  const int N = inst.tree->num_steps();
  p.terminal = eval_terminal(*inst.tree, cfg.terminal);
  p.lower = eval_process(*inst.tree, cfg.lower, N);
  p.upper = eval_process(*inst.tree, cfg.upper, N);
  p.driver = eval_driver(*inst.tree, cfg.driver_expr, cfg.lipschitz);
  const auto grid = default_penalty_grid(p, cfg.penalty_grid.min_exp,
                                         cfg.penalty_grid.max_exp,
                                         cfg.penalty_grid.scale_by_inv_dt);
  const PenalizationReport rep = penalization_sweep(p, grid);
  std::string body = "n,violation,distance\n";
  for (size_t i = 0; i < rep.n.size(); ++i)
    body += csv_number(rep.n[i]) + "," + csv_number(rep.violation[i]) + "," +
            csv_number(rep.distance[i]) + "\n";
  em.file("sweep.csv", body);
  results["fitted_slope"] = rep.fitted_slope;
  results["all_feasible"] = rep.all_feasible;
  results["points"] = rep.n.size();
  results["final_distance"] = rep.distance.empty() ? 0.0 : rep.distance.back();
}

void run_dynkin(const ScenarioConfig& cfg, const Instance& inst, const RunOptions& opt,
                Emitter& em, ordered_json& results) {
  const ScenarioTree& tree = *inst.tree;
  const SubFiltration& filt = *inst.filt;
  const int N = tree.num_steps();
  RewardPair rw;
  const AdaptedProcess lo_nodes = eval_process(tree, cfg.reward_lower, N);
  const AdaptedProcess hi_nodes = eval_process(tree, cfg.reward_upper, N);
  rw.lower = project_to_atoms(tree, filt, lo_nodes);
  rw.upper = project_to_atoms(tree, filt, hi_nodes);
  rw.lower.levels[N].setZero();
  rw.upper.levels[N].setZero();
  const ValueProfile v = game_value_recursive(tree, filt, rw);
  em.process_csv("value.csv", v.value);
  results["value0"] = v.value.levels[0](0);
  if (opt.check) {
    // requested explicitly, so an oversized family propagates as a cap error
    const ValueProfile bf = game_value_bruteforce(tree, filt, rw);
    double gap = bf.gap;
    for (int k = 0; k <= N; ++k)
      gap = std::max(gap,
                     (bf.value.levels[k] - v.value.levels[k]).abs().maxCoeff());
    results["bruteforce_gap"] = gap;
  }
}

void run_skorokhod(const ScenarioConfig& cfg, Emitter& em, ordered_json& results) {
  const auto n = cfg.sk_path.size();
  ArrayXd x = Eigen::Map<const ArrayXd>(cfg.sk_path.data(), n);
  BarrierPair b;
  b.lower = Eigen::Map<const ArrayXd>(cfg.sk_lower.data(), cfg.sk_lower.size());
  b.upper = Eigen::Map<const ArrayXd>(cfg.sk_upper.data(), cfg.sk_upper.size());
  const ReflectedOutput r = two_sided_map(x, b);
  std::string body = "index,y,k_plus,k_minus\n";
  for (Eigen::Index i = 0; i < r.y.size(); ++i)
    body += std::to_string(i) + "," + csv_number(r.y(i)) + "," +
            csv_number(r.k_plus(i)) + "," + csv_number(r.k_minus(i)) + "\n";
  em.file("reflected.csv", body);
  results["k_plus_total"] = r.k_plus(r.k_plus.size() - 1);
  results["k_minus_total"] = r.k_minus(r.k_minus.size() - 1);
}

void run_switch(const ScenarioConfig& cfg, const Instance& inst, const RunOptions& opt,
                Emitter& em, ordered_json& results) {
  SwitchingProblem sp;
  sp.tree = inst.tree.get();
  sp.filt = inst.filt.get();
  const int N = inst.tree->num_steps();
  sp.psi_open = eval_process(*inst.tree, cfg.psi_open, N);
  sp.psi_closed = eval_process(*inst.tree, cfg.psi_closed, N);
  sp.stop_cost = eval_process(*inst.tree, cfg.stop_cost, N);
  sp.start_cost = eval_process(*inst.tree, cfg.start_cost, N);
  const SwitchingDecomposition dec = decompose(sp);
  const Strategy st = optimal_strategy(sp, dec);
  const double value = profit(sp, st);
  results["value"] = value;
  results["value_decomposition"] = dec.y_open.levels[0](0);
  results["switch_rounds"] = st.switches.size();
  results["split_error"] = dec.split_error;
  std::string body = "switch_index,leaf,level\n";
  for (size_t i = 0; i < st.switches.size(); ++i)
    for (int leaf = 0; leaf < inst.tree->leaf_count(); ++leaf)
      body += std::to_string(i) + "," + std::to_string(leaf) + "," +
              std::to_string(st.switches[i].level_of_leaf[leaf]) + "\n";
  em.file("strategy.csv", body);
  if (opt.check) {
    double best = -1e300;
    for (const auto& cand : enumerate_strategies(*inst.tree, *inst.filt, N))
      best = std::max(best, profit(sp, cand));
    results["oracle_best"] = best;
    results["oracle_gap"] = std::abs(best - value);
  }
}

void run_compare(const ScenarioConfig& cfg, const Instance& inst,
                 ordered_json& results) {
  const ScenarioTree& tree = *inst.tree;
  const int N = tree.num_steps();
  auto build = [&](const LinearBlock& blk, LinearDriver& ld, DCRBSDEProblem& p) {
    ld = eval_linear(tree, cfg.lin_a, cfg.lin_b, blk.c);
    p.tree = inst.tree.get();
    p.filt = inst.filt.get();
    p.terminal = eval_terminal(tree, blk.terminal);
    p.lower = eval_process(tree, blk.lower, N);
    p.upper = eval_process(tree, blk.upper, N);
    p.driver = ld.as_driver();
  };
  LinearDriver d1, d2;
  DCRBSDEProblem p1, p2;
  build(cfg.first, d1, p1);
  build(cfg.second, d2, p2);
  const CompareReport rep = compare(p1, d1, p2, d2);
  results["min_margin"] = rep.min_margin;
  results["argmin_level"] = rep.argmin_level;
  results["argmin_atom"] = rep.argmin_atom;
  results["ordered"] = rep.min_margin >= -1e-10;
}

void run_saddle(const ScenarioConfig& cfg, const Instance& inst,
                ordered_json& results) {
  const ScenarioTree& tree = *inst.tree;
  const SubFiltration& filt = *inst.filt;
  const int N = tree.num_steps();
  const LinearDriver ld = eval_linear(tree, cfg.lin_a, cfg.lin_b, cfg.driver_expr);
  DCRBSDEProblem p;
  p.tree = inst.tree.get();
  p.filt = inst.filt.get();
  p.terminal = eval_terminal(tree, cfg.terminal);
  p.lower = eval_process(tree, cfg.lower, N);
  p.upper = eval_process(tree, cfg.upper, N);
  p.driver = ld.as_driver();
  const GammaProcess g = gamma_process(tree, filt, ld);
  const SolutionTriple s = solve_linear(p, ld);
  const SaddlePoint sp = saddle_point(tree, filt, s, p.lower, p.upper, cfg.from_level);
  results["gamma_adapted"] = g.g_adapted;
  results["tau_star"] = sp.tau_star.level_of_leaf;
  results["sigma_star"] = sp.sigma_star.level_of_leaf;
  results["y0"] = s.y.levels[0](0);
}

void run_gen(const ScenarioConfig& cfg, const Instance& inst, Emitter& em,
             ordered_json& results) {
  (void)cfg;
  Scenario sc{*inst.tree, *inst.filt};
  em.file("scenario.json", write_scenario(sc));
  results["steps"] = inst.tree->num_steps();
  results["leaves"] = inst.tree->leaf_count();
  int atoms = 0;
  for (int k = 0; k <= inst.tree->num_steps(); ++k) atoms += inst.filt->atom_count(k);
  results["atoms_total"] = atoms;
}

}  // namespace

RunReport run(const ScenarioConfig& cfg, const RunOptions& opt) {
  const auto started = std::chrono::steady_clock::now();
  if (opt.threads < 1) throw config_error("threads must be at least 1");
  RunReport rep;
  Emitter em{opt, rep};
  ordered_json results;

  log_info("mode " + cfg.mode);
  Instance inst;
  if (cfg.mode != "skorokhod") inst = build_space(cfg, opt.seed);

  if (cfg.mode == "solve")
    run_solve(cfg, inst, em, results);
  else if (cfg.mode == "penalize-sweep")
    run_penalize_sweep(cfg, inst, em, results);
  else if (cfg.mode == "dynkin")
    run_dynkin(cfg, inst, opt, em, results);
  else if (cfg.mode == "skorokhod")
    run_skorokhod(cfg, em, results);
  else if (cfg.mode == "switch")
    run_switch(cfg, inst, opt, em, results);
  else if (cfg.mode == "compare")
    run_compare(cfg, inst, results);
  else if (cfg.mode == "saddle")
    run_saddle(cfg, inst, results);
  else if (cfg.mode == "gen")
    run_gen(cfg, inst, em, results);
  else
    throw config_error("unknown mode " + cfg.mode);

  rep.report["format_version"] = 1;
  rep.report["mode"] = cfg.mode;
  rep.report["seed"] = static_cast<std::int64_t>(opt.seed ? opt.seed : cfg.tree.seed);
  rep.report["config"] = emit_config(cfg);
  rep.report["results"] = std::move(results);
  {
    ordered_json names = ordered_json::array();
    for (const auto& f : rep.files) names.push_back(fs::path(f).filename().string());
    rep.report["files"] = std::move(names);
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  rep.report["wall_clock_ms"] = elapsed;
  if (!opt.out_dir.empty())
    write_atomic(fs::path(opt.out_dir) / "report.json", rep.report.dump(2) + "\n");
  log_info("done in " + std::to_string(elapsed) + " ms");
  return rep;
}

}  // namespace crbsde
