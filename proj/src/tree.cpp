#include "crbsde/tree.hpp"

#include <cmath>
#include <random>
#include <string>

namespace crbsde {

namespace {
constexpr double kStructTol = 1e-12;
constexpr int kMaxBinarySteps = 22;
}  // namespace

ScenarioTree::ScenarioTree(double horizon,
                           std::vector<std::vector<int>> parents,
                           std::vector<std::vector<double>> probs,
                           std::vector<std::vector<double>> dbs)
    : horizon_(horizon) {
  if (horizon <= 0.0) throw config_error("scenario tree: horizon must be positive");
  const int nlev = static_cast<int>(parents.size());
  if (nlev < 2) throw config_error("scenario tree: need at least one step");
  if (probs.size() != parents.size() || dbs.size() != parents.size())
    throw config_error("scenario tree: level array sizes disagree");

  levels_.resize(nlev);
  child_begin_.resize(nlev);
  for (int k = 0; k < nlev; ++k) {
    const auto& par = parents[k];
    const int n = static_cast<int>(par.size());
    if (n == 0) throw config_error("scenario tree: empty level " + std::to_string(k));
    if (probs[k].size() != par.size() || dbs[k].size() != par.size())
      throw config_error("scenario tree: ragged arrays at level " + std::to_string(k));
    TreeLevel& lv = levels_[k];
    lv.parent = par;
    lv.branch_prob = Eigen::Map<const ArrayXd>(probs[k].data(), n);
    lv.branch_db = Eigen::Map<const ArrayXd>(dbs[k].data(), n);
    lv.path_prob = ArrayXd::Zero(n);
    lv.cum_db = ArrayXd::Zero(n);

    if (k == 0) {
      if (n != 1 || par[0] != -1)
        throw config_error("scenario tree: level 0 must hold the single root");
      lv.branch_prob(0) = 1.0;
      lv.branch_db(0) = 0.0;
      lv.path_prob(0) = 1.0;
      continue;
    }
    const int prev = levels_[k - 1].count();
    for (int i = 0; i < n; ++i) {
      if (par[i] < 0 || par[i] >= prev)
        throw config_error("scenario tree: bad parent at level " + std::to_string(k));
      if (i > 0 && par[i] < par[i - 1])
        throw config_error("scenario tree: nodes at level " + std::to_string(k) +
                           " must be sorted by parent");
      if (!(lv.branch_prob(i) > 0.0 && lv.branch_prob(i) < 1.0 + kStructTol))
        throw config_error("scenario tree: branch probability out of (0,1] at level " +
                           std::to_string(k));
    }
  }

  // Child ranges, probability sums and the martingale property per node.
  for (int k = 0; k + 1 < nlev; ++k) {
    const TreeLevel& next = levels_[k + 1];
    const int n = levels_[k].count();
    std::vector<int>& cb = child_begin_[k];
    cb.assign(n + 1, 0);
    for (int j = 0; j < next.count(); ++j) cb[next.parent[j] + 1]++;
    for (int i = 0; i < n; ++i) cb[i + 1] += cb[i];
    for (int i = 0; i < n; ++i) {
      if (cb[i] == cb[i + 1])
        throw config_error("scenario tree: childless interior node at level " +
                           std::to_string(k));
      double psum = 0.0, drift = 0.0;
      for (int j = cb[i]; j < cb[i + 1]; ++j) {
        psum += next.branch_prob(j);
        drift += next.branch_prob(j) * next.branch_db(j);
      }
      if (std::abs(psum - 1.0) > kStructTol)
        throw config_error("scenario tree: branch probabilities at level " +
                           std::to_string(k) + " node " + std::to_string(i) +
                           " sum to " + std::to_string(psum));
      if (std::abs(drift) > kStructTol)
        throw config_error("scenario tree: increments at level " + std::to_string(k) +
                           " node " + std::to_string(i) + " have nonzero mean");
    }
  }
  child_begin_[nlev - 1].assign(levels_[nlev - 1].count() + 1, 0);

  for (int k = 1; k < nlev; ++k) {
    TreeLevel& lv = levels_[k];
    const TreeLevel& up = levels_[k - 1];
    for (int i = 0; i < lv.count(); ++i) {
      lv.path_prob(i) = up.path_prob(lv.parent[i]) * lv.branch_prob(i);
      lv.cum_db(i) = up.cum_db(lv.parent[i]) + lv.branch_db(i);
    }
  }
}

std::pair<int, int> ScenarioTree::children(int k, int node) const {
  if (k < 0 || k >= num_steps())
    throw error("children: level " + std::to_string(k) + " out of range");
  const auto& cb = child_begin_.at(k);
  return {cb.at(node), cb.at(node + 1)};
}

int ScenarioTree::ancestor(int leaf, int at_level) const {
  return ancestor_of(num_steps(), leaf, at_level);
}

int ScenarioTree::ancestor_of(int level, int node, int at_level) const {
  for (int k = level; k > at_level; --k) node = levels_[k].parent[node];
  return node;
}

bool ScenarioTree::is_binary() const {
  for (int k = 0; k < num_steps(); ++k)
    for (int i = 0; i < node_count(k); ++i) {
      auto [b, e] = children(k, i);
      if (e - b != 2) return false;
    }
  return true;
}

ScenarioTree ScenarioTree::binary(int num_steps, double horizon) {
  if (num_steps < 1) throw config_error("binary tree: need at least one step");
  if (num_steps > kMaxBinarySteps)
    throw config_error("binary tree: " + std::to_string(num_steps) +
                       " steps exceeds the non-recombining size guard (" +
                       std::to_string(kMaxBinarySteps) + ")");
  const double s = std::sqrt(horizon / num_steps);
  std::vector<std::vector<int>> parents(num_steps + 1);
  std::vector<std::vector<double>> probs(num_steps + 1), dbs(num_steps + 1);
  parents[0] = {-1};
  probs[0] = {1.0};
  dbs[0] = {0.0};
  for (int k = 1; k <= num_steps; ++k) {
    const int n = 1 << k;
    parents[k].resize(n);
    probs[k].assign(n, 0.5);
    dbs[k].resize(n);
    for (int i = 0; i < n; ++i) {
      parents[k][i] = i / 2;
      dbs[k][i] = (i % 2 == 0) ? s : -s;
    }
  }
  return ScenarioTree(horizon, std::move(parents), std::move(probs), std::move(dbs));
}

ScenarioTree ScenarioTree::chain(int num_steps, double horizon) {
  if (num_steps < 1) throw config_error("chain tree: need at least one step");
  std::vector<std::vector<int>> parents(num_steps + 1);
  std::vector<std::vector<double>> probs(num_steps + 1), dbs(num_steps + 1);
  parents[0] = {-1};
  probs[0] = {1.0};
  dbs[0] = {0.0};
  for (int k = 1; k <= num_steps; ++k) {
    parents[k] = {0};
    probs[k] = {1.0};
    dbs[k] = {0.0};
  }
  return ScenarioTree(horizon, std::move(parents), std::move(probs), std::move(dbs));
}

ScenarioTree ScenarioTree::random_binary(int num_steps, double horizon,
                                         std::uint64_t seed) {
  if (num_steps < 1) throw config_error("random binary tree: need at least one step");
  if (num_steps > kMaxBinarySteps)
    throw config_error("random binary tree: size guard exceeded");
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> up(0.25, 0.75);
  const double dt = horizon / num_steps;
  std::vector<std::vector<int>> parents(num_steps + 1);
  std::vector<std::vector<double>> probs(num_steps + 1), dbs(num_steps + 1);
  parents[0] = {-1};
  probs[0] = {1.0};
  dbs[0] = {0.0};
  for (int k = 1; k <= num_steps; ++k) {
    const int n = 1 << k;
    parents[k].resize(n);
    probs[k].resize(n);
    dbs[k].resize(n);
    for (int i = 0; i < n; i += 2) {
      const double p = up(eng);
      parents[k][i] = parents[k][i + 1] = i / 2;
      probs[k][i] = p;
      probs[k][i + 1] = 1.0 - p;
      dbs[k][i] = std::sqrt(dt * (1.0 - p) / p);
      dbs[k][i + 1] = -std::sqrt(dt * p / (1.0 - p));
    }
  }
  return ScenarioTree(horizon, std::move(parents), std::move(probs), std::move(dbs));
}

ScenarioTree ScenarioTree::random_mary(int num_steps, double horizon,
                                       std::uint64_t seed) {
  if (num_steps < 1) throw config_error("random m-ary tree: need at least one step");
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u01(0.1, 1.0);
  std::uniform_int_distribution<int> arity(2, 3);
  const double s = std::sqrt(horizon / num_steps);
  std::vector<std::vector<int>> parents(num_steps + 1);
  std::vector<std::vector<double>> probs(num_steps + 1), dbs(num_steps + 1);
  parents[0] = {-1};
  probs[0] = {1.0};
  dbs[0] = {0.0};
  for (int k = 1; k <= num_steps; ++k) {
    const int prev = static_cast<int>(parents[k - 1].size());
    for (int i = 0; i < prev; ++i) {
      const int m = arity(eng);
      double psum = 0.0;
      std::vector<double> p(m), d(m);
      for (int j = 0; j < m; ++j) {
        p[j] = u01(eng);
        psum += p[j];
        d[j] = s * (u01(eng) * 2.0 - 1.0);
      }
      double mean = 0.0;
      for (int j = 0; j < m; ++j) {
        p[j] /= psum;
        mean += p[j] * d[j];
      }
      for (int j = 0; j < m; ++j) {
        parents[k].push_back(i);
        probs[k].push_back(p[j]);
        dbs[k].push_back(d[j] - mean);
      }
    }
    if (parents[k].size() > (1u << 21))
      throw config_error("random m-ary tree: size guard exceeded");
  }
  return ScenarioTree(horizon, std::move(parents), std::move(probs), std::move(dbs));
}

AdaptedProcess make_f_process(const ScenarioTree& tree, int up_to) {
  AdaptedProcess p;
  p.tag = Filt::F;
  p.levels.resize(up_to + 1);
  for (int k = 0; k <= up_to; ++k) p.levels[k] = ArrayXd::Zero(tree.node_count(k));
  return p;
}

ArrayXd cond_expect_F(const ScenarioTree& tree, int level_of_x, const ArrayXd& x) {
  if (level_of_x < 1 || level_of_x > tree.num_steps())
    throw error("cond_expect_F: level " + std::to_string(level_of_x) + " out of range");
  if (x.size() != tree.node_count(level_of_x))
    throw error("cond_expect_F: value array does not match level width");
  const int k = level_of_x - 1;
  const TreeLevel& next = tree.level(level_of_x);
  ArrayXd out = ArrayXd::Zero(tree.node_count(k));
  for (int i = 0; i < out.size(); ++i) {
    auto [b, e] = tree.children(k, i);
    double acc = 0.0;
    for (int j = b; j < e; ++j) acc += next.branch_prob(j) * x(j);
    out(i) = acc;
  }
  return out;
}

double expect(const ScenarioTree& tree, int level, const ArrayXd& x) {
  if (level < 0 || level > tree.num_steps())
    throw error("expect: level out of range");
  if (x.size() != tree.node_count(level))
    throw error("expect: value array does not match level width");
  return (tree.level(level).path_prob * x).sum();
}

ArrayXd martingale_coeff(const ScenarioTree& tree, int level_of_x, const ArrayXd& x,
                         double residual_tol) {
  if (level_of_x < 1 || level_of_x > tree.num_steps())
    throw error("martingale_coeff: level out of range");
  if (x.size() != tree.node_count(level_of_x))
    throw error("martingale_coeff: value array does not match level width");
  const int k = level_of_x - 1;
  const TreeLevel& next = tree.level(level_of_x);
  ArrayXd z = ArrayXd::Zero(tree.node_count(k));
  for (int i = 0; i < z.size(); ++i) {
    auto [b, e] = tree.children(k, i);
    double mean = 0.0, num = 0.0, den = 0.0;
    for (int j = b; j < e; ++j) mean += next.branch_prob(j) * x(j);
    for (int j = b; j < e; ++j) {
      num += next.branch_prob(j) * next.branch_db(j) * (x(j) - mean);
      den += next.branch_prob(j) * next.branch_db(j) * next.branch_db(j);
    }
    const double zi = den > 0.0 ? num / den : 0.0;
    double resid = 0.0;
    for (int j = b; j < e; ++j)
      resid = std::max(resid, std::abs(x(j) - mean - zi * next.branch_db(j)));
    if (resid > residual_tol)
      throw numerical_error(
          "martingale_coeff: representation failure at level " + std::to_string(k) +
          " node " + std::to_string(i) + " (residual " + std::to_string(resid) + ")");
    z(i) = zi;
  }
  return z;
}

}  // namespace crbsde
