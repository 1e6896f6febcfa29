#include "tomo/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "tomo/format.hpp"

namespace tomo {

namespace {

void check_rates(const Topology& topo, const Subset& x,
                 const std::vector<double>& tree_pass, double path_pass_k) {
  if (tree_pass.size() != topo.node_count()) {
    throw Error("need one end-to-end rate per node");
  }
  if (!(path_pass_k > 0.0 && path_pass_k <= 1.0)) {
    throw Error("path pass rate " + format_g17(path_pass_k) + " outside (0,1]");
  }
  for (NodeId j : x.members(topo)) {
    if (tree_pass[j] > path_pass_k) {
      throw Error("end-to-end rate of child " + std::to_string(j) +
                  " exceeds the path rate of node " + std::to_string(x.node));
    }
  }
}

}  // namespace

double psi(const Topology& topo, const Subset& x,
           const std::vector<double>& tree_pass, double path_pass_k) {
  check_rates(topo, x, tree_pass, path_pass_k);
  double prod = 1.0;
  for (NodeId j : x.members(topo)) prod *= tree_pass[j] / path_pass_k;
  return prod;
}

double psi(const Topology& topo, const LinkParams& params, const Subset& x) {
  std::vector<double> tree_pass(params.node_count());
  for (NodeId j = 0; j < params.node_count(); ++j) tree_pass[j] = params.tree_pass(j);
  return psi(topo, x, tree_pass, params.path_pass(x.node));
}

double beta_subset(const Topology& topo, const Subset& x,
                   const std::vector<double>& tree_pass, double path_pass_k) {
  check_rates(topo, x, tree_pass, path_pass_k);
  double miss_all = 1.0;
  for (NodeId j : x.members(topo)) miss_all *= 1.0 - tree_pass[j] / path_pass_k;
  return 1.0 - miss_all;
}

double beta_subset(const Topology& topo, const LinkParams& params, const Subset& x) {
  std::vector<double> tree_pass(params.node_count());
  for (NodeId j = 0; j < params.node_count(); ++j) tree_pass[j] = params.tree_pass(j);
  return beta_subset(topo, x, tree_pass, params.path_pass(x.node));
}

InfoResult fisher(const EstimatorSpec& spec, double path_pass, double delta,
                  RateSource source) {
  if (!(path_pass > 0.0 && path_pass < 1.0)) {
    throw Error("path pass rate " + format_g17(path_pass) +
                " on the boundary: information is defined for rates in (0,1)");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw Error("subtree pass rate " + format_g17(delta) + " outside (0,1]");
  }
  InfoResult out;
  out.spec = spec;
  out.path_pass = path_pass;
  out.delta = delta;
  out.source = source;
  out.fisher_per_obs = delta / (path_pass * (1.0 - path_pass * delta));
  out.crlb_var_per_obs = path_pass * (1.0 - path_pass * delta) / delta;
  return out;
}

std::pair<double, double> bwe_info_bounds(int child_count, int degree,
                                          double path_pass, double psi_value) {
  if (degree < 2 || degree > child_count) {
    throw Error("block degree " + std::to_string(degree) + " out of range [2," +
                std::to_string(child_count) + "]");
  }
  const double single =
      fisher(EstimatorSpec{Method::Bwe, {}, degree}, path_pass, psi_value,
             RateSource::TrueParams)
          .fisher_per_obs;
  double combinations = 1.0;
  for (int i = 0; i < degree; ++i) {
    combinations = combinations * static_cast<double>(child_count - i) /
                   static_cast<double>(i + 1);
  }
  return {single, combinations * single};
}

EfficiencyOrder efficiency_order(const Topology& topo, NodeId k,
                                 const LinkParams& params) {
  if (k >= topo.node_count() || topo.is_leaf(k)) {
    throw Error("node " + std::to_string(k) + " is not internal");
  }
  const int child_count = static_cast<int>(topo.children(k).size());
  if (child_count < 2) {
    throw Error("node " + std::to_string(k) + " has fewer than two children");
  }
  std::uint64_t total = 0;
  for (int size = 2; size <= child_count; ++size) {
    std::uint64_t count = 1;
    for (int i = 0; i < size; ++i) {
      count = count * static_cast<std::uint64_t>(child_count - i) /
              static_cast<std::uint64_t>(i + 1);
    }
    total += count;
    if (total > kSubsetCap) {
      throw Error("subset family for node " + std::to_string(k) +
                  " exceeds the cap of " + std::to_string(kSubsetCap));
    }
  }

  EfficiencyOrder order;
  for (int size = 2; size <= child_count; ++size) {
    for (const Subset& x : enumerate_subsets(topo, k, size)) {
      order.subsets.push_back(x);
      order.psi_values.push_back(psi(topo, params, x));
    }
  }
  for (std::size_t i = 0; i < order.subsets.size(); ++i) {
    for (std::size_t j = 0; j < order.subsets.size(); ++j) {
      const std::uint64_t mi = order.subsets[i].mask;
      const std::uint64_t mj = order.subsets[j].mask;
      if ((mi & mj) == mi && std::popcount(mj) == std::popcount(mi) + 1) {
        order.covers.emplace_back(i, j);
      }
    }
  }
  order.ranking.resize(order.subsets.size());
  for (std::size_t i = 0; i < order.ranking.size(); ++i) order.ranking[i] = i;
  std::stable_sort(order.ranking.begin(), order.ranking.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (order.psi_values[a] != order.psi_values[b]) {
                       return order.psi_values[a] > order.psi_values[b];
                     }
                     return order.subsets[a].size() < order.subsets[b].size();
                   });
  return order;
}

EstimatorSpec select_model(const StatsTable& stats, const Topology& topo,
                           NodeId k, int budget) {
  if (k == 0 || k >= topo.node_count() || topo.is_leaf(k)) {
    throw Error("node " + std::to_string(k) + " is not a non-root internal node");
  }
  if (budget < 2) throw Error("selection budget must be >= 2");
  const int child_count = static_cast<int>(topo.children(k).size());
  if (budget >= child_count) {
    return EstimatorSpec{Method::Omle, {}, {}};
  }

  bool found = false;
  Subset best{};
  double best_product = -1.0;
  for (int size = 2; size <= budget; ++size) {
    for (const Subset& x : enumerate_subsets(topo, k, size)) {
      if (stats.simultaneous_count(x) == 0) continue;
      double prod = 1.0;
      for (NodeId j : x.members(topo)) prod *= stats.empirical_pass(j);
      // Ties break toward the smaller (cheaper) subset, then the canonical
      // enumeration order; sizes ascend and enumeration is canonical, so
      // strictly-greater keeps exactly that preference.
      if (prod > best_product) {
        best_product = prod;
        best = x;
        found = true;
      }
    }
  }
  if (!found) {
    throw EstimatorError("no subset of node " + std::to_string(k) +
                         " has positive simultaneous counts");
  }
  return EstimatorSpec{Method::Ibe, best, {}};
}

WorkedExample worked_example(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("example pass rate must lie strictly inside (0,1)");
  }
  WorkedExample out;
  out.direct_var = alpha - alpha * alpha;
  out.full_union_var =
      1.0 / (3.0 * (1.0 - alpha) + alpha * alpha) - alpha * alpha;
  out.pair_joint_var = 1.0 / alpha - alpha * alpha;
  out.triple_joint_var = 1.0 / (alpha * alpha) - alpha * alpha;
  return out;
}

}  // namespace tomo
