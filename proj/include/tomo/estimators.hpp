#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tomo/stats.hpp"
#include "tomo/topology.hpp"

namespace tomo {

enum class Method {
  Direct,  // leaf rule: path estimate = observed subtree pass rate
  Omle,    // full-likelihood root over all children
  Rse,     // same equation restricted to a child subset
  Bwe,     // closed form over all subsets of one size
  Ibe,     // closed form over a single subset
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Which estimator to run at a node.  Rse/Ibe take a subset, Bwe a degree;
// when absent they are auto-resolved against the node (see TreePolicy).
struct EstimatorSpec {
  Method method = Method::Omle;
  std::optional<Subset> subset;
  std::optional<int> degree;

  std::string label(const Topology& topo) const;
};

// Per-node diagnostic flags.
//   clamped_high       estimate forced down to 1
//   clamped_low        estimate fell back to the observed union rate
//   degenerate_counts  data inconsistent with an interior solution
//   root_bracket_used  numeric bracketed root-finder ran (vs closed form)
struct NodeFlags {
  bool clamped_high = false;
  bool clamped_low = false;
  bool degenerate_counts = false;
  bool root_bracket_used = false;

  bool any() const {
    return clamped_high || clamped_low || degenerate_counts || root_bracket_used;
  }
  // True for the flags that mark questionable data (root_bracket_used is
  // informational only).
  bool problem() const { return clamped_high || clamped_low || degenerate_counts; }
  // Compact code string, e.g. "cl|dc"; "-" when clean.
  std::string code() const;
};

struct NodeEstimate {
  NodeId node = 0;
  double path_pass = 1.0;  // estimated source-to-node pass rate, in [0,1]
  EstimatorSpec spec;
  NodeFlags flags;
  // Set by bwe when the interior-uniqueness condition held (sum of child
  // rate products < sum of joint rates), so the estimate is strictly inside
  // (0,1) without clamping.
  bool unique_interior = false;
};

// ---- rate-level cores -----------------------------------------------------
// These operate on plain rates so tests can inject exact expected values.

struct RateSolveResult {
  double path_pass = 1.0;
  NodeFlags flags;
};

// Solves 1 - union_rate/A = prod_j (1 - child_rates[j]/A) for A in
// (max child rate, 1].  Callers must pass child_rates > 0.  With no sign
// change in the bracket the result degenerates to union_rate or 1, whichever
// leaves the smaller equation residual.  Binary inputs use the closed form
// union of the two-child likelihood; larger sets use bisection + Newton with
// residual and bracket width both below 1e-12.
RateSolveResult solve_union_product(double union_rate,
                                    const std::vector<double>& child_rates);

// Same equation, numeric path only (exposed to verify the binary closed form).
RateSolveResult solve_union_product_numeric(double union_rate,
                                            const std::vector<double>& child_rates);

// (product of child rates / joint_rate)^(1/(subset_size-1)), clamped to 1.
// Throws EstimatorError when joint_rate is zero.
RateSolveResult solve_joint_power(double child_rate_product, double joint_rate,
                                  int subset_size);

// (sum of per-subset child rate products / sum of per-subset joint rates)
// ^(1/(degree-1)), clamped to 1.  Throws EstimatorError on a zero denominator.
RateSolveResult solve_block_power(double sum_products, double sum_joint_rates,
                                  int degree);

// ---- per-node operations --------------------------------------------------

NodeEstimate omle(const StatsTable& stats, const Topology& topo, NodeId k);
NodeEstimate rse(const StatsTable& stats, const Topology& topo, NodeId k,
                 const Subset& x);
NodeEstimate bwe(const StatsTable& stats, const Topology& topo, NodeId k,
                 int degree);
NodeEstimate ibe(const StatsTable& stats, const Topology& topo, NodeId k,
                 const Subset& x);

// ---- tree-wide assembly ---------------------------------------------------

// Method assignment for estimate_tree: `default_spec` for every internal
// node unless overridden.  Missing subsets resolve to the size-
// `auto_subset_size` subset with the largest product of observed child
// rates; missing degrees resolve to min(auto_subset_size, child count).
struct TreePolicy {
  EstimatorSpec default_spec;
  std::map<NodeId, EstimatorSpec> overrides;
  int auto_subset_size = 2;
};

struct LinkEstimateRow {
  NodeId node = 0;
  NodeId parent = 0;
  std::string method;
  double path_pass = 1.0;
  double link_pass = 1.0;
  double loss = 0.0;
  NodeFlags flags;
  bool ratio_clamped = false;
};

struct EstimateReport {
  std::vector<NodeEstimate> nodes;  // non-root nodes, ascending id
  std::vector<LinkEstimateRow> links;

  std::string to_json() const;
  // Columns: node,link,method,A_hat,alpha_hat,loss_hat,flags
  std::string to_csv() const;
};

// Runs the policy's estimator on every internal node (leaves use their
// observed rate directly), then converts path estimates to per-link rates.
// Node-level degeneracies become flags on the affected rows, never a global
// failure.
EstimateReport estimate_tree(const ObservationMatrix& obs, const Topology& topo,
                             const TreePolicy& policy);

// Picks the subset of size `size` maximizing the product of observed child
// rates (ties: canonical enumeration order).
Subset best_subset_by_rate_product(const StatsTable& stats, const Topology& topo,
                                   NodeId k, int size);

}  // namespace tomo
