#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tomo/estimators.hpp"
#include "tomo/stats.hpp"
#include "tomo/topology.hpp"

namespace tomo {

// Whether variance formulas were fed ground-truth parameters or plug-in
// estimates; recorded so results from the two regimes never mix silently.
enum class RateSource { TrueParams, PlugIn };

// Per-observation Fisher information and its reciprocal variance bound for
// one estimator at one node.  `delta` is the estimator's effective subtree
// pass rate: the union rate beta_k(x) for the union-equation estimators,
// the simultaneous rate psi_k(x) for the joint-rate ones.
struct InfoResult {
  double fisher_per_obs = 0.0;
  double crlb_var_per_obs = 0.0;
  double delta = 1.0;
  double path_pass = 1.0;
  RateSource source = RateSource::TrueParams;
  EstimatorSpec spec;
};

// psi_k(x): probability that a probe reaching node k is observed by every
// member subtree of x; product of gamma_j / A_k over members.
double psi(const Topology& topo, const LinkParams& params, const Subset& x);
double psi(const Topology& topo, const Subset& x,
           const std::vector<double>& tree_pass, double path_pass_k);

// beta_k(x): probability that a probe reaching node k is observed by at
// least one member subtree of x.
double beta_subset(const Topology& topo, const LinkParams& params, const Subset& x);
double beta_subset(const Topology& topo, const Subset& x,
                   const std::vector<double>& tree_pass, double path_pass_k);

// fisher = delta / (A (1 - A delta)) per observation; crlb its reciprocal.
// A must lie in (0,1): the boundary A = 1 is singular.
InfoResult fisher(const EstimatorSpec& spec, double path_pass, double delta,
                  RateSource source);

// Range of the per-observation information for the block estimator at the
// given degree: [single-subset information, C(child_count, degree) times it].
std::pair<double, double> bwe_info_bounds(int child_count, int degree,
                                          double path_pass, double psi_value);

// All child subsets of size >= 2 with their simultaneous pass rates and the
// efficiency partial order (subset => at least as efficient).
struct EfficiencyOrder {
  std::vector<Subset> subsets;      // ordered by (size, canonical position)
  std::vector<double> psi_values;   // aligned with subsets
  // (i, j) pairs meaning subsets[i] is contained in subsets[j] with one extra
  // member, hence at least as efficient.
  std::vector<std::pair<std::size_t, std::size_t>> covers;
  // Indices sorted by descending psi; ties by smaller size then canonical.
  std::vector<std::size_t> ranking;
};

EfficiencyOrder efficiency_order(const Topology& topo, NodeId k,
                                 const LinkParams& params);

// Ranks candidate subsets (2 <= |x| <= budget) by the observable product of
// child rates and returns a joint-rate estimator spec over the winner; a
// budget covering all children falls back to the full-likelihood estimator.
// Ties break toward smaller subsets, then canonical order.
EstimatorSpec select_model(const StatsTable& stats, const Topology& topo,
                           NodeId k, int budget);

// Closed-form per-observation variances for the symmetric example tree: one
// path link with pass rate `alpha` into a node with three leaf children of
// pass rate `alpha` each.
struct WorkedExample {
  double direct_var;       // observing the node itself: alpha - alpha^2
  double full_union_var;   // full-likelihood: 1/(3(1-alpha)+alpha^2) - alpha^2
  double pair_joint_var;   // joint-rate pair: 1/alpha - alpha^2
  double triple_joint_var; // joint-rate triple: 1/alpha^2 - alpha^2
};

WorkedExample worked_example(double alpha);

}  // namespace tomo
