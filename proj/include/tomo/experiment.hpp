#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomo/estimators.hpp"
#include "tomo/topology.hpp"

namespace tomo {

// One estimator to compare in an experiment; subset members are node ids
// resolved against the topology at run time.
struct EstimatorConfig {
  std::string name;  // defaults to the spec label when empty
  Method method = Method::Omle;
  std::optional<std::vector<NodeId>> subset_members;
  std::optional<int> degree;
  std::optional<int> auto_size;  // subset size when members are not given
};

// Parsed experiment description.  The reported quantity is the loss rate of
// the link into `target`, which must be the root link's child (node 1): that
// is the only link whose loss follows from a single path estimate.
struct ExperimentConfig {
  std::string topology_path;
  NodeId target = 1;
  std::vector<std::uint64_t> sample_sizes;
  std::uint64_t replications = 20;
  std::uint64_t master_seed = 0;
  std::string out_prefix;  // optional basename for emitted files
  std::vector<EstimatorConfig> estimators;
};

// Key/value format with one global section and repeated `[estimator]`
// sections; `#` starts a comment.  Global keys: topology (required), target,
// samples (required), replications, seed, out_prefix.  Estimator keys: name,
// method (required), degree, subset, size.
ExperimentConfig parse_experiment_config(const std::string& text);

struct RepRecord {
  std::uint64_t sample_size = 0;
  std::uint64_t replication = 0;
  std::string estimator;
  double path_pass = 1.0;
  double loss = 0.0;
  NodeFlags flags;
};

struct CellSummary {
  std::string estimator;
  std::uint64_t sample_size = 0;
  double mean_loss = 0.0;
  double var_loss = 0.0;  // population variance across replications
  double mean_path_pass = 0.0;
  double var_path_pass = 0.0;
  std::uint64_t flagged = 0;  // replications with a problem flag
  // Per-observation variance bound from true parameters; absent on the
  // lossless boundary.  Block estimators carry a [lower, upper] range.
  std::optional<double> crlb_var_per_obs;
  std::optional<std::pair<double, double>> crlb_var_range;
};

struct LinkLossSummary {
  std::uint64_t sample_size = 0;
  std::vector<double> mean_loss_by_node;  // index = node id; [0] unused
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::string> estimator_names;  // resolved, config order
  std::vector<RepRecord> replications;       // (n asc, rep asc, estimator order)
  std::vector<CellSummary> cells;            // (estimator order, n asc)
  std::vector<LinkLossSummary> link_losses;  // full-likelihood policy, per n

  // Columns: estimator,n,mean,var,flags
  std::string summary_csv() const;
  // Columns: n,rep,estimator,A_hat,loss_hat,flags
  std::string per_rep_csv() const;
  std::string to_json() const;
};

// Runs the full grid: for every sample size and replication, simulate with
// the replication's stream (shared across sample sizes), build statistics
// once, and evaluate every configured estimator at the target node.
// Deterministic for a fixed config, topology, and parameters.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Topology& topo,
                                const LinkParams& params);

}  // namespace tomo
