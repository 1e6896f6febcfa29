#pragma once

#include <cstdint>
#include <vector>

#include "tomo/bitvec.hpp"
#include "tomo/observation.hpp"
#include "tomo/rng.hpp"
#include "tomo/topology.hpp"

namespace tomo {

// Per-node reach record kept only for debugging/tests: bit i of reached[k] is
// 1 iff probe i arrived at node k.
struct SimTrace {
  std::vector<BitVec> reached;
};

// Propagates n probes down the tree.  Each traversed link passes
// independently with its link pass rate; a failed link hides the whole
// subtree below it from that probe.  Draw order is normative so streams are
// reproducible: pre-order from node 0, children in stored order, one draw per
// traversed link, and no draws below a failed link.
ObservationMatrix simulate(const Topology& topo, const LinkParams& params,
                           std::uint64_t probe_count, SeedSpec seed);

// As simulate, also filling `trace` with per-node reach bits.
ObservationMatrix simulate_traced(const Topology& topo, const LinkParams& params,
                                  std::uint64_t probe_count, SeedSpec seed,
                                  SimTrace& trace);

// Empirical end-to-end pass rate per node (observed fraction of probes seen
// anywhere in the node's subtree); thin wrapper over the statistics module
// for simulator self-checks.
std::vector<double> empirical_rates(const ObservationMatrix& obs,
                                    const Topology& topo);

}  // namespace tomo
