#include "tomo/simulator.hpp"

#include "tomo/stats.hpp"

namespace tomo {

namespace {

// One probe, strict pre-order: the draw for a child link happens when that
// link is traversed, and the child's entire subtree is expanded before the
// next sibling's draw.  No draws occur below a failed link.
void walk(const Topology& topo, const LinkParams& params, Rng& rng,
          ObservationMatrix& obs, SimTrace* trace, std::uint64_t probe, NodeId k) {
  if (trace) trace->reached[k].set(probe, true);
  if (topo.is_leaf(k)) {
    obs.set(probe, topo.receiver_column(k), true);
    return;
  }
  for (NodeId child : topo.children(k)) {
    if (rng.pass(params.link_pass(child))) {
      walk(topo, params, rng, obs, trace, probe, child);
    }
  }
}

ObservationMatrix run(const Topology& topo, const LinkParams& params,
                      std::uint64_t probe_count, SeedSpec seed, SimTrace* trace) {
  if (probe_count == 0) throw Error("probe count must be >= 1");
  if (params.node_count() != topo.node_count()) {
    throw Error("link params do not match the topology");
  }

  ObservationMatrix obs(probe_count, topo.receivers());
  if (trace) {
    trace->reached.assign(topo.node_count(), BitVec(probe_count));
  }

  Rng rng(seed);
  for (std::uint64_t i = 0; i < probe_count; ++i) {
    walk(topo, params, rng, obs, trace, i, 0);
  }
  return obs;
}

}  // namespace

ObservationMatrix simulate(const Topology& topo, const LinkParams& params,
                           std::uint64_t probe_count, SeedSpec seed) {
  return run(topo, params, probe_count, seed, nullptr);
}

ObservationMatrix simulate_traced(const Topology& topo, const LinkParams& params,
                                  std::uint64_t probe_count, SeedSpec seed,
                                  SimTrace& trace) {
  return run(topo, params, probe_count, seed, &trace);
}

std::vector<double> empirical_rates(const ObservationMatrix& obs,
                                    const Topology& topo) {
  const StatsTable stats = build_stats(obs, topo);
  std::vector<double> rates(topo.node_count());
  for (NodeId k = 0; k < topo.node_count(); ++k) {
    rates[k] = stats.empirical_pass(k);
  }
  return rates;
}

}  // namespace tomo
