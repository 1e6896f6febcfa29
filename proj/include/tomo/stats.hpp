#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tomo/bitvec.hpp"
#include "tomo/error.hpp"
#include "tomo/observation.hpp"
#include "tomo/topology.hpp"

namespace tomo {

// A non-empty subset of one node's children, as a bit mask over child
// positions in stored (file) order.  Bit p set = child at position p.
struct Subset {
  NodeId node = 0;
  std::uint64_t mask = 0;

  // Builds from child node ids; canonical order is imposed by the mask.
  static Subset of_children(const Topology& topo, NodeId node,
                            const std::vector<NodeId>& members);
  static Subset full(const Topology& topo, NodeId node);

  int size() const;
  // Member child ids in canonical (children-order) sequence.
  std::vector<NodeId> members(const Topology& topo) const;
  std::string label(const Topology& topo) const;

  bool operator==(const Subset& other) const {
    return node == other.node && mask == other.mask;
  }
};

// Hard ceiling on subsets touched by one enumeration request; exceeding it is
// an error, never silent truncation.
constexpr std::uint64_t kSubsetCap = std::uint64_t{1} << 16;

// All size-`degree` subsets of children(k), lexicographic in child positions.
std::vector<Subset> enumerate_subsets(const Topology& topo, NodeId k, int degree);

// Sufficient statistics of one observation matrix over one tree.
//
// subtree_hits(k) holds, per probe, whether any receiver below k saw the
// probe; leaves take their own column, internal nodes the OR over children,
// and node 0 mirrors node 1.  empirical_pass(k) is the fraction of probes
// with a hit below k.  Subset counts (AND/OR popcounts over child hit
// vectors) are memoized; the memo is an idempotent insert-only cache, safe
// under concurrent reads.
class StatsTable {
 public:
  StatsTable(const ObservationMatrix& obs, const Topology& topo);
  StatsTable(StatsTable&&) noexcept;
  StatsTable& operator=(StatsTable&&) noexcept;
  ~StatsTable();

  std::uint64_t probe_count() const { return probe_count_; }
  const Topology& topology() const { return topo_; }

  double empirical_pass(NodeId k) const {
    return static_cast<double>(hit_counts_[k]) / static_cast<double>(probe_count_);
  }
  std::uint64_t hit_count(NodeId k) const { return hit_counts_[k]; }
  const BitVec& subtree_hits(NodeId k) const { return hits_[k]; }

  // Probes seen simultaneously by every member subtree of x.
  std::uint64_t simultaneous_count(const Subset& x) const;
  // Probes seen by at least one member subtree of x.
  std::uint64_t union_count(const Subset& x) const;

  // union(full) minus the signed sum of simultaneous counts over all
  // non-empty subsets of children(k); zero for every observation matrix.
  std::int64_t inclusion_exclusion_residual(NodeId k) const;

  // Debug dump: per-node empirical pass rates, plus per-subset counts for
  // internal nodes with at most `subset_child_limit` children.
  std::string dump_json(std::size_t subset_child_limit = 8) const;

 private:
  struct Memo;

  void check_subset(const Subset& x) const;

  std::uint64_t probe_count_ = 0;
  Topology topo_;
  std::vector<BitVec> hits_;
  std::vector<std::uint64_t> hit_counts_;
  std::unique_ptr<Memo> memo_;
};

inline StatsTable build_stats(const ObservationMatrix& obs, const Topology& topo) {
  return StatsTable(obs, topo);
}

inline std::uint64_t count_I(const StatsTable& stats, const Subset& x) {
  return stats.simultaneous_count(x);
}

inline std::uint64_t count_nk(const StatsTable& stats, const Subset& x) {
  return stats.union_count(x);
}

inline std::int64_t inclusion_exclusion_check(const StatsTable& stats, NodeId k) {
  return stats.inclusion_exclusion_residual(k);
}

}  // namespace tomo
