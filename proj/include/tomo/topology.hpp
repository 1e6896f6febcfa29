#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tomo/error.hpp"

namespace tomo {

using NodeId = std::uint32_t;

// Rooted multicast tree.  Node 0 is the source attachment point and has
// exactly one child, node 1; ids are dense 0..m; every leaf is a receiver.
// Non-root internal nodes must have >= 2 children: a chain of single-child
// internal nodes is rejected because its individual link rates cannot be
// told apart from receiver observations.
//
// Children keep the order in which their edges were supplied (file order);
// subset enumeration and simulation draw order depend on it.
// Immutable after construction.
class Topology {
 public:
  // Validates and builds from (child, parent) pairs, one per non-root node.
  static Topology from_edges(const std::vector<std::pair<NodeId, NodeId>>& edges);

  std::size_t node_count() const { return children_.size(); }
  std::size_t link_count() const { return children_.size() - 1; }

  // Parent of k; k must be non-root.
  NodeId parent(NodeId k) const { return parent_[k]; }
  const std::vector<NodeId>& children(NodeId k) const { return children_[k]; }
  bool is_leaf(NodeId k) const { return children_[k].empty(); }
  bool is_internal(NodeId k) const { return !children_[k].empty(); }

  // All leaves, ascending by id.
  const std::vector<NodeId>& receivers() const { return receivers_; }
  // Receivers in the subtree rooted at k, ascending by id.
  const std::vector<NodeId>& subtree_receivers(NodeId k) const {
    return subtree_receivers_[k];
  }
  // Pre-order traversal from node 0, children in stored order.  This is the
  // normative link-visit order for the simulator's random draws.
  const std::vector<NodeId>& preorder() const { return preorder_; }

  bool is_receiver(NodeId j) const { return receiver_col_[j] >= 0; }
  // Column of receiver j in the canonical (ascending) receiver order.
  std::size_t receiver_column(NodeId j) const;

  bool operator==(const Topology& other) const {
    return parent_ == other.parent_ && children_ == other.children_;
  }

 private:
  Topology() = default;

  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> receivers_;
  std::vector<std::vector<NodeId>> subtree_receivers_;
  std::vector<NodeId> preorder_;
  std::vector<std::int64_t> receiver_col_;
};

// Parse result: the tree plus any per-link pass rates found in the file.
// `link_pass[k]` is NaN when the file omitted a rate for k; index 0 unused.
struct ParsedTopology {
  Topology topology;
  std::vector<double> link_pass;

  bool has_full_rates() const;
};

// Parses either the text form (`child parent [rate]` per line, `#` comments)
// or the JSON form ({"nodes":[{"id","parent","alpha"}]}), auto-detected by
// the first non-whitespace byte.
ParsedTopology parse_topology(const std::string& text);

// Text-format serialization; parse_topology(serialize(t)) reproduces t
// including children order.
std::string serialize(const Topology& topo);
std::string serialize(const Topology& topo, const std::vector<double>& link_pass);

// Ground-truth rates for one parameterized tree.
//   link_pass    alpha_k: probability a probe crosses link k given it reached
//                the parent; in (0,1].
//   path_pass    A_k: probability a probe reaches node k; A_0 = 1.
//   subtree_pass beta_k: probability a probe at k is seen by at least one
//                receiver below k; 1 for leaves.
//   tree_pass    gamma_k = A_k * beta_k.
// Immutable after construction.
class LinkParams {
 public:
  static LinkParams derive(const Topology& topo, const std::vector<double>& link_pass);

  double link_pass(NodeId k) const { return link_pass_[k]; }
  double path_pass(NodeId k) const { return path_pass_[k]; }
  double subtree_pass(NodeId k) const { return subtree_pass_[k]; }
  double tree_pass(NodeId k) const { return tree_pass_[k]; }
  std::size_t node_count() const { return path_pass_.size(); }

 private:
  LinkParams() = default;

  std::vector<double> link_pass_;
  std::vector<double> path_pass_;
  std::vector<double> subtree_pass_;
  std::vector<double> tree_pass_;
};

inline LinkParams derive_params(const Topology& topo, const std::vector<double>& link_pass) {
  return LinkParams::derive(topo, link_pass);
}

// One recovered link rate; `clamped` marks a ratio > 1 forced back to 1.
struct LinkRate {
  double link_pass = 1.0;
  bool clamped = false;
};

// Converts per-node path pass estimates into per-link pass rates by the ratio
// to the parent's estimate.  `path_pass[k]` NaN means "not estimated"; the
// result holds nullopt there (and always at node 0).  A present child with a
// missing non-root parent is an error.
std::vector<std::optional<LinkRate>> links_from_paths(
    const Topology& topo, const std::vector<double>& path_pass);

}  // namespace tomo
