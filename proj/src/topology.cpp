#include "tomo/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace tomo {

namespace {

std::string node_str(NodeId k) { return std::to_string(k); }

std::string format_rate(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_rate_range(double rate, const std::string& where) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw TopologyError(TopologyError::Kind::BadRate,
                        where + ": pass rate " + format_rate(rate) +
                            " outside (0,1]");
  }
}

}  // namespace

Topology Topology::from_edges(const std::vector<std::pair<NodeId, NodeId>>& edges) {
  NodeId max_id = 0;
  for (const auto& [child, parent] : edges) {
    max_id = std::max({max_id, child, parent});
  }
  const std::size_t count = edges.empty() ? 1 : static_cast<std::size_t>(max_id) + 1;

  Topology topo;
  topo.parent_.assign(count, 0);
  topo.children_.assign(count, {});
  std::vector<bool> has_parent(count, false);

  for (const auto& [child, parent] : edges) {
    if (child == 0) {
      throw TopologyError(TopologyError::Kind::Syntax,
                          "node 0 is the root and cannot have a parent");
    }
    if (child == parent) {
      throw TopologyError(TopologyError::Kind::Cycle,
                          "node " + node_str(child) + " is its own parent");
    }
    if (has_parent[child]) {
      throw TopologyError(TopologyError::Kind::MultipleParents,
                          "node " + node_str(child) + " has multiple parents");
    }
    has_parent[child] = true;
    topo.parent_[child] = parent;
    topo.children_[parent].push_back(child);
  }

  for (NodeId k = 1; k < count; ++k) {
    if (!has_parent[k]) {
      throw TopologyError(TopologyError::Kind::NonDenseIds,
                          "node ids are not dense: node " + node_str(k) +
                              " has no parent entry");
    }
  }

  for (NodeId k = 1; k < count; ++k) {
    NodeId cur = k;
    std::size_t steps = 0;
    while (cur != 0) {
      cur = topo.parent_[cur];
      if (++steps > count) {
        throw TopologyError(TopologyError::Kind::Cycle,
                            "cycle detected through node " + node_str(k));
      }
    }
  }

  if (topo.children_[0].size() != 1) {
    throw TopologyError(TopologyError::Kind::RootDegree,
                        "root must have exactly one child, found " +
                            std::to_string(topo.children_[0].size()));
  }
  if (topo.children_[0][0] != 1) {
    throw TopologyError(TopologyError::Kind::RootDegree,
                        "the root's child must be node 1, found node " +
                            node_str(topo.children_[0][0]));
  }
  for (NodeId k = 1; k < count; ++k) {
    if (topo.children_[k].size() == 1) {
      throw TopologyError(TopologyError::Kind::UnidentifiableChain,
                          "unidentifiable chain: internal node " + node_str(k) +
                              " has exactly one child");
    }
  }

  topo.receiver_col_.assign(count, -1);
  for (NodeId k = 0; k < count; ++k) {
    if (topo.children_[k].empty()) topo.receivers_.push_back(k);
  }
  for (std::size_t c = 0; c < topo.receivers_.size(); ++c) {
    topo.receiver_col_[topo.receivers_[c]] = static_cast<std::int64_t>(c);
  }

  topo.preorder_.reserve(count);
  std::vector<NodeId> stack{0};
  while (!stack.empty()) {
    const NodeId k = stack.back();
    stack.pop_back();
    topo.preorder_.push_back(k);
    const auto& kids = topo.children_[k];
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }

  topo.subtree_receivers_.assign(count, {});
  for (auto it = topo.preorder_.rbegin(); it != topo.preorder_.rend(); ++it) {
    const NodeId k = *it;
    auto& rec = topo.subtree_receivers_[k];
    if (topo.children_[k].empty()) {
      rec = {k};
    } else {
      for (NodeId j : topo.children_[k]) {
        const auto& sub = topo.subtree_receivers_[j];
        rec.insert(rec.end(), sub.begin(), sub.end());
      }
      std::sort(rec.begin(), rec.end());
    }
  }

  return topo;
}

std::size_t Topology::receiver_column(NodeId j) const {
  if (j >= receiver_col_.size() || receiver_col_[j] < 0) {
    throw Error("node " + node_str(j) + " is not a receiver");
  }
  return static_cast<std::size_t>(receiver_col_[j]);
}

bool ParsedTopology::has_full_rates() const {
  for (std::size_t k = 1; k < link_pass.size(); ++k) {
    if (std::isnan(link_pass[k])) return false;
  }
  return true;
}

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct RawEdge {
  NodeId child;
  NodeId parent;
  double rate;  // NaN when absent
};

ParsedTopology assemble(const std::vector<RawEdge>& raw) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(raw.size());
  for (const RawEdge& e : raw) edges.emplace_back(e.child, e.parent);

  Topology topo = Topology::from_edges(edges);
  std::vector<double> rates(topo.node_count(), kMissing);
  for (const RawEdge& e : raw) rates[e.child] = e.rate;
  return ParsedTopology{std::move(topo), std::move(rates)};
}

bool parse_node_id(const std::string& tok, NodeId& out) {
  if (tok.empty()) return false;
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return false;
  if (value > std::numeric_limits<NodeId>::max()) return false;
  out = static_cast<NodeId>(value);
  return true;
}

ParsedTopology parse_text(const std::string& text) {
  std::vector<RawEdge> raw;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream fields(line);
    std::vector<std::string> toks;
    for (std::string tok; fields >> tok;) toks.push_back(tok);
    if (toks.empty()) continue;

    const std::string where = "line " + std::to_string(line_no);
    if (toks.size() < 2 || toks.size() > 3) {
      throw TopologyError(TopologyError::Kind::Syntax,
                          where + ": expected `child parent [rate]`, got " +
                              std::to_string(toks.size()) + " fields");
    }
    RawEdge e{0, 0, kMissing};
    if (!parse_node_id(toks[0], e.child) || !parse_node_id(toks[1], e.parent)) {
      throw TopologyError(TopologyError::Kind::Syntax,
                          where + ": node ids must be non-negative integers");
    }
    if (toks.size() == 3) {
      char* end = nullptr;
      e.rate = std::strtod(toks[2].c_str(), &end);
      if (end != toks[2].c_str() + toks[2].size()) {
        throw TopologyError(TopologyError::Kind::Syntax,
                            where + ": malformed rate `" + toks[2] + "`");
      }
      check_rate_range(e.rate, where);
    }
    raw.push_back(e);
  }
  return assemble(raw);
}

ParsedTopology parse_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw TopologyError(TopologyError::Kind::Syntax,
                        std::string("JSON parse failure: ") + ex.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw TopologyError(TopologyError::Kind::Syntax,
                        "JSON topology must be an object with a `nodes` array");
  }

  std::vector<RawEdge> raw;
  for (const auto& node : doc["nodes"]) {
    if (!node.is_object() || !node.contains("id") ||
        !node["id"].is_number_unsigned()) {
      throw TopologyError(TopologyError::Kind::Syntax,
                          "each node needs a non-negative integer `id`");
    }
    const auto id64 = node["id"].get<std::uint64_t>();
    if (id64 > std::numeric_limits<NodeId>::max()) {
      throw TopologyError(TopologyError::Kind::Syntax, "node id out of range");
    }
    const NodeId id = static_cast<NodeId>(id64);
    const bool has_parent = node.contains("parent") && !node["parent"].is_null();
    if (id == 0) {
      if (has_parent) {
        throw TopologyError(TopologyError::Kind::Syntax,
                            "node 0 is the root and cannot have a parent");
      }
      continue;
    }
    if (!has_parent || !node["parent"].is_number_unsigned()) {
      throw TopologyError(TopologyError::Kind::Syntax,
                          "node " + node_str(id) +
                              ": `parent` must be a non-negative integer");
    }
    RawEdge e{id, static_cast<NodeId>(node["parent"].get<std::uint64_t>()), kMissing};
    if (node.contains("alpha") && !node["alpha"].is_null()) {
      if (!node["alpha"].is_number()) {
        throw TopologyError(TopologyError::Kind::Syntax,
                            "node " + node_str(id) + ": `alpha` must be a number");
      }
      e.rate = node["alpha"].get<double>();
      check_rate_range(e.rate, "node " + node_str(id));
    }
    raw.push_back(e);
  }
  return assemble(raw);
}

}  // namespace

ParsedTopology parse_topology(const std::string& text) {
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
    if (c == '{') return parse_json(text);
    break;
  }
  return parse_text(text);
}

std::string serialize(const Topology& topo) {
  return serialize(topo, std::vector<double>(topo.node_count(), kMissing));
}

std::string serialize(const Topology& topo, const std::vector<double>& link_pass) {
  std::string out;
  for (NodeId k : topo.preorder()) {
    for (NodeId child : topo.children(k)) {
      out += node_str(child);
      out += ' ';
      out += node_str(k);
      if (child < link_pass.size() && !std::isnan(link_pass[child])) {
        out += ' ';
        out += format_rate(link_pass[child]);
      }
      out += '\n';
    }
  }
  return out;
}

LinkParams LinkParams::derive(const Topology& topo, const std::vector<double>& link_pass) {
  const std::size_t count = topo.node_count();
  if (link_pass.size() != count) {
    throw TopologyError(TopologyError::Kind::BadRate,
                        "need one link pass rate per node (index 0 unused), got " +
                            std::to_string(link_pass.size()) + " for " +
                            std::to_string(count) + " nodes");
  }
  for (NodeId k = 1; k < count; ++k) {
    if (std::isnan(link_pass[k])) {
      throw TopologyError(TopologyError::Kind::BadRate,
                          "missing pass rate for link " + node_str(k));
    }
    check_rate_range(link_pass[k], "link " + node_str(k));
  }

  LinkParams params;
  params.link_pass_ = link_pass;
  params.link_pass_[0] = 1.0;
  params.path_pass_.assign(count, 1.0);
  params.subtree_pass_.assign(count, 1.0);
  params.tree_pass_.assign(count, 1.0);

  for (NodeId k : topo.preorder()) {
    if (k == 0) continue;
    params.path_pass_[k] = params.path_pass_[topo.parent(k)] * link_pass[k];
  }
  const auto& order = topo.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId k = *it;
    if (topo.is_leaf(k)) {
      params.subtree_pass_[k] = 1.0;
    } else {
      double miss_all = 1.0;
      for (NodeId j : topo.children(k)) {
        miss_all *= 1.0 - params.link_pass_[j] * params.subtree_pass_[j];
      }
      params.subtree_pass_[k] = 1.0 - miss_all;
    }
    params.tree_pass_[k] = params.path_pass_[k] * params.subtree_pass_[k];
  }
  return params;
}

std::vector<std::optional<LinkRate>> links_from_paths(
    const Topology& topo, const std::vector<double>& path_pass) {
  const std::size_t count = topo.node_count();
  if (path_pass.size() != count) {
    throw Error("need one path pass estimate slot per node, got " +
                std::to_string(path_pass.size()) + " for " +
                std::to_string(count) + " nodes");
  }
  std::vector<std::optional<LinkRate>> out(count);
  for (NodeId k = 1; k < count; ++k) {
    if (std::isnan(path_pass[k])) continue;
    if (!(path_pass[k] >= 0.0 && path_pass[k] <= 1.0)) {
      throw Error("path estimate for node " + node_str(k) + " outside [0,1]: " +
                  format_rate(path_pass[k]));
    }
    const NodeId p = topo.parent(k);
    double parent_pass = 1.0;
    if (p != 0) {
      if (std::isnan(path_pass[p])) {
        throw Error("node " + node_str(k) + " has a path estimate but parent " +
                    node_str(p) + " does not");
      }
      parent_pass = path_pass[p];
    }
    LinkRate rate;
    if (parent_pass == 0.0) {
      // Nothing reached the parent's subtree; the child's share is undefined,
      // reported as a fully lossy link.
      rate.link_pass = 0.0;
    } else {
      rate.link_pass = path_pass[k] / parent_pass;
    }
    if (rate.link_pass > 1.0) {
      rate.link_pass = 1.0;
      rate.clamped = true;
    }
    out[k] = rate;
  }
  return out;
}

}  // namespace tomo
