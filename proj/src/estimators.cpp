#include "tomo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "tomo/format.hpp"

namespace tomo {

std::string method_name(Method m) {
  switch (m) {
    case Method::Direct: return "direct";
    case Method::Omle: return "omle";
    case Method::Rse: return "rse";
    case Method::Bwe: return "bwe";
    case Method::Ibe: return "ibe";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "direct") return Method::Direct;
  if (name == "omle") return Method::Omle;
  if (name == "rse") return Method::Rse;
  if (name == "bwe") return Method::Bwe;
  if (name == "ibe") return Method::Ibe;
  throw ConfigError("unknown estimator method `" + name + "`");
}

std::string EstimatorSpec::label(const Topology& topo) const {
  std::string out = method_name(method);
  if (subset) {
    out += "_s";
    bool first = true;
    for (NodeId m : subset->members(topo)) {
      if (!first) out += '_';
      out += std::to_string(m);
      first = false;
    }
  } else if (degree) {
    out += "_d" + std::to_string(*degree);
  }
  return out;
}

std::string NodeFlags::code() const {
  std::string out;
  const auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!out.empty()) out += '|';
    out += tag;
  };
  add(clamped_high, "ch");
  add(clamped_low, "cl");
  add(degenerate_counts, "dc");
  add(root_bracket_used, "rb");
  return out.empty() ? "-" : out;
}

namespace {

void check_child_rates(const std::vector<double>& child_rates) {
  if (child_rates.size() < 2) {
    throw Error("union-product solve needs at least two child rates");
  }
  for (double r : child_rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw Error("child rate " + format_g17(r) + " outside (0,1]");
    }
  }
}

double equation_residual(double union_rate, const std::vector<double>& child_rates,
                         double a) {
  double prod = 1.0;
  for (double r : child_rates) prod *= 1.0 - r / a;
  return 1.0 - union_rate / a - prod;
}

double equation_slope(double union_rate, const std::vector<double>& child_rates,
                      double a) {
  double prod = 1.0;
  double sum = 0.0;
  for (double r : child_rates) {
    prod *= 1.0 - r / a;
    sum += r / (a * (a - r));
  }
  return union_rate / (a * a) - prod * sum;
}

// Picks the flagged endpoint estimate when no interior root exists: the
// observed union rate or 1, whichever leaves the smaller residual.
RateSolveResult degenerate_endpoints(double union_rate,
                                     const std::vector<double>& child_rates,
                                     double max_rate) {
  const double low_value = union_rate;
  const double res_low =
      equation_residual(union_rate, child_rates, std::max(low_value, max_rate));
  const double res_high = equation_residual(union_rate, child_rates, 1.0);
  RateSolveResult out;
  out.flags.degenerate_counts = true;
  if (std::abs(res_low) <= std::abs(res_high)) {
    out.path_pass = low_value;
    out.flags.clamped_low = true;
  } else {
    out.path_pass = 1.0;
    out.flags.clamped_high = true;
  }
  return out;
}

constexpr double kBracketEps = 1e-15;
constexpr double kRootTol = 1e-12;

}  // namespace

RateSolveResult solve_union_product_numeric(double union_rate,
                                            const std::vector<double>& child_rates) {
  check_child_rates(child_rates);
  const double max_rate = *std::max_element(child_rates.begin(), child_rates.end());

  double lo = max_rate + kBracketEps;
  double hi = 1.0;
  if (lo >= hi) lo = max_rate;  // max rate is 1: the root can only be 1
  double f_lo = equation_residual(union_rate, child_rates, lo);
  double f_hi = equation_residual(union_rate, child_rates, hi);

  RateSolveResult out;
  out.flags.root_bracket_used = true;
  if (f_hi == 0.0) {
    out.path_pass = 1.0;
    return out;
  }
  if (f_lo == 0.0) {
    out.path_pass = lo;
    return out;
  }
  if ((f_lo < 0.0) == (f_hi < 0.0)) {
    return degenerate_endpoints(union_rate, child_rates, max_rate);
  }

  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = equation_residual(union_rate, child_rates, mid);
    if (f_mid == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  double root = 0.5 * (lo + hi);
  for (int i = 0; i < 10; ++i) {
    const double f = equation_residual(union_rate, child_rates, root);
    if (std::abs(f) <= kRootTol) break;
    const double d = equation_slope(union_rate, child_rates, root);
    if (d == 0.0) break;
    const double next = std::clamp(root - f / d, lo, hi);
    if (next == root) break;
    root = next;
  }
  out.path_pass = std::clamp(root, max_rate, 1.0);
  return out;
}

RateSolveResult solve_union_product(double union_rate,
                                    const std::vector<double>& child_rates) {
  check_child_rates(child_rates);
  bool saturated = union_rate == 1.0;
  for (double r : child_rates) saturated = saturated && r == 1.0;
  if (saturated) {
    // every rate observed at 1: the equation holds exactly at 1
    RateSolveResult out;
    out.path_pass = 1.0;
    return out;
  }
  if (child_rates.size() == 2) {
    const double a = child_rates[0];
    const double b = child_rates[1];
    const double denom = a + b - union_rate;  // = joint rate, by counting
    if (denom > 0.0) {
      const double closed = a * b / denom;
      if (closed <= 1.0) {
        RateSolveResult out;
        out.path_pass = std::max(closed, std::max(a, b));
        return out;
      }
    }
    return degenerate_endpoints(union_rate, child_rates, std::max(a, b));
  }
  return solve_union_product_numeric(union_rate, child_rates);
}

RateSolveResult solve_joint_power(double child_rate_product, double joint_rate,
                                  int subset_size) {
  if (subset_size < 2) throw Error("joint-power solve needs subset size >= 2");
  if (!(joint_rate > 0.0)) {
    throw EstimatorError("zero simultaneous-observation rate");
  }
  if (!(child_rate_product > 0.0)) {
    throw EstimatorError("zero child rate product");
  }
  RateSolveResult out;
  const double ratio = child_rate_product / joint_rate;
  out.path_pass =
      subset_size == 2 ? ratio : std::pow(ratio, 1.0 / (subset_size - 1));
  if (out.path_pass > 1.0) {
    out.path_pass = 1.0;
    out.flags.clamped_high = true;
  }
  return out;
}

RateSolveResult solve_block_power(double sum_products, double sum_joint_rates,
                                  int degree) {
  if (degree < 2) throw Error("block-power solve needs degree >= 2");
  if (!(sum_joint_rates > 0.0)) {
    throw EstimatorError("zero simultaneous-observation rate sum");
  }
  if (!(sum_products > 0.0)) {
    throw EstimatorError("zero child rate product sum");
  }
  RateSolveResult out;
  const double ratio = sum_products / sum_joint_rates;
  out.path_pass = degree == 2 ? ratio : std::pow(ratio, 1.0 / (degree - 1));
  if (out.path_pass > 1.0) {
    out.path_pass = 1.0;
    out.flags.clamped_high = true;
  }
  return out;
}

namespace {

void require_internal(const Topology& topo, NodeId k) {
  if (k == 0 || k >= topo.node_count() || topo.is_leaf(k)) {
    throw Error("node " + std::to_string(k) + " is not a non-root internal node");
  }
}

// Child rates with zero-rate children dropped; falls back to the node's own
// observed rate when fewer than two children remain.
NodeEstimate solve_for_node(const StatsTable& stats, NodeId k, EstimatorSpec spec,
                            double union_rate, const std::vector<NodeId>& members) {
  std::vector<double> rates;
  rates.reserve(members.size());
  for (NodeId j : members) {
    const double r = stats.empirical_pass(j);
    if (r > 0.0) rates.push_back(r);
  }
  NodeEstimate est;
  est.node = k;
  est.spec = spec;
  if (rates.size() < 2) {
    est.path_pass = stats.empirical_pass(k);
    est.flags.degenerate_counts = true;
    return est;
  }
  const RateSolveResult solved = solve_union_product(union_rate, rates);
  est.path_pass = solved.path_pass;
  est.flags = solved.flags;
  return est;
}

}  // namespace

NodeEstimate omle(const StatsTable& stats, const Topology& topo, NodeId k) {
  require_internal(topo, k);
  return solve_for_node(stats, k, EstimatorSpec{Method::Omle, {}, {}},
                        stats.empirical_pass(k), topo.children(k));
}

NodeEstimate rse(const StatsTable& stats, const Topology& topo, NodeId k,
                 const Subset& x) {
  require_internal(topo, k);
  if (x.node != k) {
    throw Error("subset belongs to node " + std::to_string(x.node) +
                ", expected " + std::to_string(k));
  }
  if (x.size() < 2) throw Error("reduce-scaled estimator needs |subset| >= 2");
  const double union_rate = static_cast<double>(stats.union_count(x)) /
                            static_cast<double>(stats.probe_count());
  return solve_for_node(stats, k, EstimatorSpec{Method::Rse, x, {}}, union_rate,
                        x.members(topo));
}

NodeEstimate bwe(const StatsTable& stats, const Topology& topo, NodeId k,
                 int degree) {
  require_internal(topo, k);
  const int child_count = static_cast<int>(topo.children(k).size());
  if (degree < 2 || degree > child_count) {
    throw Error("block degree " + std::to_string(degree) +
                " out of range [2," + std::to_string(child_count) + "]");
  }
  double sum_products = 0.0;
  std::uint64_t joint_total = 0;
  for (const Subset& x : enumerate_subsets(topo, k, degree)) {
    double prod = 1.0;
    for (NodeId j : x.members(topo)) prod *= stats.empirical_pass(j);
    sum_products += prod;
    joint_total += stats.simultaneous_count(x);
  }
  const double sum_joint = static_cast<double>(joint_total) /
                           static_cast<double>(stats.probe_count());

  NodeEstimate est;
  est.node = k;
  est.spec = EstimatorSpec{Method::Bwe, {}, degree};
  const RateSolveResult solved = solve_block_power(sum_products, sum_joint, degree);
  est.path_pass = solved.path_pass;
  est.flags = solved.flags;
  est.unique_interior = sum_products < sum_joint;
  return est;
}

NodeEstimate ibe(const StatsTable& stats, const Topology& topo, NodeId k,
                 const Subset& x) {
  require_internal(topo, k);
  if (x.node != k) {
    throw Error("subset belongs to node " + std::to_string(x.node) +
                ", expected " + std::to_string(k));
  }
  if (x.size() < 2) throw Error("individual-based estimator needs |subset| >= 2");
  const double joint = static_cast<double>(stats.simultaneous_count(x)) /
                       static_cast<double>(stats.probe_count());
  double prod = 1.0;
  for (NodeId j : x.members(topo)) prod *= stats.empirical_pass(j);

  NodeEstimate est;
  est.node = k;
  est.spec = EstimatorSpec{Method::Ibe, x, {}};
  const RateSolveResult solved = solve_joint_power(prod, joint, x.size());
  est.path_pass = solved.path_pass;
  est.flags = solved.flags;
  return est;
}

Subset best_subset_by_rate_product(const StatsTable& stats, const Topology& topo,
                                   NodeId k, int size) {
  const std::vector<Subset> candidates = enumerate_subsets(topo, k, size);
  std::size_t best = 0;
  double best_product = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double prod = 1.0;
    for (NodeId j : candidates[i].members(topo)) prod *= stats.empirical_pass(j);
    if (prod > best_product) {
      best_product = prod;
      best = i;
    }
  }
  return candidates[best];
}

namespace {

NodeEstimate run_spec(const StatsTable& stats, const Topology& topo, NodeId k,
                      const EstimatorSpec& spec, int auto_subset_size) {
  const int child_count = static_cast<int>(topo.children(k).size());
  const int auto_size = std::clamp(auto_subset_size, 2, child_count);
  const auto resolve_subset = [&]() -> Subset {
    if (spec.subset) {
      if (spec.subset->node != k) {
        throw ConfigError("estimator subset targets node " +
                          std::to_string(spec.subset->node) + ", expected " +
                          std::to_string(k));
      }
      return *spec.subset;
    }
    return best_subset_by_rate_product(stats, topo, k, auto_size);
  };

  try {
    switch (spec.method) {
      case Method::Direct: {
        NodeEstimate est;
        est.node = k;
        est.path_pass = stats.empirical_pass(k);
        est.spec = spec;
        return est;
      }
      case Method::Omle:
        return omle(stats, topo, k);
      case Method::Rse:
        return rse(stats, topo, k, resolve_subset());
      case Method::Bwe:
        return bwe(stats, topo, k,
                   spec.degree ? *spec.degree : auto_size);
      case Method::Ibe:
        return ibe(stats, topo, k, resolve_subset());
    }
    throw Error("unhandled estimator method");
  } catch (const EstimatorError&) {
    // Degenerate counts (zero joint rates): keep the table complete with the
    // observed union rate and a flag.
    NodeEstimate est;
    est.node = k;
    est.path_pass = stats.empirical_pass(k);
    est.spec = spec;
    est.flags.degenerate_counts = true;
    return est;
  }
}

}  // namespace

EstimateReport estimate_tree(const ObservationMatrix& obs, const Topology& topo,
                             const TreePolicy& policy) {
  const StatsTable stats = build_stats(obs, topo);
  const std::size_t count = topo.node_count();

  EstimateReport report;
  std::vector<double> path_pass(count, std::numeric_limits<double>::quiet_NaN());
  for (NodeId k = 1; k < count; ++k) {
    NodeEstimate est;
    if (topo.is_leaf(k)) {
      est.node = k;
      est.path_pass = stats.empirical_pass(k);
      est.spec = EstimatorSpec{Method::Direct, {}, {}};
    } else {
      const auto it = policy.overrides.find(k);
      const EstimatorSpec& spec =
          it != policy.overrides.end() ? it->second : policy.default_spec;
      est = run_spec(stats, topo, k, spec, policy.auto_subset_size);
    }
    path_pass[k] = est.path_pass;
    report.nodes.push_back(std::move(est));
  }

  const auto ratios = links_from_paths(topo, path_pass);
  for (NodeId k = 1; k < count; ++k) {
    const NodeEstimate& est = report.nodes[k - 1];
    LinkEstimateRow row;
    row.node = k;
    row.parent = topo.parent(k);
    row.method = est.spec.label(topo);
    row.path_pass = est.path_pass;
    row.link_pass = ratios[k]->link_pass;
    row.loss = 1.0 - row.link_pass;
    row.flags = est.flags;
    row.ratio_clamped = ratios[k]->clamped;
    report.links.push_back(std::move(row));
  }
  return report;
}

std::string EstimateReport::to_json() const {
  nlohmann::json doc;
  nlohmann::json node_list = nlohmann::json::array();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const NodeEstimate& est = nodes[i];
    node_list.push_back({{"node", est.node},
                         {"A_hat", est.path_pass},
                         {"method", links[i].method},
                         {"flags",
                          {{"clamped_high", est.flags.clamped_high},
                           {"clamped_low", est.flags.clamped_low},
                           {"degenerate_counts", est.flags.degenerate_counts},
                           {"root_bracket_used", est.flags.root_bracket_used}}}});
  }
  doc["nodes"] = std::move(node_list);
  nlohmann::json link_list = nlohmann::json::array();
  for (const LinkEstimateRow& row : links) {
    link_list.push_back({{"node", row.node},
                         {"parent", row.parent},
                         {"alpha_hat", row.link_pass},
                         {"loss_hat", row.loss},
                         {"ratio_clamped", row.ratio_clamped}});
  }
  doc["links"] = std::move(link_list);
  return doc.dump(2) + "\n";
}

std::string EstimateReport::to_csv() const {
  std::string out = "node,link,method,A_hat,alpha_hat,loss_hat,flags\n";
  for (const LinkEstimateRow& row : links) {
    out += std::to_string(row.node);
    out += ',';
    out += std::to_string(row.parent) + "->" + std::to_string(row.node);
    out += ',';
    out += row.method;
    out += ',';
    out += format_g17(row.path_pass);
    out += ',';
    out += format_g17(row.link_pass);
    out += ',';
    out += format_g17(row.loss);
    out += ',';
    out += row.flags.code();
    out += '\n';
  }
  return out;
}

}  // namespace tomo
