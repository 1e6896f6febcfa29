#include "tomo/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "tomo/analysis.hpp"
#include "tomo/format.hpp"
#include "tomo/simulator.hpp"
#include "tomo/stats.hpp"

namespace tomo {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint64_t parse_u64(const std::string& tok, const std::string& where) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ConfigError(where + ": `" + tok + "` is not a non-negative integer");
  }
  return value;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  bool saw_samples = false;
  EstimatorConfig* current = nullptr;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    if (line.front() == '[') {
      if (line != "[estimator]") {
        throw ConfigError(where + ": unknown section `" + line + "`");
      }
      cfg.estimators.emplace_back();
      current = &cfg.estimators.back();
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(where + ": empty key or value");
    }

    if (current == nullptr) {
      if (key == "topology") {
        cfg.topology_path = value;
      } else if (key == "target") {
        cfg.target = static_cast<NodeId>(parse_u64(value, where));
      } else if (key == "samples") {
        cfg.sample_sizes.clear();
        for (const std::string& tok : split_list(value)) {
          cfg.sample_sizes.push_back(parse_u64(tok, where));
        }
        saw_samples = true;
      } else if (key == "replications") {
        cfg.replications = parse_u64(value, where);
      } else if (key == "seed") {
        cfg.master_seed = parse_u64(value, where);
      } else if (key == "out_prefix") {
        cfg.out_prefix = value;
      } else {
        throw ConfigError(where + ": unknown key `" + key + "`");
      }
      continue;
    }

    if (key == "name") {
      current->name = value;
    } else if (key == "method") {
      try {
        current->method = method_from_name(value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else if (key == "degree") {
      current->degree = static_cast<int>(parse_u64(value, where));
    } else if (key == "size") {
      current->auto_size = static_cast<int>(parse_u64(value, where));
    } else if (key == "subset") {
      std::vector<NodeId> members;
      for (const std::string& tok : split_list(value)) {
        members.push_back(static_cast<NodeId>(parse_u64(tok, where)));
      }
      if (members.empty()) {
        throw ConfigError(where + ": subset list is empty");
      }
      current->subset_members = std::move(members);
    } else {
      throw ConfigError(where + ": unknown estimator key `" + key + "`");
    }
  }

  if (cfg.topology_path.empty()) {
    throw ConfigError("config is missing the `topology` key");
  }
  if (!saw_samples || cfg.sample_sizes.empty()) {
    throw ConfigError("config is missing the `samples` list");
  }
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
    if (cfg.sample_sizes[i] == 0) {
      throw ConfigError("sample sizes must be positive");
    }
    if (i > 0 && cfg.sample_sizes[i] <= cfg.sample_sizes[i - 1]) {
      throw ConfigError("sample sizes must be strictly ascending");
    }
  }
  if (cfg.replications == 0) {
    throw ConfigError("replications must be >= 1");
  }
  if (cfg.estimators.empty()) {
    throw ConfigError("config needs at least one [estimator] section");
  }
  for (const EstimatorConfig& e : cfg.estimators) {
    const bool wants_subset = e.method == Method::Rse || e.method == Method::Ibe;
    if (e.degree && e.method != Method::Bwe) {
      throw ConfigError("`degree` applies only to the block estimator");
    }
    if (e.subset_members && !wants_subset) {
      throw ConfigError("`subset` applies only to the subset estimators");
    }
    if (e.auto_size && !wants_subset) {
      throw ConfigError("`size` applies only to the subset estimators");
    }
  }
  return cfg;
}

namespace {

struct ResolvedEstimator {
  std::string name;
  EstimatorSpec spec;
  int auto_size = 2;
};

std::vector<ResolvedEstimator> resolve_estimators(const ExperimentConfig& cfg,
                                                  const Topology& topo) {
  std::vector<ResolvedEstimator> out;
  for (const EstimatorConfig& e : cfg.estimators) {
    ResolvedEstimator r;
    r.spec.method = e.method;
    if (e.subset_members) {
      try {
        r.spec.subset = Subset::of_children(topo, cfg.target, *e.subset_members);
      } catch (const Error& ex) {
        throw ConfigError(std::string("bad estimator subset: ") + ex.what());
      }
      if (r.spec.subset->size() < 2) {
        throw ConfigError("estimator subsets need at least two members");
      }
    }
    if (e.degree) {
      const int child_count = static_cast<int>(topo.children(cfg.target).size());
      if (*e.degree < 2 || *e.degree > child_count) {
        throw ConfigError("estimator degree " + std::to_string(*e.degree) +
                          " out of range [2," + std::to_string(child_count) +
                          "] for the target node");
      }
      r.spec.degree = *e.degree;
    }
    if (e.auto_size) r.auto_size = *e.auto_size;
    r.name = e.name.empty() ? r.spec.label(topo) : e.name;
    out.push_back(std::move(r));
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a].name == out[b].name) {
        throw ConfigError("duplicate estimator name `" + out[a].name +
                          "`; set distinct `name` keys");
      }
    }
  }
  return out;
}

NodeEstimate run_estimator(const StatsTable& stats, const Topology& topo,
                           NodeId target, const ResolvedEstimator& e) {
  try {
    switch (e.spec.method) {
      case Method::Direct: {
        NodeEstimate est;
        est.node = target;
        est.path_pass = stats.empirical_pass(target);
        est.spec = e.spec;
        return est;
      }
      case Method::Omle:
        return omle(stats, topo, target);
      case Method::Rse:
        return rse(stats, topo, target,
                   e.spec.subset ? *e.spec.subset
                                 : best_subset_by_rate_product(stats, topo, target,
                                                               e.auto_size));
      case Method::Bwe:
        return bwe(stats, topo, target,
                   e.spec.degree ? *e.spec.degree : e.auto_size);
      case Method::Ibe:
        return ibe(stats, topo, target,
                   e.spec.subset ? *e.spec.subset
                                 : best_subset_by_rate_product(stats, topo, target,
                                                               e.auto_size));
    }
    throw Error("unhandled estimator method");
  } catch (const EstimatorError&) {
    NodeEstimate est;
    est.node = target;
    est.path_pass = stats.empirical_pass(target);
    est.spec = e.spec;
    est.flags.degenerate_counts = true;
    return est;
  }
}

void fill_crlb(CellSummary& cell, const ResolvedEstimator& e, const Topology& topo,
               const LinkParams& params, NodeId target) {
  const double path = params.path_pass(target);
  if (path >= 1.0) return;  // boundary: no finite information reference
  const Subset full = Subset::full(topo, target);
  try {
    switch (e.spec.method) {
      case Method::Direct:
        cell.crlb_var_per_obs =
            fisher(e.spec, path, 1.0, RateSource::TrueParams).crlb_var_per_obs;
        break;
      case Method::Omle:
        cell.crlb_var_per_obs =
            fisher(e.spec, path, beta_subset(topo, params, full),
                   RateSource::TrueParams)
                .crlb_var_per_obs;
        break;
      case Method::Rse:
        if (e.spec.subset) {
          cell.crlb_var_per_obs =
              fisher(e.spec, path, beta_subset(topo, params, *e.spec.subset),
                     RateSource::TrueParams)
                  .crlb_var_per_obs;
        }
        break;
      case Method::Ibe:
        if (e.spec.subset) {
          cell.crlb_var_per_obs =
              fisher(e.spec, path, psi(topo, params, *e.spec.subset),
                     RateSource::TrueParams)
                  .crlb_var_per_obs;
        }
        break;
      case Method::Bwe: {
        const int child_count = static_cast<int>(topo.children(target).size());
        const int degree = e.spec.degree ? *e.spec.degree : e.auto_size;
        // Symmetric-children reference: psi of the canonical first subset.
        const auto subsets = enumerate_subsets(topo, target, degree);
        const auto [info_lo, info_hi] = bwe_info_bounds(
            child_count, degree, path, psi(topo, params, subsets.front()));
        cell.crlb_var_range = std::make_pair(1.0 / info_hi, 1.0 / info_lo);
        break;
      }
    }
  } catch (const Error&) {
    // Reference values are advisory; leave them absent if undefined.
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Topology& topo,
                                const LinkParams& params) {
  if (cfg.target >= topo.node_count() || topo.is_leaf(cfg.target) ||
      topo.parent(cfg.target) != 0) {
    throw ConfigError(
        "target must be the root link's child (an internal node whose parent "
        "is node 0)");
  }
  const NodeId target = cfg.target;
  const std::vector<ResolvedEstimator> estimators = resolve_estimators(cfg, topo);

  ExperimentReport report;
  report.config = cfg;
  for (const ResolvedEstimator& e : estimators) {
    report.estimator_names.push_back(e.name);
  }

  // losses[e][n_index] collects per-replication values in replication order.
  std::vector<std::vector<std::vector<double>>> losses(
      estimators.size(),
      std::vector<std::vector<double>>(cfg.sample_sizes.size()));
  std::vector<std::vector<std::vector<double>>> paths = losses;
  std::vector<std::vector<std::uint64_t>> flagged(
      estimators.size(), std::vector<std::uint64_t>(cfg.sample_sizes.size(), 0));

  TreePolicy full_policy;
  full_policy.default_spec = EstimatorSpec{Method::Omle, {}, {}};

  for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
    const std::uint64_t n = cfg.sample_sizes[ni];
    LinkLossSummary link_summary;
    link_summary.sample_size = n;
    link_summary.mean_loss_by_node.assign(topo.node_count(), 0.0);

    for (std::uint64_t rep = 0; rep < cfg.replications; ++rep) {
      const ObservationMatrix obs =
          simulate(topo, params, n, SeedSpec{cfg.master_seed, rep});
      const StatsTable stats = build_stats(obs, topo);

      for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
        const NodeEstimate est = run_estimator(stats, topo, target, estimators[ei]);
        const double loss = 1.0 - est.path_pass;
        losses[ei][ni].push_back(loss);
        paths[ei][ni].push_back(est.path_pass);
        if (est.flags.problem()) ++flagged[ei][ni];
        report.replications.push_back(RepRecord{
            n, rep, estimators[ei].name, est.path_pass, loss, est.flags});
      }

      const EstimateReport tree = estimate_tree(obs, topo, full_policy);
      for (const LinkEstimateRow& row : tree.links) {
        link_summary.mean_loss_by_node[row.node] += row.loss;
      }
    }
    for (double& sum : link_summary.mean_loss_by_node) {
      sum /= static_cast<double>(cfg.replications);
    }
    report.link_losses.push_back(std::move(link_summary));
  }

  for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
      CellSummary cell;
      cell.estimator = estimators[ei].name;
      cell.sample_size = cfg.sample_sizes[ni];
      const auto& ls = losses[ei][ni];
      const auto& ps = paths[ei][ni];
      const double count = static_cast<double>(ls.size());
      for (double v : ls) cell.mean_loss += v;
      for (double v : ps) cell.mean_path_pass += v;
      cell.mean_loss /= count;
      cell.mean_path_pass /= count;
      for (double v : ls) {
        cell.var_loss += (v - cell.mean_loss) * (v - cell.mean_loss);
      }
      for (double v : ps) {
        cell.var_path_pass += (v - cell.mean_path_pass) * (v - cell.mean_path_pass);
      }
      cell.var_loss /= count;  // population variance, divisor N
      cell.var_path_pass /= count;
      cell.flagged = flagged[ei][ni];
      fill_crlb(cell, estimators[ei], topo, params, target);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string ExperimentReport::summary_csv() const {
  std::string out = "estimator,n,mean,var,flags\n";
  for (const CellSummary& cell : cells) {
    out += cell.estimator;
    out += ',';
    out += std::to_string(cell.sample_size);
    out += ',';
    out += format_g17(cell.mean_loss);
    out += ',';
    out += format_g17(cell.var_loss);
    out += ',';
    out += std::to_string(cell.flagged);
    out += '\n';
  }
  return out;
}

std::string ExperimentReport::per_rep_csv() const {
  std::string out = "n,rep,estimator,A_hat,loss_hat,flags\n";
  for (const RepRecord& rec : replications) {
    out += std::to_string(rec.sample_size);
    out += ',';
    out += std::to_string(rec.replication);
    out += ',';
    out += rec.estimator;
    out += ',';
    out += format_g17(rec.path_pass);
    out += ',';
    out += format_g17(rec.loss);
    out += ',';
    out += rec.flags.code();
    out += '\n';
  }
  return out;
}

std::string ExperimentReport::to_json() const {
  nlohmann::json doc;
  doc["topology"] = config.topology_path;
  doc["target"] = config.target;
  doc["samples"] = config.sample_sizes;
  doc["replications"] = config.replications;
  doc["master_seed"] = config.master_seed;
  doc["estimators"] = estimator_names;

  nlohmann::json cell_list = nlohmann::json::array();
  for (const CellSummary& cell : cells) {
    nlohmann::json c = {{"estimator", cell.estimator},
                        {"n", cell.sample_size},
                        {"mean_loss", cell.mean_loss},
                        {"var_loss", cell.var_loss},
                        {"mean_A_hat", cell.mean_path_pass},
                        {"var_A_hat", cell.var_path_pass},
                        {"flagged", cell.flagged}};
    if (cell.crlb_var_per_obs) {
      c["crlb_var_per_obs"] = *cell.crlb_var_per_obs;
    }
    if (cell.crlb_var_range) {
      c["crlb_var_per_obs_range"] = {cell.crlb_var_range->first,
                                     cell.crlb_var_range->second};
    }
    cell_list.push_back(std::move(c));
  }
  doc["cells"] = std::move(cell_list);

  nlohmann::json link_list = nlohmann::json::array();
  for (const LinkLossSummary& summary : link_losses) {
    nlohmann::json by_node = nlohmann::json::object();
    for (std::size_t k = 1; k < summary.mean_loss_by_node.size(); ++k) {
      by_node[std::to_string(k)] = summary.mean_loss_by_node[k];
    }
    link_list.push_back(
        {{"n", summary.sample_size}, {"mean_loss_by_link", std::move(by_node)}});
  }
  doc["link_loss_means"] = std::move(link_list);
  return doc.dump(2) + "\n";
}

}  // namespace tomo
