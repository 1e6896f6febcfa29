#include "tomo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tomo/analysis.hpp"
#include "tomo/estimators.hpp"
#include "tomo/experiment.hpp"
#include "tomo/format.hpp"
#include "tomo/observation.hpp"
#include "tomo/simulator.hpp"
#include "tomo/stats.hpp"
#include "tomo/topology.hpp"

namespace tomo {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open `" + path + "` for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open `" + path + "` for writing");
  out << content;
  if (!out) throw Error("write to `" + path + "` failed");
}

void emit(const std::string& content, const std::string& out_path,
          std::ostream& out) {
  if (out_path.empty()) {
    out << content;
  } else {
    write_file(out_path, content);
  }
}

ParsedTopology load_topology(const std::string& path) {
  return parse_topology(read_file(path));
}

LinkParams load_params(const ParsedTopology& parsed, const std::string& path) {
  if (!parsed.has_full_rates()) {
    throw Error("topology file `" + path +
                "` must carry a pass rate on every link for this command");
  }
  return derive_params(parsed.topology, parsed.link_pass);
}

// "2 3" or "2,3" -> {2, 3}
std::vector<NodeId> parse_id_list(const std::string& text) {
  std::vector<NodeId> ids;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ' ')) {
    std::istringstream comma(token);
    std::string part;
    while (std::getline(comma, part, ',')) {
      if (part.empty()) continue;
      try {
        const unsigned long value = std::stoul(part);
        ids.push_back(static_cast<NodeId>(value));
      } catch (const std::exception&) {
        throw ConfigError("invalid node id `" + part + "` in subset list");
      }
    }
  }
  if (ids.empty()) throw ConfigError("subset list is empty");
  return ids;
}

EstimatorSpec build_spec(const Topology& topo, NodeId node,
                         const std::string& method,
                         const std::vector<NodeId>& subset, int degree) {
  EstimatorSpec spec;
  spec.method = method_from_name(method);
  if (!subset.empty()) {
    spec.subset = Subset::of_children(topo, node, subset);
  }
  if (degree > 0) spec.degree = degree;
  return spec;
}

nlohmann::json info_row(const std::string& label, double path_pass, double delta,
                        RateSource source) {
  nlohmann::json row;
  row["method"] = label;
  row["delta"] = delta;
  try {
    const InfoResult info = fisher(EstimatorSpec{}, path_pass, delta, source);
    row["fisher_per_obs"] = info.fisher_per_obs;
    row["crlb_var_per_obs"] = info.crlb_var_per_obs;
  } catch (const Error&) {
    row["fisher_per_obs"] = nullptr;
    row["crlb_var_per_obs"] = nullptr;
  }
  return row;
}

std::string analyze_csv(const nlohmann::json& doc) {
  std::string out = "node,method,delta,fisher_per_obs,crlb_var_per_obs\n";
  const std::string node = doc["node"].dump();
  for (const auto& row : doc["rows"]) {
    out += node;
    out += ',';
    out += row["method"].get<std::string>();
    out += ',';
    out += format_g17(row["delta"].get<double>());
    out += ',';
    out += row["fisher_per_obs"].is_null()
               ? ""
               : format_g17(row["fisher_per_obs"].get<double>());
    out += ',';
    out += row["crlb_var_per_obs"].is_null()
               ? ""
               : format_g17(row["crlb_var_per_obs"].get<double>());
    out += '\n';
  }
  return out;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Multicast loss tomography: simulate probe trees and estimate "
               "per-link loss rates from receiver observations"};
  app.require_subcommand(1);

  // --- simulate ---
  std::string sim_topo, sim_out, sim_format = "text";
  std::uint64_t sim_n = 0, sim_seed = 0, sim_rep = 0;
  auto* sim = app.add_subcommand(
      "simulate", "Propagate probes down a tree and write the observations");
  sim->add_option("--topology", sim_topo, "topology file with link pass rates")
      ->required();
  sim->add_option("--n", sim_n, "probe count")->required();
  sim->add_option("--seed", sim_seed, "master seed (default 0)");
  sim->add_option("--rep", sim_rep, "replication index (default 0)");
  sim->add_option("--out", sim_out, "output file (default stdout)");
  sim->add_option("--format", sim_format, "text|binary (default text)")
      ->check(CLI::IsMember({"text", "binary"}));
  sim->callback([&] {
    const ParsedTopology parsed = load_topology(sim_topo);
    const LinkParams params = load_params(parsed, sim_topo);
    const ObservationMatrix obs =
        simulate(parsed.topology, params, sim_n, SeedSpec{sim_seed, sim_rep});
    emit(sim_format == "binary" ? write_observations_binary(obs)
                                : write_observations_text(obs),
         sim_out, out);
  });

  // --- stats ---
  std::string stats_obs, stats_topo, stats_out;
  std::size_t stats_limit = 8;
  auto* stats_cmd = app.add_subcommand(
      "stats", "Dump per-node rates and subset counts for an observation file");
  stats_cmd->add_option("--obs", stats_obs, "observation file")->required();
  stats_cmd->add_option("--topology", stats_topo, "topology file")->required();
  stats_cmd->add_option("--subset-limit", stats_limit,
                        "max children for per-subset dumps (default 8)");
  stats_cmd->add_option("--out", stats_out, "output file (default stdout)");
  stats_cmd->callback([&] {
    const ParsedTopology parsed = load_topology(stats_topo);
    const ObservationMatrix obs = read_observations(read_file(stats_obs));
    const StatsTable stats = build_stats(obs, parsed.topology);
    emit(stats.dump_json(stats_limit), stats_out, out);
  });

  // --- estimate ---
  std::string est_obs, est_topo, est_method = "omle", est_format = "csv", est_out;
  std::string est_subset;
  int est_degree = 0, est_auto_size = 2;
  auto* est = app.add_subcommand(
      "estimate", "Estimate per-link loss rates from an observation file");
  est->add_option("--obs", est_obs, "observation file")->required();
  est->add_option("--topology", est_topo, "topology file")->required();
  est->add_option("--method", est_method, "direct|omle|rse|bwe|ibe (default omle)");
  est->add_option("--subset", est_subset,
                  "child node ids for the subset estimators, e.g. \"2 3\" "
                  "(target node 1)");
  est->add_option("--degree", est_degree, "block size for the block estimator");
  est->add_option("--size", est_auto_size,
                  "auto-picked subset size when --subset is absent (default 2)");
  est->add_option("--format", est_format, "csv|json (default csv)")
      ->check(CLI::IsMember({"csv", "json"}));
  est->add_option("--out", est_out, "output file (default stdout)");
  est->callback([&] {
    const ParsedTopology parsed = load_topology(est_topo);
    const ObservationMatrix obs = read_observations(read_file(est_obs));
    TreePolicy policy;
    policy.auto_subset_size = est_auto_size;
    policy.default_spec.method = method_from_name(est_method);
    if (est_degree > 0) policy.default_spec.degree = est_degree;
    if (!est_subset.empty()) {
      // An explicit subset can only target one node; apply it to node 1 and
      // let every other node auto-resolve.
      policy.overrides[1] = build_spec(parsed.topology, 1, est_method,
                                       parse_id_list(est_subset), est_degree);
    }
    const EstimateReport report = estimate_tree(obs, parsed.topology, policy);
    emit(est_format == "json" ? report.to_json() : report.to_csv(), est_out, out);
  });

  // --- analyze ---
  std::string ana_topo, ana_obs, ana_format = "json", ana_out;
  NodeId ana_node = 1;
  int ana_budget = 2;
  auto* ana = app.add_subcommand(
      "analyze",
      "Information and variance bounds per estimator at one node (true "
      "parameters, or plug-in estimates with --obs)");
  ana->add_option("--topology", ana_topo, "topology file")->required();
  ana->add_option("--obs", ana_obs, "observation file (plug-in mode)");
  ana->add_option("--node", ana_node, "internal node to analyze (default 1)");
  ana->add_option("--budget", ana_budget,
                  "subset-size budget for the selected spec (default 2)");
  ana->add_option("--format", ana_format, "json|csv (default json)")
      ->check(CLI::IsMember({"json", "csv"}));
  ana->add_option("--out", ana_out, "output file (default stdout)");
  ana->callback([&] {
    const ParsedTopology parsed = load_topology(ana_topo);
    const Topology& topo = parsed.topology;
    if (ana_node == 0 || ana_node >= topo.node_count() || topo.is_leaf(ana_node)) {
      throw Error("analyze needs a non-root internal node");
    }

    std::vector<double> tree_pass(topo.node_count());
    double path_pass = 1.0;
    RateSource source = RateSource::TrueParams;
    std::optional<std::string> selected;
    if (ana_obs.empty()) {
      const LinkParams params = load_params(parsed, ana_topo);
      for (NodeId j = 0; j < topo.node_count(); ++j) {
        tree_pass[j] = params.tree_pass(j);
      }
      path_pass = params.path_pass(ana_node);
      const EfficiencyOrder order = efficiency_order(topo, ana_node, params);
      selected = EstimatorSpec{Method::Ibe, order.subsets[order.ranking[0]], {}}
                     .label(topo);
    } else {
      source = RateSource::PlugIn;
      const ObservationMatrix obs = read_observations(read_file(ana_obs));
      const StatsTable stats = build_stats(obs, topo);
      for (NodeId j = 0; j < topo.node_count(); ++j) {
        tree_pass[j] = stats.empirical_pass(j);
      }
      path_pass = omle(stats, topo, ana_node).path_pass;
      try {
        selected = select_model(stats, topo, ana_node, ana_budget).label(topo);
      } catch (const Error&) {
        // leave absent when no subset has usable counts
      }
    }

    nlohmann::json doc;
    doc["node"] = ana_node;
    doc["A"] = path_pass;
    doc["source"] = source == RateSource::TrueParams ? "true" : "plugin";
    if (selected) doc["selected_spec"] = *selected;

    nlohmann::json rows = nlohmann::json::array();
    rows.push_back(info_row("direct", path_pass, 1.0, source));
    const int child_count = static_cast<int>(topo.children(ana_node).size());
    const Subset full = Subset::full(topo, ana_node);
    rows.push_back(info_row("omle", path_pass,
                            beta_subset(topo, full, tree_pass, path_pass), source));
    for (int size = 2; size <= child_count; ++size) {
      for (const Subset& x : enumerate_subsets(topo, ana_node, size)) {
        const EstimatorSpec rse_spec{Method::Rse, x, {}};
        const EstimatorSpec ibe_spec{Method::Ibe, x, {}};
        rows.push_back(info_row(rse_spec.label(topo), path_pass,
                                beta_subset(topo, x, tree_pass, path_pass),
                                source));
        rows.push_back(info_row(ibe_spec.label(topo), path_pass,
                                psi(topo, x, tree_pass, path_pass), source));
      }
    }
    doc["rows"] = std::move(rows);

    nlohmann::json bounds = nlohmann::json::array();
    if (path_pass < 1.0) {
      for (int degree = 2; degree <= child_count; ++degree) {
        const auto subsets = enumerate_subsets(topo, ana_node, degree);
        const auto [lo, hi] = bwe_info_bounds(
            child_count, degree, path_pass,
            psi(topo, subsets.front(), tree_pass, path_pass));
        bounds.push_back({{"degree", degree},
                          {"info_per_obs_lower", lo},
                          {"info_per_obs_upper", hi},
                          {"crlb_var_per_obs_lower", 1.0 / hi},
                          {"crlb_var_per_obs_upper", 1.0 / lo}});
      }
    }
    doc["bwe_bounds"] = std::move(bounds);

    emit(ana_format == "csv" ? analyze_csv(doc) : doc.dump(2) + "\n", ana_out, out);
  });

  // --- select ---
  std::string sel_obs, sel_topo, sel_out;
  int sel_budget = 2;
  auto* sel = app.add_subcommand(
      "select", "Pick the best estimator spec per internal node from data");
  sel->add_option("--obs", sel_obs, "observation file")->required();
  sel->add_option("--topology", sel_topo, "topology file")->required();
  sel->add_option("--budget", sel_budget, "max subset size (default 2)");
  sel->add_option("--out", sel_out, "output file (default stdout)");
  sel->callback([&] {
    const ParsedTopology parsed = load_topology(sel_topo);
    const ObservationMatrix obs = read_observations(read_file(sel_obs));
    const StatsTable stats = build_stats(obs, parsed.topology);
    std::string csv = "node,spec\n";
    for (NodeId k = 1; k < parsed.topology.node_count(); ++k) {
      if (parsed.topology.is_leaf(k)) continue;
      const EstimatorSpec spec = select_model(stats, parsed.topology, k, sel_budget);
      csv += std::to_string(k) + "," + spec.label(parsed.topology) + "\n";
    }
    emit(csv, sel_out, out);
  });

  // --- experiment ---
  std::string exp_config, exp_out_dir;
  auto* exp = app.add_subcommand(
      "experiment", "Run a replicated simulation/estimation grid from a config");
  exp->add_option("--config", exp_config, "experiment config file")->required();
  exp->add_option("--out-dir", exp_out_dir,
                  "directory for emitted files (default: config's directory)");
  exp->callback([&] {
    const ExperimentConfig cfg = parse_experiment_config(read_file(exp_config));
    const std::filesystem::path cfg_dir =
        std::filesystem::path(exp_config).parent_path();
    std::filesystem::path topo_path(cfg.topology_path);
    if (topo_path.is_relative()) topo_path = cfg_dir / topo_path;

    const ParsedTopology parsed = load_topology(topo_path.string());
    const LinkParams params = load_params(parsed, topo_path.string());
    const ExperimentReport report = run_experiment(cfg, parsed.topology, params);

    const std::string stem = cfg.out_prefix.empty()
                                 ? std::filesystem::path(exp_config).stem().string()
                                 : cfg.out_prefix;
    std::filesystem::path dir =
        exp_out_dir.empty() ? cfg_dir : std::filesystem::path(exp_out_dir);
    if (dir.empty()) dir = ".";
    std::filesystem::create_directories(dir);
    write_file((dir / (stem + "_summary.csv")).string(), report.summary_csv());
    write_file((dir / (stem + "_reps.csv")).string(), report.per_rep_csv());
    write_file((dir / (stem + "_report.json")).string(), report.to_json());
    out << report.summary_csv();
  });

  // --- example ---
  double ex_alpha = 0.0;
  auto* ex = app.add_subcommand(
      "example",
      "Closed-form per-observation variances for the symmetric three-leaf "
      "example at a common pass rate");
  ex->add_option("--alpha", ex_alpha, "common pass rate in (0,1)")->required();
  ex->callback([&] {
    const WorkedExample w = worked_example(ex_alpha);
    const auto round2 = [](double v) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.2f", v);
      return std::string(buf);
    };
    out << "estimator,var_per_obs,rounded\n";
    out << "direct," << format_g17(w.direct_var) << ',' << round2(w.direct_var)
        << '\n';
    out << "omle," << format_g17(w.full_union_var) << ','
        << round2(w.full_union_var) << '\n';
    out << "ibe_pair," << format_g17(w.pair_joint_var) << ','
        << round2(w.pair_joint_var) << '\n';
    out << "ibe_triple," << format_g17(w.triple_joint_var) << ','
        << round2(w.triple_joint_var) << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tomo
