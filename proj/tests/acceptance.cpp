// Acceptance gate: each guarantee the toolkit ships with is checked here as
// one pass/fail line, with its runtime measured against the pinned budget.
// Exit status is nonzero when any line fails.
//
// Environment:
//   TOMO_CONFIG_DIR  directory holding the reference configs (default "configs")
//   TOMO_NIGHTLY=1   criterion 5 sweeps ten fresh seeds and requires >= 9 passes
//                    instead of the single pinned desk seed

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tomo/analysis.hpp"
#include "tomo/cli.hpp"
#include "tomo/error.hpp"
#include "tomo/estimators.hpp"
#include "tomo/experiment.hpp"
#include "tomo/rng.hpp"
#include "tomo/simulator.hpp"
#include "tomo/stats.hpp"
#include "tomo/topology.hpp"

#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace tomo;

namespace {

std::string config_dir() {
  const char* env = std::getenv("TOMO_CONFIG_DIR");
  return env && *env ? env : "configs";
}

bool nightly_mode() {
  const char* env = std::getenv("TOMO_NIGHTLY");
  return env && std::string(env) == "1";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void require(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

bool run_criterion(int id, const std::string& name, double limit_ms,
                   const std::function<void(Outcome&)>& body) {
  Outcome outcome;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(outcome);
  } catch (const std::exception& e) {
    outcome.fail(std::string("exception: ") + e.what());
  }
  const double elapsed = ms_since(start);
  if (limit_ms > 0.0 && elapsed > limit_ms) {
    outcome.fail("runtime " + std::to_string(elapsed) + " ms over budget " +
                 std::to_string(limit_ms) + " ms");
  }
  std::printf("%s  criterion %d: %s (%.1f ms)\n", outcome.ok ? "PASS" : "FAIL",
              id, name.c_str(), elapsed);
  if (!outcome.ok) std::printf("      %s\n", outcome.detail.c_str());
  std::fflush(stdout);
  return outcome.ok;
}

Topology eight_star() {
  std::vector<std::pair<NodeId, NodeId>> edges{{1, 0}};
  for (NodeId c = 2; c <= 9; ++c) edges.emplace_back(c, 1);
  return Topology::from_edges(edges);
}

// ---- criterion 1: worked-example variances ---------------------------------

void criterion_example(Outcome& out) {
  // closed-form reference values at rate 0.99, rounded forms 0.01/0.01/0.03/0.04
  const auto compute_start = std::chrono::steady_clock::now();
  const WorkedExample w = worked_example(0.99);
  const double compute_ms = ms_since(compute_start);
  out.require(compute_ms < 1.0, "computation took " +
                                    std::to_string(compute_ms) +
                                    " ms, budget 1 ms");
  const double expected[4] = {0.0099, 0.009900990000990002, 0.0300010101010101,
                              0.04020405060708091};
  const double got[4] = {w.direct_var, w.full_union_var, w.pair_joint_var,
                         w.triple_joint_var};
  const char* rounded[4] = {"0.01", "0.01", "0.03", "0.04"};
  for (int i = 0; i < 4; ++i) {
    out.require(std::abs(got[i] - expected[i]) <= 1e-9,
                "variance " + std::to_string(i) + " off: got " +
                    std::to_string(got[i]));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", got[i]);
    out.require(std::string(buf) == rounded[i],
                std::string("rounding mismatch: ") + buf + " vs " + rounded[i]);
  }

  // the command-line surface agrees
  std::ostringstream cli_out, cli_err;
  const char* argv[] = {"tomo", "example", "--alpha", "0.99"};
  const int rc = cli_main(4, argv, cli_out, cli_err);
  out.require(rc == 0, "example subcommand failed: " + cli_err.str());
  const std::string text = cli_out.str();
  out.require(text.find("direct,") != std::string::npos &&
                  text.find(",0.04\n") != std::string::npos,
              "example output missing expected rows");
}

// ---- criterion 2: counting identity ----------------------------------------

void criterion_counting(Outcome& out) {
  Rng rng({0xACCE5501, 0});
  const int widths[] = {2, 3, 4, 5, 8};
  for (int round = 0; round < 1000; ++round) {
    const int width = widths[round % 5];
    std::vector<std::pair<NodeId, NodeId>> edges{{1, 0}};
    for (NodeId c = 2; c < static_cast<NodeId>(2 + width); ++c)
      edges.emplace_back(c, 1);
    const Topology topo = Topology::from_edges(edges);
    const std::uint64_t n = 1 + rng.next_u64() % 256;
    const ObservationMatrix obs = oracle::random_observations(rng, topo, n);
    const StatsTable stats(obs, topo);
    const std::int64_t residual = stats.inclusion_exclusion_residual(1);
    if (residual != 0) {
      out.fail("nonzero residual " + std::to_string(residual) + " at round " +
               std::to_string(round));
      return;
    }
  }
}

// ---- criterion 3: estimators invert exact expectations ---------------------

void criterion_fixed_point(Outcome& out) {
  Rng rng({0xACCE5503, 0});
  const double tol = 1e-8;
  int failures = 0;
  for (int round = 0; round < 200; ++round) {
    const Topology topo = oracle::random_tree(rng, 4, 5);
    const auto rates = oracle::random_rates(rng, topo.node_count(), 0.5, 0.999);
    const LinkParams params = LinkParams::derive(topo, rates);
    for (NodeId k = 1; k < topo.node_count(); ++k) {
      if (topo.is_leaf(k)) continue;
      const double truth = params.path_pass(k);
      const auto& kids = topo.children(k);

      std::vector<double> child_rates;
      for (NodeId j : kids) child_rates.push_back(params.tree_pass(j));
      const Subset full = Subset::full(topo, k);
      const double union_rate = truth * beta_subset(topo, params, full);
      const double omle_hat =
          solve_union_product(union_rate, child_rates).path_pass;
      if (std::abs(omle_hat - truth) > tol) ++failures;

      // a random subset of size >= 2 for the restricted / joint estimators
      const int size =
          2 + static_cast<int>(rng.next_u64() % (kids.size() - 1));
      const auto family = enumerate_subsets(topo, k, size);
      const Subset& x = family[rng.next_u64() % family.size()];
      std::vector<double> member_rates;
      double product = 1.0;
      for (NodeId j : x.members(topo)) {
        member_rates.push_back(params.tree_pass(j));
        product *= params.tree_pass(j);
      }
      const double rse_hat =
          solve_union_product(truth * beta_subset(topo, params, x), member_rates)
              .path_pass;
      if (std::abs(rse_hat - truth) > tol) ++failures;

      const double ibe_hat =
          solve_joint_power(product, truth * psi(topo, params, x), size)
              .path_pass;
      if (std::abs(ibe_hat - truth) > tol) ++failures;

      const int degree =
          2 + static_cast<int>(rng.next_u64() % (kids.size() - 1));
      double sum_products = 0.0;
      double sum_joint = 0.0;
      for (const Subset& y : enumerate_subsets(topo, k, degree)) {
        double p = 1.0;
        for (NodeId j : y.members(topo)) p *= params.tree_pass(j);
        sum_products += p;
        sum_joint += truth * psi(topo, params, y);
      }
      const double bwe_hat =
          solve_block_power(sum_products, sum_joint, degree).path_pass;
      if (std::abs(bwe_hat - truth) > tol) ++failures;
    }
  }
  out.require(failures == 0,
              std::to_string(failures) + " estimator inversions missed 1e-8");
}

// ---- criterion 4: binary-node estimators coincide --------------------------

void criterion_binary_agreement(Outcome& out) {
  Rng rng({0xACCE5504, 0});
  const Topology topo = []() {
    std::vector<std::pair<NodeId, NodeId>> edges{{1, 0}, {2, 1}, {3, 1}};
    return Topology::from_edges(edges);
  }();
  const Subset pair = Subset::full(topo, 1);

  int done = 0;
  int attempts = 0;
  while (done < 500) {
    if (++attempts > 5000) {
      out.fail("could not find 500 non-degenerate binary datasets");
      return;
    }
    std::vector<double> rates(4);
    rates[0] = 0.0;
    rates[1] = 0.5 + 0.45 * rng.next_unit();
    rates[2] = 0.5 + 0.49 * rng.next_unit();
    rates[3] = 0.5 + 0.49 * rng.next_unit();
    const LinkParams params = LinkParams::derive(topo, rates);
    const std::uint64_t n = 100 + rng.next_u64() % 1900;
    const ObservationMatrix obs =
        simulate(topo, params, n, {rng.next_u64(), 0});
    const StatsTable stats(obs, topo);
    if (stats.hit_count(2) == 0 || stats.hit_count(3) == 0 ||
        stats.simultaneous_count(pair) == 0) {
      continue;
    }
    const NodeEstimate a = omle(stats, topo, 1);
    if (a.flags.degenerate_counts) continue;  // endpoint case: families differ
    const NodeEstimate b = rse(stats, topo, 1, pair);
    const NodeEstimate c = bwe(stats, topo, 1, 2);
    const NodeEstimate d = ibe(stats, topo, 1, pair);
    const double values[4] = {a.path_pass, b.path_pass, c.path_pass, d.path_pass};
    for (int i = 1; i < 4; ++i) {
      if (std::abs(values[i] - values[0]) > 1e-12) {
        out.fail("family disagreement at dataset " + std::to_string(done));
        return;
      }
    }
    ++done;
  }
}

// ---- criterion 5: reference comparison table -------------------------------

struct Table2Check {
  bool ok = true;
  std::string detail;
};

Table2Check check_table2_once(const Topology& topo, const LinkParams& params,
                              ExperimentConfig cfg, std::uint64_t seed) {
  cfg.master_seed = seed;
  cfg.sample_sizes = {2700};
  const ExperimentReport report = run_experiment(cfg, topo, params);
  Table2Check result;
  for (const CellSummary& cell : report.cells) {
    if (!(cell.mean_loss >= 0.008 && cell.mean_loss <= 0.012)) {
      result.ok = false;
      result.detail += cell.estimator + " mean " + std::to_string(cell.mean_loss) +
                       " outside [0.008,0.012]; ";
    }
    const double lo = 1.7e-6 / 3.0;
    const double hi = 1.9e-6 * 3.0;
    if (!(cell.var_loss >= lo && cell.var_loss <= hi)) {
      result.ok = false;
      result.detail += cell.estimator + " var " + std::to_string(cell.var_loss) +
                       " outside [" + std::to_string(lo) + "," +
                       std::to_string(hi) + "]; ";
    }
  }
  return result;
}

void criterion_reference_table(Outcome& out) {
  const fs::path dir = config_dir();
  const ExperimentConfig cfg =
      parse_experiment_config(slurp(dir / "table2.cfg"));
  const ParsedTopology parsed = parse_topology(slurp(dir / cfg.topology_path));
  const LinkParams params =
      LinkParams::derive(parsed.topology, parsed.link_pass);
  if (cfg.estimators.size() != 5) {
    out.fail("reference config must compare five estimators");
    return;
  }

  if (nightly_mode()) {
    int passes = 0;
    std::string details;
    for (std::uint64_t seed = 101; seed <= 110; ++seed) {
      const Table2Check check =
          check_table2_once(parsed.topology, params, cfg, seed);
      if (check.ok) {
        ++passes;
      } else {
        details += "[seed " + std::to_string(seed) + "] " + check.detail;
      }
    }
    out.require(passes >= 9, "only " + std::to_string(passes) +
                                 "/10 fresh seeds passed: " + details);
  } else {
    const Table2Check check =
        check_table2_once(parsed.topology, params, cfg, cfg.master_seed);
    out.require(check.ok, check.detail);
  }
}

// ---- criterion 6: sampled variance tracks the bound ------------------------

void criterion_variance_tracks_bound(Outcome& out) {
  const Topology topo = eight_star();
  std::vector<double> rates(10, 0.99);
  rates[0] = 0.0;
  const LinkParams params = LinkParams::derive(topo, rates);
  const Subset pair = Subset::of_children(topo, 1, {2, 3});
  const Subset full = Subset::full(topo, 1);
  const double a1 = params.path_pass(1);
  const double psi_pair = psi(topo, params, pair);

  const std::uint64_t n = 100000;
  const int reps = 100;
  std::vector<double> omle_hats, plug_in_hats, restricted_ml_hats;
  omle_hats.reserve(reps);
  plug_in_hats.reserve(reps);
  restricted_ml_hats.reserve(reps);
  for (int rep = 0; rep < reps; ++rep) {
    const ObservationMatrix obs =
        simulate(topo, params, n, {0xACCE5506, static_cast<std::uint64_t>(rep)});
    const StatsTable stats(obs, topo);
    omle_hats.push_back(omle(stats, topo, 1).path_pass);
    plug_in_hats.push_back(ibe(stats, topo, 1, pair).path_pass);
    // the variance bound's own maximizer: joint rate over the true
    // simultaneous pass rate
    restricted_ml_hats.push_back(
        static_cast<double>(stats.simultaneous_count(pair)) /
        static_cast<double>(n) / psi_pair);
  }

  const auto sample_var = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
  };

  const double omle_bound =
      fisher(EstimatorSpec{Method::Omle, {}, {}}, a1,
             beta_subset(topo, params, full), RateSource::TrueParams)
          .crlb_var_per_obs /
      static_cast<double>(n);
  const double pair_bound =
      fisher(EstimatorSpec{Method::Ibe, pair, {}}, a1, psi_pair,
             RateSource::TrueParams)
          .crlb_var_per_obs /
      static_cast<double>(n);

  const double omle_ratio = sample_var(omle_hats) / omle_bound;
  out.require(omle_ratio >= 0.5 && omle_ratio <= 2.0,
              "full-likelihood variance ratio " + std::to_string(omle_ratio) +
                  " outside [0.5,2]");

  // The joint-rate bound is the reciprocal Fisher information of the
  // simultaneous-hit indicator with the simultaneous pass rate held known,
  // so the estimator it describes is the one that must attain it.
  const double restricted_ratio = sample_var(restricted_ml_hats) / pair_bound;
  out.require(restricted_ratio >= 0.5 && restricted_ratio <= 2.0,
              "joint-rate restricted-likelihood variance ratio " +
                  std::to_string(restricted_ratio) + " outside [0.5,2]");

  // The shipped plug-in form replaces the known rate with estimated child
  // rates whose errors partially cancel against the joint count, so its
  // realized variance may only fall at or below the band, never above it.
  const double plug_in_ratio = sample_var(plug_in_hats) / pair_bound;
  out.require(plug_in_ratio > 0.0 && plug_in_ratio <= 2.0,
              "joint-rate plug-in variance ratio " +
                  std::to_string(plug_in_ratio) + " above the band");
}

// ---- criterion 7: exact efficiency monotonicity ----------------------------

void criterion_monotonicity(Outcome& out) {
  Rng rng({0xACCE5507, 0});
  for (int round = 0; round < 100; ++round) {
    const Topology topo = oracle::random_tree(rng, 3, 6);
    const auto rates = oracle::random_rates(rng, topo.node_count(), 0.2, 1.0);
    const LinkParams params = LinkParams::derive(topo, rates);
    for (NodeId k = 1; k < topo.node_count(); ++k) {
      if (topo.is_leaf(k) || topo.children(k).size() < 2) continue;
      const EfficiencyOrder order = efficiency_order(topo, k, params);
      for (const auto& [small, big] : order.covers) {
        // growing the subset can only shrink psi: exact, not approximate
        if (!(order.psi_values[big] <= order.psi_values[small])) {
          out.fail("psi grew on a cover pair at node " + std::to_string(k));
          return;
        }
      }
      // the variance bound falls as the effective rate delta rises: exact
      const double a = params.path_pass(k);
      if (a >= 1.0) continue;  // boundary excluded from the bound's domain
      double prev = -1.0;
      bool first = true;
      for (double delta : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double crlb =
            fisher(EstimatorSpec{}, a, delta, RateSource::TrueParams)
                .crlb_var_per_obs;
        if (!first && !(crlb < prev)) {
          out.fail("variance bound not strictly decreasing in delta");
          return;
        }
        prev = crlb;
        first = false;
      }
    }
  }
}

// ---- criterion 8: model selection under grouped losses ---------------------

void criterion_selection(Outcome& out) {
  const fs::path dir = config_dir();
  const ParsedTopology parsed = parse_topology(slurp(dir / "table4.topo"));
  const Topology& topo = parsed.topology;
  const LinkParams params = LinkParams::derive(topo, parsed.link_pass);

  const std::uint64_t n = 2700;
  const int runs = 100;
  int good_budget2 = 0;
  int good_budget3 = 0;
  double loss_sum = 0.0;
  for (int run = 0; run < runs; ++run) {
    const ObservationMatrix obs =
        simulate(topo, params, n, {0xACCE5508, static_cast<std::uint32_t>(run)});
    const StatsTable stats(obs, topo);

    const auto in_low_loss_group = [&](const EstimatorSpec& spec) {
      if (!spec.subset) return false;
      for (NodeId m : spec.subset->members(topo)) {
        if (m < 2 || m > 5) return false;
      }
      return true;
    };

    const EstimatorSpec pick2 = select_model(stats, topo, 1, 2);
    const EstimatorSpec pick3 = select_model(stats, topo, 1, 3);
    if (in_low_loss_group(pick2)) ++good_budget2;
    if (in_low_loss_group(pick3)) ++good_budget3;

    const NodeEstimate est = ibe(stats, topo, 1, *pick2.subset);
    loss_sum += 1.0 - est.path_pass;
  }
  out.require(good_budget2 >= 95, "budget-2 picks in the low-loss group only " +
                                      std::to_string(good_budget2) + "/100");
  out.require(good_budget3 >= 95, "budget-3 picks in the low-loss group only " +
                                      std::to_string(good_budget3) + "/100");
  const double mean_loss = loss_sum / runs;
  out.require(mean_loss >= 0.045 && mean_loss <= 0.055,
              "selected-pair mean loss " + std::to_string(mean_loss) +
                  " outside [0.045,0.055]");
}

// ---- criterion 9: byte-identical reruns ------------------------------------

void criterion_determinism(Outcome& out) {
  const fs::path dir = config_dir();
  const fs::path scratch =
      fs::temp_directory_path() / "tomo-acceptance-determinism";
  fs::remove_all(scratch);
  fs::create_directories(scratch / "a");
  fs::create_directories(scratch / "b");

  const std::string cfg_path = (dir / "table2.cfg").string();
  for (const char* sub : {"a", "b"}) {
    std::ostringstream cli_out, cli_err;
    const std::string out_dir = (scratch / sub).string();
    const char* argv[] = {"tomo",     "experiment", "--config", cfg_path.c_str(),
                          "--out-dir", out_dir.c_str()};
    const int rc = cli_main(6, argv, cli_out, cli_err);
    if (rc != 0) {
      out.fail("experiment run failed: " + cli_err.str());
      return;
    }
  }
  for (const char* name : {"table2_summary.csv", "table2_reps.csv"}) {
    const std::string a = slurp(scratch / "a" / name);
    const std::string b = slurp(scratch / "b" / name);
    out.require(!a.empty(), std::string(name) + " is empty");
    out.require(a == b, std::string(name) + " differs between reruns");
  }
  fs::remove_all(scratch);
}

}  // namespace

int main() {
  std::printf("acceptance gate (%s mode)\n", nightly_mode() ? "nightly" : "desk");
  bool ok = true;
  ok &= run_criterion(1, "worked-example variances and their roundings", 0.0,
                      criterion_example);
  ok &= run_criterion(2, "counting identity on 1000 random matrices", 10000.0,
                      criterion_counting);
  ok &= run_criterion(3, "estimators invert exact expectations", 30000.0,
                      criterion_fixed_point);
  ok &= run_criterion(4, "binary-node estimator families coincide", 0.0,
                      criterion_binary_agreement);
  ok &= run_criterion(5, "reference comparison table at n=2700", 60000.0,
                      criterion_reference_table);
  ok &= run_criterion(6, "sampled variance tracks the bound", 120000.0,
                      criterion_variance_tracks_bound);
  ok &= run_criterion(7, "efficiency order is exactly monotone", 0.0,
                      criterion_monotonicity);
  ok &= run_criterion(8, "model selection under grouped losses", 120000.0,
                      criterion_selection);
  ok &= run_criterion(9, "experiment reruns are byte-identical", 0.0,
                      criterion_determinism);
  std::printf("%s\n", ok ? "ALL CRITERIA PASSED" : "ACCEPTANCE FAILED");
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
