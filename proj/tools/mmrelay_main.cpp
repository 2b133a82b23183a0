// mmrelay: run relay-selection experiments and dump diagnostics.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <iostream>
#include <sstream>
#include <string>

#include "mmrelay/channel.hpp"
#include "mmrelay/config.hpp"
#include "mmrelay/harness.hpp"

using namespace mmrelay;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> scenarios;
  std::optional<std::string> policies;
  std::optional<std::string> window;
  std::optional<std::string> out;
  std::optional<int> selection_period;
  std::optional<int> threads;
};

void apply(const Overrides& o, ExperimentConfig& c) {
  if (o.trials) c.trials = *o.trials;
  if (o.seed) c.seed = *o.seed;
  if (o.scenarios) c.scenarios = *o.scenarios;
  if (o.policies) {
    c.policies.clear();
    std::stringstream ss(*o.policies);
    for (std::string name; std::getline(ss, name, ',');) {
      if (!name.empty()) c.policies.push_back(parse_policy(name));
    }
  }
  if (o.window) {
    if (*o.window == "inf") {
      c.window = 0;
    } else {
      try {
        std::size_t used = 0;
        const long long w = std::stoll(*o.window, &used);
        if (used != o.window->size() || w < 0) throw std::invalid_argument("");
        c.window = static_cast<std::size_t>(w);
      } catch (const std::exception&) {
        throw ConfigError("--window expects a non-negative integer or 'inf'");
      }
    }
  }
  if (o.out) c.out_dir = *o.out;
  if (o.selection_period) c.selection_period = *o.selection_period;
  if (o.threads) c.threads = *o.threads;
  c.validate();
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

json path_json(const StreetGraph& graph, const PropagationPath& p) {
  json nlos = json::array();
  for (int s : p.nlos_segments) nlos.push_back({{"segment", s}, {"length", graph.segment(s).length}});
  return {{"segments", p.segments},
          {"los_segment", p.los_segment},
          {"los_length", p.los_length},
          {"nlos", nlos},
          {"intersections", p.intersections},
          {"length", p.length}};
}

json dump_paths(const ExperimentConfig& config) {
  const Deployment d = Deployment::build(config.topology);
  json out;
  out["clusters"] = json::array();
  for (const auto& c : d.clusters()) {
    json f = json::array(), g = json::array();
    for (const auto& p : c.f_paths) f.push_back(path_json(d.graph(), p));
    for (const auto& p : c.g_paths) g.push_back(path_json(d.graph(), p));
    out["clusters"].push_back({{"id", c.placement.id},
                               {"segment", c.placement.segment},
                               {"delta", c.placement.delta},
                               {"entry_f", c.entry_f},
                               {"entry_g", c.entry_g},
                               {"l1_source_to_entry", l1_distance(d.graph(), d.source(), c.entry_f)},
                               {"l1_destination_to_entry", l1_distance(d.graph(), d.destination(), c.entry_g)},
                               {"L", c.f_paths.size()},
                               {"K", c.g_paths.size()},
                               {"incoming_paths", f},
                               {"outgoing_paths", g},
                               {"segments_f", c.segments_f},
                               {"segments_g", c.segments_g},
                               {"unique_segments", c.segments.size()}});
  }
  out["cluster_free_segments"] = d.cluster_free_segments();
  out["overhead"] = {{"ideal", csi_overhead(Policy::ideal, d)}, {"proposed", csi_overhead(Policy::saa, d)}};
  return out;
}

json dump_kernels(const ExperimentConfig& config) {
  const Deployment d = Deployment::build(config.topology);
  const ChannelParams& p = config.channel;
  json out;
  const Eigen::MatrixXd sigma_tau = temporal_cov(p.n_t, p.eta2, p.gamma, p.sigma_xi2);
  out["sigma_xi2"] = p.sigma_xi2;
  out["segment_cov"] = {{"matrix", matrix_json(sigma_tau)}, {"min_eigenvalue", min_eigenvalue(sigma_tau)}};
  out["clusters"] = json::array();
  for (const auto& c : d.clusters()) {
    const Eigen::MatrixXd k = cluster_kernel(c, p);
    const auto n = static_cast<Eigen::Index>(c.placement.delta);
    json prior = json::array();
    double prior_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Matrix2d kb;
      kb << k(i, i), k(i, n + i), k(n + i, i), k(n + i, n + i);
      kb.diagonal().array() += p.sigma_xi2;
      prior.push_back(matrix_json(kb));
      prior_min = std::min(prior_min, min_eigenvalue(kb));
    }
    out["clusters"].push_back({{"id", c.placement.id},
                               {"delta", c.placement.delta},
                               {"d_full", c.placement.d_full},
                               {"d_max", c.placement.d_max},
                               {"kernel", matrix_json(k)},
                               {"kernel_min_eigenvalue", min_eigenvalue(k)},
                               {"prior_pairs", prior},
                               {"prior_min_eigenvalue", prior_min}});
  }
  return out;
}

int run(const ExperimentConfig& config) {
  const Experiment experiment(config);
  std::cerr << "running " << config.trials << " trials, seed " << config.seed << "\n";
  const AggregateStats stats = experiment.run([](std::uint64_t done, std::uint64_t total) {
    std::cerr << "  " << done << "/" << total << " trials\n";
  });
  const ExportedFiles files = export_results(stats, config);
  for (const auto& s : stats.policies) {
    std::cerr << "  " << policy_name(s.policy) << ": " << s.grand_mean_db << " dB\n";
  }
  std::cout << files.sinr_csv.string() << "\n"
            << files.histogram_csv.string() << "\n"
            << files.summary_json.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relay selection for 2-hop mmWave networks in urban street canyons"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;

  auto* run_cmd = app.add_subcommand("run", "Run the experiment and write CSV/JSON outputs");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--trials", o.trials, "Monte Carlo trials");
  run_cmd->add_option("--seed", o.seed, "Master seed");
  run_cmd->add_option("--scenarios", o.scenarios, "SAA scenarios per selection");
  run_cmd->add_option("--policies", o.policies, "Comma-separated policy list");
  run_cmd->add_option("--window", o.window, "GP window in slots, or 'inf'");
  run_cmd->add_option("--out", o.out, "Output directory");
  run_cmd->add_option("--selection-period", o.selection_period, "Slots between relay reselections");
  run_cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* validate_cmd = app.add_subcommand("validate", "Check a config and print its normalized form");
  validate_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* paths_cmd = app.add_subcommand("paths", "Dump each cluster's propagation paths");
  paths_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* kernels_cmd = app.add_subcommand("kernels", "Dump covariance matrices and eigenvalue checks");
  kernels_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig config = load_config(config_path);
    if (*run_cmd) {
      apply(o, config);
      return run(config);
    }
    if (*validate_cmd) {
      Deployment::build(config.topology);
      std::cout << to_json(config).dump(2) << "\n";
    } else if (*paths_cmd) {
      std::cout << dump_paths(config).dump(2) << "\n";
    } else if (*kernels_cmd) {
      std::cout << dump_kernels(config).dump(2) << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
