#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "mmrelay/channel.hpp"
#include "mmrelay/config.hpp"
#include "mmrelay/selection.hpp"

namespace mmrelay {

/// One policy's run over a trial.
struct PolicyTrace {
  Policy policy = Policy::ideal;
  std::uint64_t fingerprint = 0;  // of the realization the policy saw
  std::vector<double> sinr;       // linear V(t), index t - 1
  std::vector<std::vector<std::uint16_t>> selected;  // [cluster][t - 1], 0-based positions
};

struct TrialResult {
  std::uint64_t trial = 0;
  std::uint64_t fingerprint = 0;
  std::vector<PolicyTrace> policies;  // in config order
};

/// Everything policies share within one trial.
struct TrialInputs {
  std::uint64_t trial = 0;
  ChannelRealization realization;
  std::shared_ptr<const ScenarioSet> scenarios;
  // kalman[t - 1][k]: prediction of cluster-free series k for slot t + 1
  // after absorbing slots 1..t.
  std::vector<std::vector<SegmentPosterior>> kalman;
};

struct PolicyStats {
  Policy policy = Policy::ideal;
  std::vector<double> mean_sinr_db;  // per slot
  double grand_mean_db = 0.0;
  std::size_t overhead = 0;
  // histogram[cluster][t - 2][position]: fraction of trials selecting the
  // position at slot t, for t = 2..n_t.
  std::vector<std::vector<std::vector<double>>> histogram;
};

struct AggregateStats {
  std::uint64_t trials = 0;
  std::vector<int> cluster_ids;
  std::vector<int> deltas;
  std::vector<PolicyStats> policies;

  const PolicyStats& policy(Policy p) const;
};

using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

class Experiment {
 public:
  /// Builds the deployment and samplers; throws ConfigError for bad input.
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const Deployment& deployment() const { return deployment_; }
  const ChannelSampler& sampler() const { return sampler_; }
  std::size_t scenario_dim() const { return scenario_dim_; }

  TrialInputs prepare_trial(std::uint64_t trial) const;
  PolicyTrace run_policy(Policy policy, const TrialInputs& inputs) const;
  TrialResult run_trial(std::uint64_t trial) const;

  /// Trials are processed in fixed blocks; results are reduced in trial order
  /// so the output does not depend on the thread count.
  AggregateStats run(const ProgressFn& progress = {}) const;

  /// Reduces finished trials (in the given order).
  AggregateStats aggregate(const std::vector<TrialResult>& trials) const;

 private:
  ExperimentConfig config_;
  Deployment deployment_;
  ChannelSampler sampler_;
  std::size_t scenario_dim_ = 0;
  std::shared_ptr<const ScenarioSet> shared_scenarios_;
};

struct ExportedFiles {
  std::filesystem::path sinr_csv;
  std::filesystem::path histogram_csv;
  std::filesystem::path summary_json;
};

/// Writes the three output files into config.out_dir. Throws
/// std::runtime_error when a file cannot be written.
ExportedFiles export_results(const AggregateStats& stats, const ExperimentConfig& config);

}  // namespace mmrelay
