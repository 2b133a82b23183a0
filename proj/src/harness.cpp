#include "mmrelay/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "mmrelay/beamforming.hpp"
#include "mmrelay/prediction.hpp"

namespace mmrelay {

namespace {

constexpr std::uint64_t kChannelStream = 0;
constexpr std::uint64_t kScenarioStream = 1;
constexpr std::uint64_t kRandomPolicyStream = 16;
constexpr std::uint64_t kSharedTrial = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kBlock = 256;

std::size_t max_local_segments(const ChannelSampler& sampler) {
  std::size_t dim = 0;
  for (const auto& c : sampler.clusters()) dim = std::max(dim, c.segments().size());
  return dim;
}

bool is_saa(Policy p) { return p == Policy::saa || p == Policy::saa_constrained; }
bool is_random(Policy p) { return p == Policy::random || p == Policy::random_constrained; }

double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace

const PolicyStats& AggregateStats::policy(Policy p) const {
  for (const auto& s : policies) {
    if (s.policy == p) return s;
  }
  throw std::out_of_range("AggregateStats: policy '" + std::string(policy_name(p)) + "' was not run");
}

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)),
      deployment_(Deployment::build(config_.topology)),
      sampler_(deployment_, config_.channel) {
  config_.validate();
  for (const auto& c : deployment_.clusters()) {
    if (c.placement.delta > std::numeric_limits<std::uint16_t>::max()) {
      throw ConfigError("cluster delta too large");
    }
  }
  scenario_dim_ = max_local_segments(sampler_);
  if (config_.share_scenarios) {
    Rng rng = stream_rng(config_.seed, kSharedTrial, kScenarioStream);
    shared_scenarios_ = std::make_shared<const ScenarioSet>(
        generate_scenarios(static_cast<std::size_t>(config_.scenarios), scenario_dim_, rng));
  }
}

TrialInputs Experiment::prepare_trial(std::uint64_t trial) const {
  TrialInputs in;
  in.trial = trial;
  Rng channel_rng = stream_rng(config_.seed, trial, kChannelStream);
  in.realization = sampler_.sample(channel_rng);

  const bool any_saa = std::any_of(config_.policies.begin(), config_.policies.end(), is_saa);
  if (!any_saa) return in;

  if (shared_scenarios_) {
    in.scenarios = shared_scenarios_;
  } else {
    Rng rng = stream_rng(config_.seed, trial, kScenarioStream);
    in.scenarios = std::make_shared<const ScenarioSet>(
        generate_scenarios(static_cast<std::size_t>(config_.scenarios), scenario_dim_, rng));
  }

  // Kalman predictions depend only on the realization, so every SAA policy
  // shares them.
  const ChannelParams& params = config_.channel;
  const auto& series = in.realization.segments;
  std::vector<KalmanState> states;
  for (const auto& s : series) states.push_back(kalman_init(params, s.segment));
  for (int t = 1; t < params.n_t; ++t) {
    std::vector<SegmentPosterior> row;
    row.reserve(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
      states[k] = kalman_update(states[k], series[k].z(t), params);
      row.push_back({states[k].mean, states[k].var});
    }
    in.kalman.push_back(std::move(row));
  }
  return in;
}

PolicyTrace Experiment::run_policy(Policy policy, const TrialInputs& in) const {
  const ChannelParams& params = config_.channel;
  const int n_t = params.n_t;
  const auto clusters = sampler_.clusters();
  const std::size_t n_c = clusters.size();
  const int period = config_.selection_period;

  PolicyTrace trace;
  trace.policy = policy;
  trace.fingerprint = in.realization.fingerprint();
  trace.sinr.assign(static_cast<std::size_t>(n_t), 0.0);
  trace.selected.assign(n_c, std::vector<std::uint16_t>(static_cast<std::size_t>(n_t), 0));

  const CandidateMode mode = is_constrained(policy) ? CandidateMode::constrained : CandidateMode::unconstrained;
  std::vector<CandidateSet> candidates;
  for (const auto& c : clusters) candidates.push_back(candidate_set(c.id(), c.delta(), mode));

  Rng rng = stream_rng(config_.seed, in.trial, kRandomPolicyStream + static_cast<std::uint64_t>(policy));
  std::vector<GpPredictor> gp;
  if (is_saa(policy)) {
    if (!in.scenarios) throw std::logic_error("run_policy: SAA policy without scenarios");
    for (const auto& c : clusters) gp.emplace_back(c.kernel(), params, config_.window);
  }

  std::vector<std::size_t> current(n_c, 0);  // the same relay starts in every cluster
  std::vector<SegmentPosterior> local;
  std::vector<PosteriorPair> pairs;

  for (int t = 1; t <= n_t; ++t) {
    const bool reselect_now = t >= 2 && (t - 1) % period == 0;
    if (policy == Policy::ideal && reselect_now) {
      for (std::size_t r = 0; r < n_c; ++r) {
        current[r] = ideal_select(clusters[r], r, in.realization, t, candidates[r], params).position;
      }
    }

    std::vector<double> f(n_c), g(n_c);
    for (std::size_t r = 0; r < n_c; ++r) {
      trace.selected[r][static_cast<std::size_t>(t - 1)] = static_cast<std::uint16_t>(current[r]);
      std::vector<double> z, phase;
      realized_segment_values(clusters[r], in.realization, t, z, phase);
      const ClusterField& field = in.realization.clusters[r];
      f[r] = clusters[r].aggregate(Side::incoming, current[r], field.z(t, Side::incoming, current[r]), z, phase);
      g[r] = clusters[r].aggregate(Side::outgoing, current[r], field.z(t, Side::outgoing, current[r]), z, phase);
    }
    trace.sinr[static_cast<std::size_t>(t - 1)] = optimal_value(f, g, params).total;

    if (t == n_t) break;
    const bool select_next = t % period == 0;

    if (is_saa(policy)) {
      for (std::size_t r = 0; r < n_c; ++r) {
        const ClusterField& field = in.realization.clusters[r];
        gp[r].observe({t, current[r], field.z(t, Side::incoming, current[r]),
                       field.z(t, Side::outgoing, current[r])});
      }
      if (!select_next) continue;
      const auto& kalman = in.kalman[static_cast<std::size_t>(t - 1)];
      for (std::size_t r = 0; r < n_c; ++r) {
        const auto idx = clusters[r].series_index();
        local.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) local[k] = kalman[idx[k]];
        pairs.assign(static_cast<std::size_t>(clusters[r].delta()), PosteriorPair{});
        for (std::size_t pos : candidates[r].positions) pairs[pos] = gp[r].predict(pos, t + 1);
        current[r] = saa_select(clusters[r], candidates[r], local, pairs, *in.scenarios, params, t + 1).position;
      }
    } else if (is_random(policy) && select_next) {
      for (std::size_t r = 0; r < n_c; ++r) current[r] = random_select(candidates[r], rng, t + 1).position;
    }
  }
  return trace;
}

TrialResult Experiment::run_trial(std::uint64_t trial) const {
  const TrialInputs in = prepare_trial(trial);
  TrialResult result;
  result.trial = trial;
  result.fingerprint = in.realization.fingerprint();
  for (Policy p : config_.policies) result.policies.push_back(run_policy(p, in));
  return result;
}

namespace {

class Accumulator {
 public:
  Accumulator(const ExperimentConfig& config, const Deployment& deployment) : config_(config) {
    const auto n_t = static_cast<std::size_t>(config.channel.n_t);
    for (const auto& c : deployment.clusters()) {
      stats_.cluster_ids.push_back(c.placement.id);
      stats_.deltas.push_back(c.placement.delta);
    }
    for (Policy p : config.policies) {
      PolicyStats s;
      s.policy = p;
      s.overhead = csi_overhead(p, deployment);
      s.mean_sinr_db.assign(n_t, 0.0);
      for (int delta : stats_.deltas) {
        s.histogram.emplace_back(n_t - 1, std::vector<double>(static_cast<std::size_t>(delta), 0.0));
      }
      stats_.policies.push_back(std::move(s));
    }
  }

  void add(const TrialResult& trial) {
    if (trial.policies.size() != stats_.policies.size()) throw std::logic_error("Accumulator: policy count mismatch");
    for (std::size_t k = 0; k < trial.policies.size(); ++k) {
      const PolicyTrace& tr = trial.policies[k];
      PolicyStats& s = stats_.policies[k];
      for (std::size_t t = 0; t < tr.sinr.size(); ++t) {
        s.mean_sinr_db[t] += config_.averaging == Averaging::linear ? tr.sinr[t] : to_db(tr.sinr[t]);
      }
      for (std::size_t r = 0; r < tr.selected.size(); ++r) {
        for (std::size_t t = 1; t < tr.selected[r].size(); ++t) s.histogram[r][t - 1][tr.selected[r][t]] += 1.0;
      }
    }
    ++stats_.trials;
  }

  AggregateStats finish() {
    const auto n = static_cast<double>(stats_.trials);
    if (stats_.trials == 0) throw std::logic_error("Accumulator: no trials");
    for (auto& s : stats_.policies) {
      double total = 0.0;
      for (double& v : s.mean_sinr_db) {
        total += v;
        v /= n;
        if (config_.averaging == Averaging::linear) v = to_db(v);
      }
      total /= n * static_cast<double>(s.mean_sinr_db.size());
      s.grand_mean_db = config_.averaging == Averaging::linear ? to_db(total) : total;
      for (auto& cluster : s.histogram) {
        for (auto& row : cluster) {
          for (double& x : row) x /= n;
        }
      }
    }
    return std::move(stats_);
  }

 private:
  const ExperimentConfig& config_;
  AggregateStats stats_;
};

}  // namespace

AggregateStats Experiment::aggregate(const std::vector<TrialResult>& trials) const {
  Accumulator acc(config_, deployment_);
  for (const auto& t : trials) acc.add(t);
  return acc.finish();
}

AggregateStats Experiment::run(const ProgressFn& progress) const {
  const auto total = static_cast<std::uint64_t>(config_.trials);
  unsigned threads = config_.threads > 0 ? static_cast<unsigned>(config_.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::min(total, kBlock)));

  Accumulator acc(config_, deployment_);
  std::vector<TrialResult> block;
  for (std::uint64_t start = 0; start < total; start += kBlock) {
    const std::uint64_t count = std::min(kBlock, total - start);
    block.assign(count, TrialResult{});
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
      for (std::uint64_t i; !failed && (i = next.fetch_add(1)) < count;) {
        try {
          block[i] = run_trial(start + i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    };
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    for (const auto& r : block) acc.add(r);
    if (progress) progress(start + count, total);
  }
  return acc.finish();
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

ExportedFiles export_results(const AggregateStats& stats, const ExperimentConfig& config) {
  const std::filesystem::path dir(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

  const std::string stem = "_s" + std::to_string(config.seed) + "_" + config_hash(config);
  ExportedFiles files{dir / ("sinr" + stem + ".csv"), dir / ("histogram" + stem + ".csv"),
                      dir / ("summary" + stem + ".json")};

  {
    auto out = open_out(files.sinr_csv);
    out << "slot,policy,mean_sinr_db\n";
    const std::size_t n_t = stats.policies.empty() ? 0 : stats.policies.front().mean_sinr_db.size();
    for (std::size_t t = 0; t < n_t; ++t) {
      for (const auto& s : stats.policies) {
        out << t + 1 << ',' << policy_name(s.policy) << ',' << fmt(s.mean_sinr_db[t]) << '\n';
      }
    }
    if (!out) throw std::runtime_error("write failed: " + files.sinr_csv.string());
  }
  {
    auto out = open_out(files.histogram_csv);
    out << "policy,cluster,slot,position,fraction\n";
    for (const auto& s : stats.policies) {
      for (std::size_t r = 0; r < s.histogram.size(); ++r) {
        for (std::size_t t = 0; t < s.histogram[r].size(); ++t) {
          for (std::size_t p = 0; p < s.histogram[r][t].size(); ++p) {
            out << policy_name(s.policy) << ',' << stats.cluster_ids[r] << ',' << t + 2 << ',' << p + 1
                << ',' << fmt(s.histogram[r][t][p]) << '\n';
          }
        }
      }
    }
    if (!out) throw std::runtime_error("write failed: " + files.histogram_csv.string());
  }
  {
    nlohmann::json summary;
    summary["seed"] = config.seed;
    summary["config_hash"] = config_hash(config);
    summary["trials"] = stats.trials;
    summary["averaging"] = config.averaging == Averaging::linear ? "linear" : "db";
    for (const auto& s : stats.policies) {
      const std::string name(policy_name(s.policy));
      summary["grand_mean_sinr_db"][name] = s.grand_mean_db;
      summary["overhead"][name] = s.overhead;
    }
    // Thread count and output directory never change results, so they stay
    // out of the echo to keep outputs byte-identical across them.
    nlohmann::json echo = to_json(config);
    echo["experiment"].erase("threads");
    echo["experiment"].erase("out_dir");
    summary["config"] = echo;
    auto out = open_out(files.summary_json);
    out << summary.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + files.summary_json.string());
  }
  return files;
}

}  // namespace mmrelay
