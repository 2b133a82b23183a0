#include "mmrelay/selection.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mmrelay/beamforming.hpp"

namespace mmrelay {

std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::ideal: return "ideal";
    case Policy::random: return "random";
    case Policy::random_constrained: return "random_constrained";
    case Policy::saa: return "saa";
    case Policy::saa_constrained: return "saa_constrained";
  }
  return "unknown";
}

Policy parse_policy(std::string_view name) {
  for (Policy p : {Policy::ideal, Policy::random, Policy::random_constrained, Policy::saa,
                   Policy::saa_constrained}) {
    if (policy_name(p) == name) return p;
  }
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

bool is_constrained(Policy p) { return p == Policy::random_constrained || p == Policy::saa_constrained; }

CandidateSet candidate_set(int cluster_id, int delta, CandidateMode mode) {
  if (delta < 1) throw std::invalid_argument("candidate_set: delta must be >= 1");
  CandidateSet c;
  c.cluster = cluster_id;
  c.mode = mode;
  const auto n = static_cast<std::size_t>(delta);
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == CandidateMode::unconstrained || i < kEdgePositions || i + kEdgePositions >= n) {
      c.positions.push_back(i);
    }
  }
  return c;
}

ScenarioView ScenarioSet::operator[](std::size_t i) const {
  ScenarioView s;
  s.v = std::span<const double>(v_).subspan(i * dim_, dim_);
  s.phase = std::span<const double>(phase_).subspan(i * dim_, dim_);
  s.pair = {pair_[2 * i], pair_[2 * i + 1]};
  s.pair_phase = {pair_phase_[2 * i], pair_phase_[2 * i + 1]};
  return s;
}

ScenarioSet generate_scenarios(std::size_t count, std::size_t dim, Rng& rng) {
  if (count < 1) throw std::invalid_argument("generate_scenarios: need at least one scenario");
  ScenarioSet set(count, dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) set.v()[i * dim + k] = normal(rng);
    for (std::size_t k = 0; k < dim; ++k) set.phase()[i * dim + k] = unit_uniform(rng);
    set.pair()[2 * i] = normal(rng);
    set.pair()[2 * i + 1] = normal(rng);
    set.pair_phase()[2 * i] = unit_uniform(rng);
    set.pair_phase()[2 * i + 1] = unit_uniform(rng);
  }
  return set;
}

Eigen::Matrix2d psd_sqrt(const Eigen::Matrix2d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Vector2d ev = eig.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, std::abs(cov.trace()));
  if (ev.minCoeff() < -tol) throw std::domain_error("psd_sqrt: covariance is not PSD");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

void destandardize(std::span<const double> v, std::span<const SegmentPosterior> post,
                   std::vector<double>& z) {
  z.resize(post.size());
  for (std::size_t k = 0; k < post.size(); ++k) z[k] = std::sqrt(post[k].var) * v[k] + post[k].mean;
}

void check_dims(const ClusterChannel& cluster, std::span<const SegmentPosterior> post,
                std::size_t scenario_dim) {
  if (post.size() != cluster.segments().size()) {
    throw std::invalid_argument("segment posteriors do not match the cluster's segments");
  }
  if (scenario_dim < post.size()) throw std::invalid_argument("scenario dimension too small");
}

}  // namespace

double surrogate_value(const ClusterChannel& cluster, std::size_t pos, const ScenarioView& scenario,
                       std::span<const SegmentPosterior> segment_posteriors,
                       const PosteriorPair& pair, const ChannelParams& params) {
  check_dims(cluster, segment_posteriors, scenario.v.size());
  std::vector<double> z;
  destandardize(scenario.v, segment_posteriors, z);
  const Eigen::Vector2d zp =
      psd_sqrt(pair.cov) * Eigen::Vector2d(scenario.pair[0], scenario.pair[1]) + pair.mean;

  std::vector<double> db, ph;
  cluster.path_terms(Side::incoming, pos, zp(0), scenario.pair_phase[0], z, scenario.phase, db, ph);
  const double f = aggregate_power(db, ph);
  cluster.path_terms(Side::outgoing, pos, zp(1), scenario.pair_phase[1], z, scenario.phase, db, ph);
  const double g = aggregate_power(db, ph);
  return cluster_sinr_term(f, g, params);
}

namespace {

SelectionDecision pick(int cluster, int slot, const CandidateSet& candidates,
                       std::vector<double> values) {
  if (candidates.positions.empty()) throw std::invalid_argument("empty candidate set");
  SelectionDecision d;
  d.cluster = cluster;
  d.slot = slot;
  d.candidates = candidates.positions;
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  d.position = candidates.positions[best];
  d.values = std::move(values);
  return d;
}

}  // namespace

SelectionDecision saa_select(const ClusterChannel& cluster, const CandidateSet& candidates,
                             std::span<const SegmentPosterior> segment_posteriors,
                             std::span<const PosteriorPair> pairs, const ScenarioSet& scenarios,
                             const ChannelParams& params, int slot) {
  check_dims(cluster, segment_posteriors, scenarios.dim());
  const std::size_t n = scenarios.size();
  // The cluster-free part of each aggregate does not depend on the candidate.
  std::vector<double> base_f(n), base_g(n);
  std::vector<double> z;
  for (std::size_t i = 0; i < n; ++i) {
    const ScenarioView s = scenarios[i];
    destandardize(s.v, segment_posteriors, z);
    base_f[i] = cluster.path_sum_power(Side::incoming, z, s.phase);
    base_g[i] = cluster.path_sum_power(Side::outgoing, z, s.phase);
  }

  std::vector<double> values;
  values.reserve(candidates.positions.size());
  for (std::size_t pos : candidates.positions) {
    const PosteriorPair& pair = pairs[pos];
    const Eigen::Matrix2d root = psd_sqrt(pair.cov);
    const double tf = cluster.terminal_db(Side::incoming, pos);
    const double tg = cluster.terminal_db(Side::outgoing, pos);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const ScenarioView s = scenarios[i];
      const double zf = root(0, 0) * s.pair[0] + root(0, 1) * s.pair[1] + pair.mean(0);
      const double zg = root(1, 0) * s.pair[0] + root(1, 1) * s.pair[1] + pair.mean(1);
      const double f = std::exp(kChi * (tf + zf)) * base_f[i];
      const double g = std::exp(kChi * (tg + zg)) * base_g[i];
      sum += cluster_sinr_term(f, g, params);
    }
    values.push_back(sum / static_cast<double>(n));
  }
  return pick(cluster.id(), slot, candidates, std::move(values));
}

void realized_segment_values(const ClusterChannel& cluster, const ChannelRealization& realization,
                             int t, std::vector<double>& z, std::vector<double>& phase) {
  const auto idx = cluster.series_index();
  z.resize(idx.size());
  phase.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = realization.segments[idx[k]];
    z[k] = s.z(t);
    phase[k] = s.phase[static_cast<std::size_t>(t - 1)];
  }
}

std::vector<double> realized_values(const ClusterChannel& cluster, std::size_t cluster_index,
                                    const ChannelRealization& realization, int t,
                                    std::span<const std::size_t> candidates,
                                    const ChannelParams& params) {
  std::vector<double> z, phase;
  realized_segment_values(cluster, realization, t, z, phase);
  const double bf = cluster.path_sum_power(Side::incoming, z, phase);
  const double bg = cluster.path_sum_power(Side::outgoing, z, phase);
  const ClusterField& field = realization.clusters[cluster_index];
  std::vector<double> values;
  values.reserve(candidates.size());
  for (std::size_t pos : candidates) {
    const double f = std::exp(kChi * (cluster.terminal_db(Side::incoming, pos) +
                                      field.z(t, Side::incoming, pos))) * bf;
    const double g = std::exp(kChi * (cluster.terminal_db(Side::outgoing, pos) +
                                      field.z(t, Side::outgoing, pos))) * bg;
    values.push_back(cluster_sinr_term(f, g, params));
  }
  return values;
}

SelectionDecision ideal_select(const ClusterChannel& cluster, std::size_t cluster_index,
                               const ChannelRealization& realization, int t,
                               const CandidateSet& candidates, const ChannelParams& params) {
  return pick(cluster.id(), t, candidates,
              realized_values(cluster, cluster_index, realization, t, candidates.positions, params));
}

SelectionDecision random_select(const CandidateSet& candidates, Rng& rng, int slot) {
  if (candidates.positions.empty()) throw std::invalid_argument("random_select: empty candidate set");
  std::uniform_int_distribution<std::size_t> pick_index(0, candidates.positions.size() - 1);
  SelectionDecision d;
  d.cluster = candidates.cluster;
  d.slot = slot;
  d.candidates = candidates.positions;
  d.position = candidates.positions[pick_index(rng)];
  return d;
}

std::size_t csi_overhead(Policy policy, const Deployment& deployment) {
  const std::size_t nc = deployment.clusters().size();
  switch (policy) {
    case Policy::ideal: {
      std::size_t n = 0;
      for (const auto& c : deployment.clusters()) n += 2 * static_cast<std::size_t>(c.placement.delta);
      return n;
    }
    case Policy::saa:
    case Policy::saa_constrained:
      return 2 * nc + deployment.cluster_free_segments().size();
    case Policy::random:
    case Policy::random_constrained:
      return 2 * nc;
  }
  return 0;
}

}  // namespace mmrelay
