#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mmrelay/channel.hpp"
#include "mmrelay/prediction.hpp"

namespace mmrelay {

enum class Policy { ideal, random, random_constrained, saa, saa_constrained };

std::string_view policy_name(Policy p);
/// Throws ConfigError for unknown names.
Policy parse_policy(std::string_view name);
bool is_constrained(Policy p);

enum class CandidateMode { unconstrained, constrained };

struct CandidateSet {
  int cluster = 0;
  CandidateMode mode = CandidateMode::unconstrained;
  std::vector<std::size_t> positions;  // 0-based, ascending
};

/// Number of positions kept next to each segment end in constrained mode.
inline constexpr std::size_t kEdgePositions = 4;

CandidateSet candidate_set(int cluster_id, int delta, CandidateMode mode);

/// Views one standardized draw: unit normals and [0,1) phases for each
/// cluster-free segment (first `dim` used by a cluster), plus the cluster
/// pair.
struct ScenarioView {
  std::span<const double> v;
  std::span<const double> phase;
  std::array<double, 2> pair{};
  std::array<double, 2> pair_phase{};
};

/// N_S i.i.d. draws from the standardized scenario density, stored flat.
class ScenarioSet {
 public:
  ScenarioSet() = default;
  ScenarioSet(std::size_t count, std::size_t dim) : count_(count), dim_(dim) {
    v_.resize(count * dim);
    phase_.resize(count * dim);
    pair_.resize(count * 2);
    pair_phase_.resize(count * 2);
  }

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  ScenarioView operator[](std::size_t i) const;

  std::vector<double>& v() { return v_; }
  std::vector<double>& phase() { return phase_; }
  std::vector<double>& pair() { return pair_; }
  std::vector<double>& pair_phase() { return pair_phase_; }

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> v_;
  std::vector<double> phase_;
  std::vector<double> pair_;
  std::vector<double> pair_phase_;
};

ScenarioSet generate_scenarios(std::size_t count, std::size_t dim, Rng& rng);

struct SegmentPosterior {
  double mean = 0.0;
  double var = 0.0;
};

/// Symmetric PSD square root of a 2x2 covariance, negative eigenvalues
/// clamped to zero. Throws std::domain_error for clearly indefinite input.
Eigen::Matrix2d psd_sqrt(const Eigen::Matrix2d& cov);

/// V_I evaluated at the de-standardized scenario for position `pos`.
/// `segment_posteriors` follows the cluster's local segment order.
double surrogate_value(const ClusterChannel& cluster, std::size_t pos, const ScenarioView& scenario,
                       std::span<const SegmentPosterior> segment_posteriors,
                       const PosteriorPair& pair, const ChannelParams& params);

struct SelectionDecision {
  int cluster = 0;
  int slot = 0;               // slot the choice applies to
  std::size_t position = 0;   // chosen 0-based relay index
  std::vector<std::size_t> candidates;
  std::vector<double> values;  // objective per candidate (empty for random)
};

/// Argmax of the scenario-averaged surrogate over the candidate set; ties go
/// to the lowest index. `pairs` is indexed by position.
SelectionDecision saa_select(const ClusterChannel& cluster, const CandidateSet& candidates,
                             std::span<const SegmentPosterior> segment_posteriors,
                             std::span<const PosteriorPair> pairs, const ScenarioSet& scenarios,
                             const ChannelParams& params, int slot);

/// Cluster-free z and phase at slot t in the cluster's local order.
void realized_segment_values(const ClusterChannel& cluster, const ChannelRealization& realization,
                             int t, std::vector<double>& z, std::vector<double>& phase);

/// Realized V_I at every position of `candidates` at slot t.
std::vector<double> realized_values(const ClusterChannel& cluster, std::size_t cluster_index,
                                    const ChannelRealization& realization, int t,
                                    std::span<const std::size_t> candidates,
                                    const ChannelParams& params);

SelectionDecision ideal_select(const ClusterChannel& cluster, std::size_t cluster_index,
                               const ChannelRealization& realization, int t,
                               const CandidateSet& candidates, const ChannelParams& params);

SelectionDecision random_select(const CandidateSet& candidates, Rng& rng, int slot);

/// Channels estimated per slot. Ideal: 2 * sum of delta. SAA: the cluster
/// representatives plus every unique cluster-free segment. Random: only the
/// representatives' aggregates needed for beamforming.
std::size_t csi_overhead(Policy policy, const Deployment& deployment);

}  // namespace mmrelay
