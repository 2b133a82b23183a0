#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmrelay/random.hpp"
#include "mmrelay/topology.hpp"

namespace mmrelay {

/// ln(10)/10: converts dB to natural-log power.
inline constexpr double kChi = std::numbers::ln10 / 10.0;

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct ChannelParams {
  double alpha_l = 2.1;
  double alpha_n = 2.1;
  double delta_db = 10.0;   // loss per traversed intersection
  double eta2 = 40.0;       // shadowing power, dB^2
  double gamma = 15.0;      // correlation time, slots
  double beta_m = 10.0;     // correlation distance, m
  double sigma_xi2 = 20.0;  // multipath power, dB^2
  double sigma2 = 1.0;      // relay noise
  double sigma_d2 = 1.0;    // destination noise
  double ps_dbm = 80.0;
  double pc_dbm = 100.0;
  int n_t = 50;

  double kappa() const { return std::exp(-1.0 / gamma); }
  double ps() const { return dbm_to_watts(ps_dbm); }
  double pc() const { return dbm_to_watts(pc_dbm); }

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
};

enum class Side : int { incoming = 0, outgoing = 1 };

// ---------------------------------------------------------------------------
// Deterministic path loss

/// a = -[alpha_L 10log10 d_los + alpha_N sum 10log10 d_nlos
///       + alpha_N 10log10 d_terminal + Delta * intersections]  (dB)
double path_loss_db(double los_length, std::span<const double> nlos_lengths,
                    double terminal_distance, int intersections, const ChannelParams& params);

/// Path loss of a terminal-to-cluster path ending `terminal_distance` metres
/// into the cluster segment. The cluster segment adds one traversed
/// intersection.
double path_loss_db(const StreetGraph& graph, const PropagationPath& path, double terminal_distance,
                    const ChannelParams& params);

// ---------------------------------------------------------------------------
// Covariance structure

/// T_{kl} = exp(-|k-l|/gamma), k,l = 0..n_t-1.
Eigen::MatrixXd temporal_corr(int n_t, double gamma);

/// eta2 * T + sigma_xi2 * I.
Eigen::MatrixXd temporal_cov(int n_t, double eta2, double gamma, double sigma_xi2);

/// eta2 * exp(-distance / beta); same form for the outgoing kernel.
double kernel_ff(double distance, double eta2, double beta);

/// Cross kernel between the incoming term at p_n and the outgoing term at p_m.
/// `df_m` is d^f(p_m), `dg_n` is d^g(p_n).
double kernel_fg(double distance, double df_m, double dg_n, double d_full, double d_max,
                 double eta2, double beta);

/// Prior 2x2 covariance of (z^f(p), z^g(p)) at any single position.
Eigen::Matrix2d prior_pair(const ChannelParams& params, double d_max);

/// Per-slot 2delta x 2delta cross-covariance [[K_FF, K_FG], [K_FG^T, K_GG]],
/// rows ordered (incoming p_1..p_delta, outgoing p_1..p_delta).
Eigen::MatrixXd cluster_kernel(const ClusterRoutes& cluster, const ChannelParams& params);

/// T (x) K + sigma_xi2 I over n_t slots, slot-major.
Eigen::MatrixXd cluster_cov(const ClusterRoutes& cluster, const ChannelParams& params, int n_t);

// ---------------------------------------------------------------------------
// Gains

/// exp(ln(10) F / 20) * exp(j 2 pi phase).
std::complex<double> reconstruct_gain(double f_db, double phase);

/// sum_i sum_k exp(chi/2 F_i) exp(chi/2 F_k) cos(Phi_i - Phi_k), with phases
/// in cycles. Equals |sum_i reconstruct_gain(F_i, Phi_i)|^2.
double aggregate_power(std::span<const double> path_db, std::span<const double> path_phase);

struct PathTerms {
  double base_db = 0.0;  // path loss without the in-cluster-segment term
  std::vector<std::size_t> segments;  // local indices into ClusterChannel::segments
};

/// Deterministic per-cluster channel quantities derived once per experiment.
class ClusterChannel {
 public:
  ClusterChannel(const ClusterRoutes& routes, const StreetGraph& graph,
                 const ChannelParams& params, std::span<const int> realization_segments);

  int id() const { return id_; }
  int delta() const { return delta_; }
  std::span<const int> segments() const { return segments_; }
  /// Realization series index of each local segment.
  std::span<const std::size_t> series_index() const { return series_index_; }
  std::span<const PathTerms> paths(Side side) const { return paths_[idx(side)]; }
  /// -alpha_N 10 log10 d(p_i) for the in-segment leg.
  double terminal_db(Side side, std::size_t pos) const { return terminal_db_[idx(side)][pos]; }
  const Eigen::MatrixXd& kernel() const { return kernel_; }
  double d_max() const { return d_max_; }

  /// Per-path F and Phi given the cluster pair at the position and
  /// local-order cluster-free z/phase values.
  void path_terms(Side side, std::size_t pos, double z_pair, double phase_pair,
                  std::span<const double> z, std::span<const double> phase,
                  std::vector<double>& path_db, std::vector<double>& path_phase) const;

  /// |sum over paths of the cluster-free part|^2. The cluster-segment factor
  /// is common to every path, so the aggregate at position p is
  /// exp(chi (terminal_db(p) + z_pair)) times this value.
  double path_sum_power(Side side, std::span<const double> z, std::span<const double> phase) const;

  double aggregate(Side side, std::size_t pos, double z_pair, std::span<const double> z,
                   std::span<const double> phase) const;

 private:
  static std::size_t idx(Side s) { return static_cast<std::size_t>(s); }

  int id_ = 0;
  int delta_ = 0;
  double d_max_ = 0.0;
  std::vector<int> segments_;
  std::vector<std::size_t> series_index_;
  std::array<std::vector<PathTerms>, 2> paths_;
  std::array<std::vector<double>, 2> terminal_db_;
  Eigen::MatrixXd kernel_;
};

// ---------------------------------------------------------------------------
// Realizations

/// One cluster-free segment over the horizon. beta has n_t + 1 entries
/// (t = 0..n_t); xi and phase are indexed by t - 1.
struct SegmentSeries {
  int segment = 0;
  std::vector<double> beta;
  std::vector<double> xi;
  std::vector<double> phase;

  double z(int t) const { return beta[static_cast<std::size_t>(t)] + xi[static_cast<std::size_t>(t - 1)]; }
};

/// Space-time field on a cluster segment, t = 1..n_t.
struct ClusterField {
  int delta = 0;
  int n_t = 0;
  std::vector<double> beta;
  std::vector<double> xi;
  std::vector<double> phase;

  std::size_t index(int t, Side side, std::size_t pos) const {
    return (static_cast<std::size_t>(t - 1) * 2 + static_cast<std::size_t>(side)) *
               static_cast<std::size_t>(delta) + pos;
  }
  double z(int t, Side side, std::size_t pos) const {
    const auto k = index(t, side, pos);
    return beta[k] + xi[k];
  }
};

struct ChannelRealization {
  std::vector<SegmentSeries> segments;  // ordered as Deployment::cluster_free_segments()
  std::vector<ClusterField> clusters;   // ordered as Deployment::clusters()

  /// FNV-1a over every stored value; equal realizations hash equal.
  std::uint64_t fingerprint() const;
};

/// Draws channel realizations. Factorizes each cluster kernel once.
class ChannelSampler {
 public:
  ChannelSampler(const Deployment& deployment, const ChannelParams& params);

  ChannelRealization sample(Rng& rng) const;

  const ChannelParams& params() const { return params_; }
  std::span<const ClusterChannel> clusters() const { return clusters_; }
  std::span<const int> segments() const { return segments_; }

 private:
  ChannelParams params_;
  std::vector<int> segments_;
  std::vector<ClusterChannel> clusters_;
  std::vector<Eigen::MatrixXd> kernel_factors_;
};

/// Lower Cholesky factor of a PSD kernel. Adds 1e-9 * scale to the diagonal
/// once if the plain factorization fails; throws std::runtime_error if that
/// fails too.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& kernel, double scale);

}  // namespace mmrelay
