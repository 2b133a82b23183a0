#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mmrelay/channel.hpp"

namespace mmrelay {

/// Aggregate channels seen by each cluster representative: 1^T f_r and 1^T g_r.
struct ClusterAggregates {
  std::vector<std::complex<double>> incoming;
  std::vector<std::complex<double>> outgoing;

  std::size_t size() const { return incoming.size(); }
  double f_power(std::size_t r) const { return std::norm(incoming[r]); }
  double g_power(std::size_t r) const { return std::norm(outgoing[r]); }
};

/// Per-relay complex weights w_r; relay r retransmits w_r times what it received.
struct BeamWeights {
  std::vector<std::complex<double>> w;
};

struct OptimalValue {
  double total = 0.0;
  std::vector<double> per_cluster;
};

/// Single-cluster summand of the optimal SINR, linear units.
double cluster_sinr_term(double f_power, double g_power, const ChannelParams& params);

/// Closed-form optimum of the total-power-constrained AF problem.
OptimalValue optimal_value(std::span<const double> f_power, std::span<const double> g_power,
                           const ChannelParams& params);
OptimalValue optimal_value(const ClusterAggregates& aggregates, const ChannelParams& params);

/// Weights attaining optimal_value with sum_r |w_r|^2 D_r = P_C. All-dead
/// networks return zero weights.
BeamWeights optimal_weights(const ClusterAggregates& aggregates, const ChannelParams& params);

/// Transmit power sum_r |w_r|^2 (P_S |1^T f_r|^2 + sigma^2).
double relay_power(const BeamWeights& weights, const ClusterAggregates& aggregates,
                   const ChannelParams& params);

/// Destination SINR for arbitrary weights. Throws std::invalid_argument when
/// the power budget is exceeded by more than 1e-6 relative.
double sinr(const BeamWeights& weights, const ClusterAggregates& aggregates,
            const ChannelParams& params);

}  // namespace mmrelay
