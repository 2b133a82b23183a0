#include "mmrelay/beamforming.hpp"

#include <cmath>
#include <stdexcept>

namespace mmrelay {

namespace {

void check_sizes(const ClusterAggregates& a) {
  if (a.incoming.size() != a.outgoing.size()) {
    throw std::invalid_argument("cluster aggregates: incoming/outgoing size mismatch");
  }
}

}  // namespace

double cluster_sinr_term(double f_power, double g_power, const ChannelParams& params) {
  const double ps = params.ps();
  const double pc = params.pc();
  const double den = ps * params.sigma_d2 * f_power + pc * params.sigma2 * g_power +
                     params.sigma2 * params.sigma_d2;
  return pc * ps * f_power * g_power / den;
}

OptimalValue optimal_value(std::span<const double> f_power, std::span<const double> g_power,
                           const ChannelParams& params) {
  if (f_power.size() != g_power.size()) throw std::invalid_argument("optimal_value: size mismatch");
  OptimalValue v;
  v.per_cluster.reserve(f_power.size());
  for (std::size_t r = 0; r < f_power.size(); ++r) {
    const double term = cluster_sinr_term(f_power[r], g_power[r], params);
    v.per_cluster.push_back(term);
    v.total += term;
  }
  return v;
}

OptimalValue optimal_value(const ClusterAggregates& aggregates, const ChannelParams& params) {
  check_sizes(aggregates);
  std::vector<double> f, g;
  for (std::size_t r = 0; r < aggregates.size(); ++r) {
    f.push_back(aggregates.f_power(r));
    g.push_back(aggregates.g_power(r));
  }
  return optimal_value(f, g, params);
}

BeamWeights optimal_weights(const ClusterAggregates& aggregates, const ChannelParams& params) {
  check_sizes(aggregates);
  const double ps = params.ps();
  const double pc = params.pc();
  const std::size_t n = aggregates.size();
  // Direction u = D^{1/2} w is proportional to D_r^{1/2} conj(h_r) / den_r,
  // which makes w_r proportional to conj(h_r) / den_r.
  std::vector<std::complex<double>> u(n);
  std::vector<double> d(n);
  double norm2 = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double f = aggregates.f_power(r);
    const double g = aggregates.g_power(r);
    d[r] = ps * f + params.sigma2;
    const double den = ps * params.sigma_d2 * f + pc * params.sigma2 * g + params.sigma2 * params.sigma_d2;
    const std::complex<double> h = aggregates.outgoing[r] * aggregates.incoming[r];
    u[r] = std::sqrt(d[r]) * ps * std::conj(h) / den;
    norm2 += std::norm(u[r]);
  }
  BeamWeights out;
  out.w.assign(n, {0.0, 0.0});
  if (!(norm2 > 0.0)) return out;
  const double scale = std::sqrt(pc / norm2);
  for (std::size_t r = 0; r < n; ++r) out.w[r] = scale * u[r] / std::sqrt(d[r]);
  return out;
}

double relay_power(const BeamWeights& weights, const ClusterAggregates& aggregates,
                   const ChannelParams& params) {
  check_sizes(aggregates);
  if (weights.w.size() != aggregates.size()) throw std::invalid_argument("relay_power: size mismatch");
  double p = 0.0;
  for (std::size_t r = 0; r < aggregates.size(); ++r) {
    p += std::norm(weights.w[r]) * (params.ps() * aggregates.f_power(r) + params.sigma2);
  }
  return p;
}

double sinr(const BeamWeights& weights, const ClusterAggregates& aggregates,
            const ChannelParams& params) {
  const double power = relay_power(weights, aggregates, params);
  const double pc = params.pc();
  if (power > pc * (1.0 + 1e-6)) {
    throw std::invalid_argument("sinr: weights exceed the relay power budget");
  }
  std::complex<double> signal{0.0, 0.0};
  double interference = 0.0;
  for (std::size_t r = 0; r < aggregates.size(); ++r) {
    signal += weights.w[r] * aggregates.outgoing[r] * aggregates.incoming[r];
    interference += std::norm(weights.w[r]) * params.sigma2 * aggregates.g_power(r);
  }
  return params.ps() * std::norm(signal) / (interference + params.sigma_d2);
}

}  // namespace mmrelay
