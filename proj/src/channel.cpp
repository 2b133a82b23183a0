#include "mmrelay/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mmrelay {

void ChannelParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("channel parameter out of range: ") + what);
  };
  require(std::isfinite(alpha_l) && alpha_l >= 0.0, "alpha_l");
  require(std::isfinite(alpha_n) && alpha_n >= 0.0, "alpha_n");
  require(std::isfinite(delta_db) && delta_db >= 0.0, "delta_db");
  require(std::isfinite(eta2) && eta2 > 0.0, "eta2");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma");
  require(std::isfinite(beta_m) && beta_m > 0.0, "beta_m");
  require(std::isfinite(sigma_xi2) && sigma_xi2 > 0.0, "sigma_xi2");
  require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2");
  require(std::isfinite(sigma_d2) && sigma_d2 > 0.0, "sigma_d2");
  require(std::isfinite(ps_dbm), "ps_dbm");
  require(std::isfinite(pc_dbm), "pc_dbm");
  require(n_t >= 2, "n_t (needs at least 2 slots)");
}

double path_loss_db(double los_length, std::span<const double> nlos_lengths,
                    double terminal_distance, int intersections, const ChannelParams& params) {
  if (!(terminal_distance > 0.0)) {
    throw std::invalid_argument("path_loss_db: terminal distance must be positive");
  }
  if (!(los_length > 0.0)) throw std::invalid_argument("path_loss_db: LoS length must be positive");
  double loss = params.alpha_l * 10.0 * std::log10(los_length);
  for (double d : nlos_lengths) loss += params.alpha_n * 10.0 * std::log10(d);
  loss += params.alpha_n * 10.0 * std::log10(terminal_distance);
  loss += params.delta_db * intersections;
  return -loss;
}

double path_loss_db(const StreetGraph& graph, const PropagationPath& path, double terminal_distance,
                    const ChannelParams& params) {
  std::vector<double> nlos;
  nlos.reserve(path.nlos_segments.size());
  for (int id : path.nlos_segments) nlos.push_back(graph.segment(id).length);
  return path_loss_db(path.los_length, nlos, terminal_distance,
                      static_cast<int>(path.segments.size()), params);
}

Eigen::MatrixXd temporal_corr(int n_t, double gamma) {
  Eigen::MatrixXd t(n_t, n_t);
  for (int k = 0; k < n_t; ++k) {
    for (int l = 0; l < n_t; ++l) t(k, l) = std::exp(-std::abs(k - l) / gamma);
  }
  return t;
}

Eigen::MatrixXd temporal_cov(int n_t, double eta2, double gamma, double sigma_xi2) {
  if (n_t < 1) throw std::invalid_argument("temporal_cov: n_t must be >= 1");
  Eigen::MatrixXd s = eta2 * temporal_corr(n_t, gamma);
  s.diagonal().array() += sigma_xi2;
  return s;
}

double kernel_ff(double distance, double eta2, double beta) {
  return eta2 * std::exp(-distance / beta);
}

double kernel_fg(double distance, double df_m, double dg_n, double d_full, double d_max,
                 double eta2, double beta) {
  // Equality (same position) must land on the +1 branch despite rounding.
  const double eps = (df_m + dg_n >= d_full - 1e-9 * std::max(1.0, d_full)) ? 1.0 : -1.0;
  return eta2 * std::exp((eps * distance - d_max) / beta);
}

Eigen::Matrix2d prior_pair(const ChannelParams& params, double d_max) {
  const double cross = params.eta2 * std::exp(-d_max / params.beta_m);
  Eigen::Matrix2d k;
  k << params.eta2 + params.sigma_xi2, cross, cross, params.eta2 + params.sigma_xi2;
  return k;
}

Eigen::MatrixXd cluster_kernel(const ClusterRoutes& cluster, const ChannelParams& params) {
  const auto& pl = cluster.placement;
  const auto n = static_cast<Eigen::Index>(pl.delta);
  Eigen::MatrixXd k(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      const double dist = std::abs(pl.positions[ui].offset - pl.positions[uj].offset);
      const double same = kernel_ff(dist, params.eta2, params.beta_m);
      k(i, j) = same;
      k(n + i, n + j) = same;
      // cov(beta^f(p_i), beta^g(p_j))
      const double cross = kernel_fg(dist, cluster.dist_f[uj], cluster.dist_g[ui], pl.d_full,
                                     pl.d_max, params.eta2, params.beta_m);
      k(i, n + j) = cross;
      k(n + j, i) = cross;
    }
  }
  return k;
}

Eigen::MatrixXd cluster_cov(const ClusterRoutes& cluster, const ChannelParams& params, int n_t) {
  if (n_t < 1) throw std::invalid_argument("cluster_cov: n_t must be >= 1");
  const Eigen::MatrixXd k = cluster_kernel(cluster, params);
  const Eigen::MatrixXd t = temporal_corr(n_t, params.gamma);
  const Eigen::Index m = k.rows();
  Eigen::MatrixXd s(m * n_t, m * n_t);
  for (int a = 0; a < n_t; ++a) {
    for (int b = 0; b < n_t; ++b) s.block(a * m, b * m, m, m) = t(a, b) * k;
  }
  s.diagonal().array() += params.sigma_xi2;
  return s;
}

std::complex<double> reconstruct_gain(double f_db, double phase) {
  const double magnitude = std::exp(std::numbers::ln10 * f_db / 20.0);
  return std::polar(magnitude, 2.0 * std::numbers::pi * phase);
}

double aggregate_power(std::span<const double> path_db, std::span<const double> path_phase) {
  if (path_db.size() != path_phase.size()) {
    throw std::invalid_argument("aggregate_power: size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < path_db.size(); ++i) {
    const double ai = std::exp(0.5 * kChi * path_db[i]);
    for (std::size_t k = 0; k < path_db.size(); ++k) {
      const double ak = std::exp(0.5 * kChi * path_db[k]);
      total += ai * ak * std::cos(2.0 * std::numbers::pi * (path_phase[i] - path_phase[k]));
    }
  }
  return std::max(total, 0.0);
}

ClusterChannel::ClusterChannel(const ClusterRoutes& routes, const StreetGraph& graph,
                               const ChannelParams& params,
                               std::span<const int> realization_segments)
    : id_(routes.placement.id),
      delta_(routes.placement.delta),
      d_max_(routes.placement.d_max),
      segments_(routes.segments),
      kernel_(cluster_kernel(routes, params)) {
  for (int seg : segments_) {
    auto it = std::lower_bound(realization_segments.begin(), realization_segments.end(), seg);
    if (it == realization_segments.end() || *it != seg) {
      throw std::invalid_argument("ClusterChannel: segment missing from realization layout");
    }
    series_index_.push_back(static_cast<std::size_t>(it - realization_segments.begin()));
  }
  auto local = [&](int seg) {
    return static_cast<std::size_t>(std::lower_bound(segments_.begin(), segments_.end(), seg) -
                                    segments_.begin());
  };
  const std::array<const std::vector<PropagationPath>*, 2> sides{&routes.f_paths, &routes.g_paths};
  const std::array<const std::vector<double>*, 2> dists{&routes.dist_f, &routes.dist_g};
  for (std::size_t s = 0; s < 2; ++s) {
    for (const auto& path : *sides[s]) {
      PathTerms terms;
      // Path loss with a 1 m in-segment leg isolates the position-free part.
      terms.base_db = path_loss_db(graph, path, 1.0, params);
      for (int seg : path.segments) terms.segments.push_back(local(seg));
      paths_[s].push_back(std::move(terms));
    }
    for (double d : *dists[s]) {
      if (!(d > 0.0)) throw ConfigError("relay position on an intersection");
      terminal_db_[s].push_back(-params.alpha_n * 10.0 * std::log10(d));
    }
  }
}

void ClusterChannel::path_terms(Side side, std::size_t pos, double z_pair, double phase_pair,
                                std::span<const double> z, std::span<const double> phase,
                                std::vector<double>& path_db,
                                std::vector<double>& path_phase) const {
  path_db.clear();
  path_phase.clear();
  for (const auto& p : paths_[idx(side)]) {
    double f = p.base_db + terminal_db(side, pos) + z_pair;
    double ph = phase_pair;
    for (std::size_t s : p.segments) {
      f += z[s];
      ph += phase[s];
    }
    path_db.push_back(f);
    path_phase.push_back(ph);
  }
}

double ClusterChannel::path_sum_power(Side side, std::span<const double> z,
                                      std::span<const double> phase) const {
  double re = 0.0;
  double im = 0.0;
  for (const auto& p : paths_[idx(side)]) {
    double f = p.base_db;
    double ph = 0.0;
    for (std::size_t s : p.segments) {
      f += z[s];
      ph += phase[s];
    }
    const double mag = std::exp(0.5 * kChi * f);
    const double arg = 2.0 * std::numbers::pi * ph;
    re += mag * std::cos(arg);
    im += mag * std::sin(arg);
  }
  return re * re + im * im;
}

double ClusterChannel::aggregate(Side side, std::size_t pos, double z_pair,
                                 std::span<const double> z, std::span<const double> phase) const {
  return std::exp(kChi * (terminal_db(side, pos) + z_pair)) * path_sum_power(side, z, phase);
}

std::uint64_t ChannelRealization::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::vector<double>& v) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 1099511628211ULL;
      }
    }
  };
  for (const auto& s : segments) {
    mix(s.beta);
    mix(s.xi);
    mix(s.phase);
  }
  for (const auto& c : clusters) {
    mix(c.beta);
    mix(c.xi);
    mix(c.phase);
  }
  return h;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& kernel, double scale) {
  Eigen::LLT<Eigen::MatrixXd> llt(kernel);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = kernel;
  jittered.diagonal().array() += 1e-9 * scale;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) {
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(kernel).eigenvalues().minCoeff();
    throw std::runtime_error("covariance kernel is not positive semidefinite (min eigenvalue " +
                             std::to_string(min_eig) + ")");
  }
  return llt.matrixL();
}

ChannelSampler::ChannelSampler(const Deployment& deployment, const ChannelParams& params)
    : params_(params), segments_(deployment.cluster_free_segments()) {
  params_.validate();
  for (const auto& routes : deployment.clusters()) {
    clusters_.emplace_back(routes, deployment.graph(), params_, segments_);
    kernel_factors_.push_back(psd_factor(clusters_.back().kernel(), params_.eta2));
  }
}

ChannelRealization ChannelSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_t = params_.n_t;
  const double eta = std::sqrt(params_.eta2);
  const double kappa = params_.kappa();
  const double innovation = std::sqrt(1.0 - kappa * kappa);
  const double xi_sd = std::sqrt(params_.sigma_xi2);

  ChannelRealization out;
  out.segments.reserve(segments_.size());
  for (int seg : segments_) {
    SegmentSeries s;
    s.segment = seg;
    s.beta.resize(static_cast<std::size_t>(n_t) + 1);
    s.xi.resize(static_cast<std::size_t>(n_t));
    s.phase.resize(static_cast<std::size_t>(n_t));
    s.beta[0] = eta * normal(rng);
    for (int t = 1; t <= n_t; ++t) {
      s.beta[static_cast<std::size_t>(t)] =
          kappa * s.beta[static_cast<std::size_t>(t - 1)] + innovation * eta * normal(rng);
    }
    for (auto& x : s.xi) x = xi_sd * normal(rng);
    for (auto& p : s.phase) p = unit_uniform(rng);
    out.segments.push_back(std::move(s));
  }

  // Vector AR(1) with stationary covariance K reproduces T (x) K exactly.
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const auto& factor = kernel_factors_[c];
    const Eigen::Index m = factor.rows();
    ClusterField f;
    f.delta = clusters_[c].delta();
    f.n_t = n_t;
    const auto total = static_cast<std::size_t>(m) * static_cast<std::size_t>(n_t);
    f.beta.resize(total);
    f.xi.resize(total);
    f.phase.resize(total);
    Eigen::VectorXd noise(m);
    Eigen::VectorXd state(m);
    for (int t = 1; t <= n_t; ++t) {
      for (Eigen::Index i = 0; i < m; ++i) noise(i) = normal(rng);
      const Eigen::VectorXd draw = factor * noise;
      state = (t == 1) ? draw : Eigen::VectorXd(kappa * state + innovation * draw);
      std::copy(state.data(), state.data() + m,
                f.beta.begin() + static_cast<std::ptrdiff_t>((t - 1) * m));
    }
    for (auto& x : f.xi) x = xi_sd * normal(rng);
    for (auto& p : f.phase) p = unit_uniform(rng);
    out.clusters.push_back(std::move(f));
  }
  return out;
}

}  // namespace mmrelay
