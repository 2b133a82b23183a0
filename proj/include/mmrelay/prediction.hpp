#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <span>

#include <Eigen/Dense>

#include "mmrelay/channel.hpp"

namespace mmrelay {

/// One-step-ahead prediction of z_tau(t+1) for a cluster-free segment.
struct KalmanState {
  int segment = 0;
  int t = 0;          // measurements absorbed so far
  double mean = 0.0;  // mu^{t+1|t}
  double var = 0.0;   // (sigma^{t+1|t})^2
  double last_gain = std::numeric_limits<double>::quiet_NaN();

  /// Gain used by the most recent update; throws before the first one.
  double gain() const;
};

KalmanState kalman_init(const ChannelParams& params, int segment = 0);

/// Absorbs z_tau(t) and returns the prediction for t + 1.
KalmanState kalman_update(const KalmanState& state, double z, const ChannelParams& params);

struct Observation {
  int slot = 0;
  std::size_t position = 0;  // 0-based relay index
  double z_f = 0.0;
  double z_g = 0.0;
};

/// Measurements of a cluster's past representatives, oldest first, limited
/// to the last `window` slots (0 keeps everything).
class ClusterHistory {
 public:
  explicit ClusterHistory(std::size_t window = 0) : window_(window) {}

  /// Returns true when the oldest entry was evicted to make room.
  bool record(const Observation& obs);

  std::size_t window() const { return window_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Observation& operator[](std::size_t i) const { return entries_[i]; }
  const Observation& back() const { return entries_.back(); }
  const std::deque<Observation>& entries() const { return entries_; }

 private:
  std::size_t window_;
  std::deque<Observation> entries_;
};

struct PosteriorPair {
  std::size_t position = 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

/// Posterior of (z^f(p), z^g(p)) at `target_slot` given the history, by a
/// direct solve against the full windowed covariance. `kernel` is the
/// cluster's per-slot 2delta x 2delta kernel.
PosteriorPair gp_condition(const ClusterHistory& history, std::size_t position, int target_slot,
                           const Eigen::MatrixXd& kernel, const ChannelParams& params);

/// Same posterior, maintaining a Cholesky factor of the windowed measurement
/// covariance. A new slot appends two rows; dropping the oldest slot is a
/// rank-2 update of the trailing factor. Quadratic cost per slot.
class GpPredictor {
 public:
  GpPredictor(Eigen::MatrixXd kernel, const ChannelParams& params, std::size_t window);

  void observe(const Observation& obs);
  PosteriorPair predict(std::size_t position, int target_slot) const;

  const ClusterHistory& history() const { return history_; }
  const Eigen::MatrixXd& factor() const { return factor_; }

 private:
  double cov_entry(const Observation& a, int x, const Observation& b, int y) const;
  void drop_oldest();

  Eigen::MatrixXd kernel_;
  double gamma_;
  double sigma_xi2_;
  double jitter_;
  std::size_t delta_;
  ClusterHistory history_;
  Eigen::MatrixXd factor_;  // lower triangular
  Eigen::VectorXd measurements_;
};

}  // namespace mmrelay
