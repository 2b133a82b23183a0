#include "mmrelay/prediction.hpp"

#include <cmath>
#include <stdexcept>

namespace mmrelay {

double KalmanState::gain() const {
  if (t == 0) throw std::logic_error("Kalman gain is undefined before the first update");
  return last_gain;
}

KalmanState kalman_init(const ChannelParams& params, int segment) {
  KalmanState s;
  s.segment = segment;
  s.mean = 0.0;
  s.var = params.eta2 + params.sigma_xi2;
  return s;
}

KalmanState kalman_update(const KalmanState& state, double z, const ChannelParams& params) {
  if (!std::isfinite(z)) throw std::invalid_argument("kalman_update: non-finite measurement");
  const double kappa = params.kappa();
  const double gain = (state.var - params.sigma_xi2) / state.var;
  KalmanState next = state;
  next.t = state.t + 1;
  next.last_gain = gain;
  next.mean = kappa * (1.0 - gain) * state.mean + kappa * gain * z;
  next.var = (1.0 + kappa * kappa * gain) * params.sigma_xi2 + (1.0 - kappa * kappa) * params.eta2;
  return next;
}

bool ClusterHistory::record(const Observation& obs) {
  if (!entries_.empty() && obs.slot <= entries_.back().slot) {
    throw std::invalid_argument("ClusterHistory: slots must increase");
  }
  entries_.push_back(obs);
  if (window_ > 0 && entries_.size() > window_) {
    entries_.pop_front();
    return true;
  }
  return false;
}

namespace {

double value_of(const Observation& o, int x) { return x == 0 ? o.z_f : o.z_g; }

Eigen::Matrix2d prior_at(const Eigen::MatrixXd& kernel, std::size_t delta, std::size_t pos,
                         double sigma_xi2) {
  const auto p = static_cast<Eigen::Index>(pos);
  const auto n = static_cast<Eigen::Index>(delta);
  Eigen::Matrix2d k;
  k << kernel(p, p), kernel(p, n + p), kernel(n + p, p), kernel(n + p, n + p);
  k.diagonal().array() += sigma_xi2;
  return k;
}

double kernel_at(const Eigen::MatrixXd& kernel, std::size_t delta, int x, std::size_t i, int y,
                 std::size_t j) {
  return kernel(static_cast<Eigen::Index>(static_cast<std::size_t>(x) * delta + i),
                static_cast<Eigen::Index>(static_cast<std::size_t>(y) * delta + j));
}

}  // namespace

PosteriorPair gp_condition(const ClusterHistory& history, std::size_t position, int target_slot,
                           const Eigen::MatrixXd& kernel, const ChannelParams& params) {
  const auto delta = static_cast<std::size_t>(kernel.rows() / 2);
  if (position >= delta) throw std::out_of_range("gp_condition: position out of range");
  PosteriorPair out;
  out.position = position;
  out.cov = prior_at(kernel, delta, position, params.sigma_xi2);
  if (history.empty()) return out;

  const auto n = static_cast<Eigen::Index>(2 * history.size());
  Eigen::MatrixXd cov(n, n);
  Eigen::MatrixXd cross(n, 2);
  Eigen::VectorXd m(n);
  for (std::size_t a = 0; a < history.size(); ++a) {
    const auto& oa = history[a];
    if (oa.slot >= target_slot) throw std::invalid_argument("gp_condition: history reaches target slot");
    const double lag = std::exp(-(target_slot - oa.slot) / params.gamma);
    for (int x = 0; x < 2; ++x) {
      const auto ra = static_cast<Eigen::Index>(2 * a) + x;
      m(ra) = value_of(oa, x);
      for (int y = 0; y < 2; ++y) {
        cross(ra, y) = lag * kernel_at(kernel, delta, x, oa.position, y, position);
      }
      for (std::size_t b = 0; b < history.size(); ++b) {
        const auto& ob = history[b];
        const double tlag = std::exp(-std::abs(oa.slot - ob.slot) / params.gamma);
        for (int y = 0; y < 2; ++y) {
          const auto rb = static_cast<Eigen::Index>(2 * b) + y;
          cov(ra, rb) = tlag * kernel_at(kernel, delta, x, oa.position, y, ob.position);
          if (a == b && x == y) cov(ra, rb) += params.sigma_xi2;
        }
      }
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-9 * (params.eta2 + params.sigma_xi2);
    llt.compute(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("gp_condition: singular covariance");
  }
  const Eigen::MatrixXd solved = llt.solve(cross);  // Sigma^-1 sigma_bar
  out.mean = solved.transpose() * m;
  out.cov -= cross.transpose() * solved;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

GpPredictor::GpPredictor(Eigen::MatrixXd kernel, const ChannelParams& params, std::size_t window)
    : kernel_(std::move(kernel)),
      gamma_(params.gamma),
      sigma_xi2_(params.sigma_xi2),
      jitter_(1e-9 * (params.eta2 + params.sigma_xi2)),
      delta_(static_cast<std::size_t>(kernel_.rows() / 2)),
      history_(window) {}

double GpPredictor::cov_entry(const Observation& a, int x, const Observation& b, int y) const {
  return std::exp(-std::abs(a.slot - b.slot) / gamma_) *
         kernel_at(kernel_, delta_, x, a.position, y, b.position);
}

namespace {

// In-place L L^T + v v^T.
void cholesky_rank1_update(Eigen::MatrixXd& l, Eigen::VectorXd v) {
  const Eigen::Index n = l.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double r = std::hypot(l(k, k), v(k));
    const double c = r / l(k, k);
    const double s = v(k) / l(k, k);
    l(k, k) = r;
    if (k + 1 < n) {
      const Eigen::Index m = n - k - 1;
      l.col(k).tail(m) = (l.col(k).tail(m) + s * v.tail(m)) / c;
      v.tail(m) = c * v.tail(m) - s * l.col(k).tail(m);
    }
  }
}

}  // namespace

void GpPredictor::drop_oldest() {
  // M_22 = L_21 L_21^T + L_22 L_22^T
  const Eigen::Index n = factor_.rows() - 2;
  Eigen::MatrixXd next = factor_.bottomRightCorner(n, n);
  const Eigen::MatrixXd l21 = factor_.bottomLeftCorner(n, 2);
  cholesky_rank1_update(next, l21.col(0));
  cholesky_rank1_update(next, l21.col(1));
  factor_ = std::move(next);
  Eigen::VectorXd m = measurements_.tail(n);
  measurements_ = std::move(m);
}

void GpPredictor::observe(const Observation& obs) {
  if (obs.position >= delta_) throw std::out_of_range("GpPredictor: position out of range");
  if (!std::isfinite(obs.z_f) || !std::isfinite(obs.z_g)) {
    throw std::invalid_argument("GpPredictor: non-finite measurement");
  }
  if (history_.record(obs)) drop_oldest();

  const Eigen::Index n = factor_.rows();
  Eigen::MatrixXd b(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& o = history_[static_cast<std::size_t>(r / 2)];
    for (int y = 0; y < 2; ++y) b(r, y) = cov_entry(o, static_cast<int>(r % 2), obs, y);
  }
  Eigen::Matrix2d d;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) d(x, y) = cov_entry(obs, x, obs, y) + (x == y ? sigma_xi2_ : 0.0);
  }

  // [L 0; w^T chol(S)] with w = L^-1 b and Schur complement S = d - w^T w.
  Eigen::MatrixXd w = b;
  if (n > 0) factor_.triangularView<Eigen::Lower>().solveInPlace(w);
  Eigen::Matrix2d schur = d - w.transpose() * w;
  Eigen::LLT<Eigen::Matrix2d> llt(schur);
  if (llt.info() != Eigen::Success) {
    schur.diagonal().array() += jitter_;
    llt.compute(schur);
    if (llt.info() != Eigen::Success) throw std::runtime_error("GpPredictor: singular covariance");
  }

  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n + 2, n + 2);
  next.topLeftCorner(n, n) = factor_;
  next.bottomLeftCorner(2, n) = w.transpose();
  next.bottomRightCorner(2, 2) = llt.matrixL();
  factor_ = std::move(next);

  Eigen::VectorXd m(n + 2);
  m.head(n) = measurements_;
  m(n) = obs.z_f;
  m(n + 1) = obs.z_g;
  measurements_ = std::move(m);
}

PosteriorPair GpPredictor::predict(std::size_t position, int target_slot) const {
  if (position >= delta_) throw std::out_of_range("GpPredictor: position out of range");
  PosteriorPair out;
  out.position = position;
  out.cov = prior_at(kernel_, delta_, position, sigma_xi2_);
  if (history_.empty()) return out;
  const Eigen::Index n = factor_.rows();
  Eigen::MatrixXd cross(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& o = history_[static_cast<std::size_t>(r / 2)];
    const double lag = std::exp(-(target_slot - o.slot) / gamma_);
    for (int y = 0; y < 2; ++y) {
      cross(r, y) = lag * kernel_at(kernel_, delta_, static_cast<int>(r % 2), o.position, y, position);
    }
  }
  const auto l = factor_.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd half = l.solve(cross);  // L^-1 sigma_bar
  const Eigen::VectorXd whitened = l.solve(measurements_);
  out.mean = half.transpose() * whitened;
  out.cov -= half.transpose() * half;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace mmrelay
