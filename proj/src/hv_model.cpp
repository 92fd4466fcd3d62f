#include "acceval/hv_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "acceval/error.hpp"

namespace acceval {

namespace {

template <typename T>
void check_length(const std::vector<T>& series, std::size_t n, const char* name) {
  if (!series.empty() && series.size() != n) {
    throw DataError(std::string("trajectory series '") + name + "' has " +
                    std::to_string(series.size()) + " samples, expected " + std::to_string(n));
  }
}

template <typename T>
std::vector<T> sub(const std::vector<T>& v, std::size_t first, std::size_t count) {
  if (v.empty()) return {};
  return std::vector<T>(v.begin() + first, v.begin() + first + count);
}

double sample_std(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / (n - 1.0));
}

// Robust scale of the residuals: median of the largest |r| after discarding
// the p - 1 smallest, divided by the normal consistency constant.
double mad_sigma(const Eigen::VectorXd& r, int p) {
  std::vector<double> a(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) a[i] = std::abs(r[i]);
  std::sort(a.begin(), a.end());
  const std::size_t start = static_cast<std::size_t>(std::max(p, 1) - 1);
  const std::size_t m = a.size() - start;
  const std::size_t mid = start + m / 2;
  const double med = (m % 2 == 1) ? a[mid] : 0.5 * (a[mid - 1] + a[mid]);
  return med / 0.6745;
}

}  // namespace

void TrajectoryLog::validate() const {
  const std::size_t n = size();
  if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
    throw DataError("trajectory sample period must be positive");
  }
  if (n < 2) throw DataError("trajectory needs at least 2 samples");
  check_length(range, n, "range");
  if (range.empty()) throw DataError("trajectory has no range series");
  check_length(range_rate, n, "range_rate");
  check_length(latitude, n, "latitude");
  check_length(longitude, n, "longitude");
  check_length(cut_in, n, "cut_in");
  check_length(lane_change, n, "lane_change");
  if (latitude.empty() != longitude.empty()) {
    throw DataError("trajectory position needs both latitude and longitude");
  }
  for (double r : range) {
    if (!std::isfinite(r) || r < 0.0) throw DataError("range samples must be finite and >= 0");
  }
}

TrajectoryLog TrajectoryLog::slice(std::size_t first, std::size_t count) const {
  TrajectoryLog out;
  out.sample_period = sample_period;
  out.ego_speed = sub(ego_speed, first, count);
  out.range = sub(range, first, count);
  out.range_rate = sub(range_rate, first, count);
  out.latitude = sub(latitude, first, count);
  out.longitude = sub(longitude, first, count);
  out.cut_in = sub(cut_in, first, count);
  out.lane_change = sub(lane_change, first, count);
  return out;
}

EventCriteria EventCriteria::none() {
  EventCriteria c;
  c.range.reset();
  c.longitude.reset();
  c.latitude.reset();
  c.min_duration.reset();
  c.require_no_cut_in = false;
  c.require_no_lane_change = false;
  return c;
}

void EventCriteria::validate() const {
  for (const auto* iv : {&range, &longitude, &latitude}) {
    if (*iv && !((*iv)->lo < (*iv)->hi)) throw std::invalid_argument("criteria interval must have lo < hi");
  }
  if (min_duration && !(*min_duration > 0.0)) {
    throw std::invalid_argument("criteria min_duration must be positive");
  }
}

void HvModelParams::validate() const {
  if (!(sigma_u > 0.0)) throw std::invalid_argument("sigma_u must be positive");
  if (!(u_min < u_max)) throw std::invalid_argument("u_min must be below u_max");
  if (!(a_min < a_max)) throw std::invalid_argument("a_min must be below a_max");
  if (!(v_min < v_max)) throw std::invalid_argument("v_min must be below v_max");
  for (double x : {h0, h1, h2}) {
    if (!std::isfinite(x)) throw std::invalid_argument("driver model coefficients must be finite");
  }
}

LeadKinematics estimate_lead_kinematics(const TrajectoryLog& log, std::size_t smoothing_window) {
  log.validate();
  const std::size_t n = log.size();
  if (smoothing_window < 1) throw std::invalid_argument("smoothing window must be >= 1");
  if (n < smoothing_window + 1) {
    throw DataError("trajectory has " + std::to_string(n) + " samples; smoothing window " +
                    std::to_string(smoothing_window) + " needs at least " +
                    std::to_string(smoothing_window + 1));
  }
  const double dt = log.sample_period;

  std::vector<double> range_rate = log.range_rate;
  if (range_rate.empty()) {
    range_rate.resize(n);
    for (std::size_t k = 0; k + 1 < n; ++k) range_rate[k] = (log.range[k + 1] - log.range[k]) / dt;
    range_rate[n - 1] = range_rate[n - 2];
  }

  LeadKinematics out;
  out.lead_speed.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.lead_speed[k] = range_rate[k] + log.ego_speed[k];

  std::vector<double> raw(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    raw[k] = (out.lead_speed[k + 1] - out.lead_speed[k]) / dt;
  }

  // Centered moving average; (window - 1) samples are trimmed in total.
  const std::size_t w = smoothing_window;
  const std::size_t count = raw.size() - w + 1;
  out.lead_accel.resize(count);
  double acc = std::accumulate(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
  out.lead_accel[0] = acc / static_cast<double>(w);
  for (std::size_t j = 1; j < count; ++j) {
    acc += raw[j + w - 1] - raw[j - 1];
    out.lead_accel[j] = acc / static_cast<double>(w);
  }
  out.valid_window = IndexRange{(w - 1) / 2, count};
  return out;
}

std::vector<TrajectoryLog> filter_events(std::span<const TrajectoryLog> logs,
                                         const EventCriteria& criteria) {
  criteria.validate();
  std::vector<TrajectoryLog> events;
  for (const auto& log : logs) {
    log.validate();
    const std::size_t n = log.size();
    auto accepted = [&](std::size_t k) {
      if (criteria.range && !criteria.range->contains_open(log.range[k])) return false;
      if (!log.latitude.empty()) {
        if (criteria.latitude && !criteria.latitude->contains_open(log.latitude[k])) return false;
        if (criteria.longitude && !criteria.longitude->contains_open(log.longitude[k])) return false;
      }
      if (criteria.require_no_cut_in && !log.cut_in.empty() && log.cut_in[k]) return false;
      if (criteria.require_no_lane_change && !log.lane_change.empty() && log.lane_change[k]) {
        return false;
      }
      return true;
    };

    std::size_t k = 0;
    while (k < n) {
      if (!accepted(k)) {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < n && accepted(end)) ++end;
      const std::size_t count = end - k;
      const double duration = static_cast<double>(count - 1) * log.sample_period;
      const bool long_enough = criteria.min_duration ? duration > *criteria.min_duration : true;
      if (count >= 2 && long_enough) events.push_back(log.slice(k, count));
      k = end;
    }
  }
  return events;
}

HvFit fit_hv_params(std::span<const LeadKinematics> events, const HvModelParams& base,
                    const FitOptions& options) {
  std::size_t rows = 0;
  for (const auto& ev : events) {
    if (ev.lead_accel.size() >= 2) rows += ev.lead_accel.size() - 1;
  }
  if (rows < 10) {
    throw DataError("fit needs at least 10 regression rows, got " + std::to_string(rows));
  }

  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd y(rows);
  std::size_t r = 0;
  for (const auto& ev : events) {
    const std::size_t len = ev.lead_accel.size();
    if (ev.valid_window.first + len > ev.lead_speed.size()) {
      throw DataError("lead kinematics window exceeds the speed series");
    }
    for (std::size_t i = 0; i + 1 < len; ++i, ++r) {
      X(r, 0) = 1.0;
      X(r, 1) = ev.lead_accel[i];
      X(r, 2) = ev.lead_speed[ev.valid_window.first + i];
      y(r) = ev.lead_accel[i + 1];
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) {
    throw SingularFit("regression design matrix is rank deficient (rank " +
                      std::to_string(qr.rank()) + " of 3); data lacks acceleration or speed variation");
  }
  Eigen::Vector3d b = qr.solve(y);

  const Eigen::Matrix3d xtx_inv = (X.transpose() * X).inverse();
  Eigen::VectorXd adjust(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const Eigen::RowVector3d xi = X.row(i);
    const double h = std::min(0.9999, static_cast<double>(xi * xtx_inv * xi.transpose()));
    adjust(i) = 1.0 / std::sqrt(1.0 - h);
  }

  double tiny_s = 1e-6 * sample_std(y);
  if (tiny_s == 0.0) tiny_s = 1.0;
  const double step_tol = std::sqrt(std::numeric_limits<double>::epsilon());

  HvFit fit;
  for (int it = 1; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd resid = (y - X * b).cwiseProduct(adjust);
    const double s = std::max(mad_sigma(resid, 3), tiny_s);
    Eigen::VectorXd sw(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double u = resid(i) / (s * options.bisquare_tuning);
      sw(i) = std::abs(u) < 1.0 ? (1.0 - u * u) : 0.0;  // sqrt of the bisquare weight
    }
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> wqr(Xw);
    wqr.setThreshold(1e-10);
    if (wqr.rank() < 3) throw SingularFit("weighted regression became rank deficient");
    const Eigen::Vector3d next = wqr.solve(yw);
    const bool done = ((next - b).cwiseAbs().array() <=
                       step_tol * next.cwiseAbs().cwiseMax(b.cwiseAbs()).array())
                          .all();
    b = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }

  const Eigen::VectorXd resid = y - X * b;
  fit.params = base;
  fit.params.h0 = b(0);
  fit.params.h1 = b(1);
  fit.params.h2 = b(2);
  fit.residual_std = sample_std(resid);
  fit.params.sigma_u = fit.residual_std;
  fit.rows = rows;
  for (int j = 0; j < 3; ++j) fit.std_errors[j] = fit.residual_std * std::sqrt(xtx_inv(j, j));
  return fit;
}

double sample_next_accel(double a_lead, double v_lead, double shift, const HvModelParams& params,
                         Rng& rng) {
  return params.next_accel_mean(a_lead, v_lead) + shift + params.sigma_u * rng.normal();
}

double gaussian_log_density(double x, double mean, double sigma) {
  static const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double z = (x - mean) / sigma;
  return -kLogSqrt2Pi - std::log(sigma) - 0.5 * z * z;
}

double step_log_density(double u, double shift, const HvModelParams& params, double v0) {
  return gaussian_log_density(u, params.input_mean(v0) + shift, params.sigma_u);
}

}  // namespace acceval
