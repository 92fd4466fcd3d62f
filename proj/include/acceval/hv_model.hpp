#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acceval/rng.hpp"

namespace acceval {

/// One naturalistic driving log sampled at a fixed period. Optional series
/// are empty when the source did not provide them.
struct TrajectoryLog {
  double sample_period = 0.1;          // s
  std::vector<double> ego_speed;       // m/s
  std::vector<double> range;           // m
  std::vector<double> range_rate;      // m/s
  std::vector<double> latitude;        // deg
  std::vector<double> longitude;       // deg
  std::vector<std::uint8_t> cut_in;
  std::vector<std::uint8_t> lane_change;

  std::size_t size() const { return ego_speed.size(); }
  double duration() const {
    return size() < 2 ? 0.0 : static_cast<double>(size() - 1) * sample_period;
  }

  /// Throws DataError when the series lengths or values are inconsistent.
  void validate() const;

  /// Contiguous samples [first, first + count).
  TrajectoryLog slice(std::size_t first, std::size_t count) const;
};

struct Interval {
  double lo;
  double hi;
  bool contains_open(double x) const { return x > lo && x < hi; }
};

/// Car-following event extraction rules. A disengaged criterion is nullopt /
/// false; position and lane flags are only tested when the log carries them.
struct EventCriteria {
  std::optional<Interval> range{Interval{0.1, 90.0}};
  std::optional<Interval> longitude{Interval{-88.2, -82.0}};
  std::optional<Interval> latitude{Interval{41.0, 44.5}};
  std::optional<double> min_duration{50.0};
  bool require_no_cut_in = true;
  bool require_no_lane_change = true;

  /// Criteria that accept every sample of every log.
  static EventCriteria none();
  void validate() const;
};

/// Lead-vehicle AR model a_L(k+1) = h0 + h1 a_L(k) + h2 v_L(k) + N(0, sigma_u^2)
/// together with the physical bounds the shift planner respects.
struct HvModelParams {
  double h0 = 3.395e-2;
  double h1 = 0.8516;
  double h2 = -1.406e-3;
  double sigma_u = 0.3949;
  double u_min = -1.2;
  double u_max = 1.2;
  double a_min = -9.81;
  double a_max = 9.81;
  double v_min = 1.0;
  double v_max = 50.0;

  void validate() const;

  /// Naturalistic mean of the lumped input u = u_h + h0 + h2 v0.
  double input_mean(double v0) const { return h0 + h2 * v0; }
  double next_accel_mean(double a_lead, double v_lead) const {
    return h0 + h1 * a_lead + h2 * v_lead;
  }
};

struct IndexRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

/// Lead speed at every log sample and smoothed lead acceleration. Element i of
/// `lead_accel` belongs to sample `valid_window.first + i`.
struct LeadKinematics {
  std::vector<double> lead_speed;
  std::vector<double> lead_accel;
  IndexRange valid_window;
};

inline constexpr std::size_t kDefaultSmoothingWindow = 16;

LeadKinematics estimate_lead_kinematics(const TrajectoryLog& log,
                                        std::size_t smoothing_window = kDefaultSmoothingWindow);

std::vector<TrajectoryLog> filter_events(std::span<const TrajectoryLog> logs,
                                         const EventCriteria& criteria);

struct FitOptions {
  double bisquare_tuning = 4.685;
  int max_iterations = 50;
};

struct HvFit {
  HvModelParams params;
  std::size_t rows = 0;
  double residual_std = 0.0;
  std::array<double, 3> std_errors{};  // least-squares standard errors of h0, h1, h2
  int iterations = 0;
  bool converged = false;
};

/// Robust (bisquare IRLS) regression of a_L(k+1) on [1, a_L(k), v_L(k)]
/// stacked over all events. Bounds in the result are copied from `base`.
HvFit fit_hv_params(std::span<const LeadKinematics> events, const HvModelParams& base = {},
                    const FitOptions& options = {});

double sample_next_accel(double a_lead, double v_lead, double shift, const HvModelParams& params,
                         Rng& rng);

double gaussian_log_density(double x, double mean, double sigma);

/// log N(u; mu_u + shift, sigma_u^2) with mu_u = h0 + h2 v0.
double step_log_density(double u, double shift, const HvModelParams& params, double v0);

}  // namespace acceval
