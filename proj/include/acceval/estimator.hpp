#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acceval/sim_engine.hpp"

namespace acceval {

enum class Metric { crash, injury, conflict };

const char* to_string(Metric m);
Metric parse_metric(const std::string& s);

/// MAIS2+ logistic injury risk in the impact speed.
struct InjuryModelParams {
  double beta0 = -6.068;
  double beta1 = 0.1;  // s/m
  double beta2 = -0.6234;
};

double injury_probability(double delta_v, const InjuryModelParams& p = {});

struct StoppingRule {
  double confidence = 0.8;
  double beta = 0.2;
  std::size_t event_floor = 30;

  void validate() const;
};

/// Two-sided standard normal quantile z_{(1 + confidence) / 2}.
double normal_quantile_two_sided(double confidence);

struct TracePoint {
  std::size_t n = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double relative_half_width = 0.0;  // z SE / estimate, +inf at estimate 0
  std::size_t n_events = 0;
};

struct ConvergenceTrace {
  std::vector<TracePoint> points;
};

/// Welford accumulator folded in run-index order.
class RunningMoments {
 public:
  void add(double w);
  void merge(const RunningMoments& other);

  std::size_t count() const { return n_; }
  std::size_t nonzero() const { return nonzero_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const;

 private:
  std::size_t n_ = 0;
  std::size_t nonzero_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Converged iff z SE <= beta * estimate and enough positive contributions.
bool stopping_check(const TracePoint& point, const StoppingRule& rule);
bool stopping_check(const ConvergenceTrace& trace, const StoppingRule& rule);

struct EstimateOptions {
  Metric metric = Metric::crash;
  StoppingRule stopping;
  std::size_t batch_size = 100;
  InjuryModelParams injury;
};

struct EstimateReport {
  Metric metric = Metric::crash;
  Regime regime = Regime::naturalistic;
  std::string fingerprint;
  double estimate = 0.0;
  double std_error = 0.0;
  double confidence = 0.8;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_runs = 0;
  std::size_t n_events = 0;
  std::optional<std::size_t> converged_at;
  ConvergenceTrace trace;
};

/// Contribution of one run: I_E exp(log L), or P_inj(dv) exp(log L) for injury.
double contribution(const RunRecord& r, Metric metric, const InjuryModelParams& injury = {});

/// Sequential fold that snapshots at batch boundaries.
class SequentialEstimator {
 public:
  explicit SequentialEstimator(EstimateOptions options);

  void add(const RunRecord& r);
  /// Snapshot and stopping test; called at batch boundaries.
  const TracePoint& checkpoint();
  bool converged() const { return converged_at_.has_value(); }
  std::optional<std::size_t> converged_at() const { return converged_at_; }

  EstimateReport report(Regime regime, const std::string& fingerprint) const;

 private:
  TracePoint snapshot() const;

  EstimateOptions options_;
  double z_;
  RunningMoments moments_;
  ConvergenceTrace trace_;
  std::optional<std::size_t> converged_at_;
};

/// Importance-sampling estimate over a record set. Records are folded in
/// run-index order so any arrival order gives the same report.
EstimateReport is_estimate(std::span<const RunRecord> records, const EstimateOptions& options,
                           Regime regime = Regime::naturalistic,
                           const std::string& fingerprint = {});

EstimateReport injury_rate_estimate(std::span<const RunRecord> records, EstimateOptions options,
                                    Regime regime = Regime::naturalistic,
                                    const std::string& fingerprint = {});

double acceleration_rate(double n_naturalistic, double n_accelerated);

/// Per-episode probability converted to a per-mile rate, assuming each
/// episode covers v0 * K * ts meters.
double per_mile_rate(double per_episode, double v0, int horizon, double ts);

}  // namespace acceval
