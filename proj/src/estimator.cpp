#include "acceval/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace acceval {

const char* to_string(Metric m) {
  switch (m) {
    case Metric::crash: return "crash";
    case Metric::injury: return "injury";
    case Metric::conflict: return "conflict";
  }
  return "?";
}

Metric parse_metric(const std::string& s) {
  if (s == "crash") return Metric::crash;
  if (s == "injury") return Metric::injury;
  if (s == "conflict") return Metric::conflict;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

double injury_probability(double delta_v, const InjuryModelParams& p) {
  if (!(delta_v >= 0.0)) throw std::invalid_argument("impact speed must be >= 0");
  return 1.0 / (1.0 + std::exp(-(p.beta0 + p.beta1 * delta_v + p.beta2)));
}

void StoppingRule::validate() const {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must be in (0,1)");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must be in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + confidence));
}

void RunningMoments::add(double w) {
  ++n_;
  if (w != 0.0) ++nonzero_;
  const double delta = w - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (w - mean_);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double total = na + nb;
  mean_ += delta * nb / total;
  m2_ += other.m2_ + delta * delta * na * nb / total;
  n_ += other.n_;
  nonzero_ += other.nonzero_;
}

double RunningMoments::std_error() const {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

bool stopping_check(const TracePoint& p, const StoppingRule& rule) {
  if (!(p.estimate > 0.0)) return false;
  if (p.n_events < rule.event_floor) return false;
  const double z = normal_quantile_two_sided(rule.confidence);
  return z * p.std_error <= rule.beta * p.estimate;
}

bool stopping_check(const ConvergenceTrace& trace, const StoppingRule& rule) {
  return !trace.points.empty() && stopping_check(trace.points.back(), rule);
}

double contribution(const RunRecord& r, Metric metric, const InjuryModelParams& injury) {
  if (!r.event_occurred) return 0.0;
  const double weight = std::exp(r.log_likelihood_ratio);
  if (metric == Metric::injury) {
    return r.delta_v ? injury_probability(*r.delta_v, injury) * weight : 0.0;
  }
  return weight;
}

SequentialEstimator::SequentialEstimator(EstimateOptions options)
    : options_(options), z_(normal_quantile_two_sided(options.stopping.confidence)) {
  options_.stopping.validate();
  if (options_.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

void SequentialEstimator::add(const RunRecord& r) {
  moments_.add(contribution(r, options_.metric, options_.injury));
}

TracePoint SequentialEstimator::snapshot() const {
  TracePoint p;
  p.n = moments_.count();
  p.estimate = moments_.mean();
  p.std_error = moments_.std_error();
  p.n_events = moments_.nonzero();
  p.relative_half_width = p.estimate > 0.0 ? z_ * p.std_error / p.estimate
                                           : std::numeric_limits<double>::infinity();
  return p;
}

const TracePoint& SequentialEstimator::checkpoint() {
  TracePoint p = snapshot();
  if (trace_.points.empty() || trace_.points.back().n != p.n) trace_.points.push_back(p);
  if (!converged_at_ && stopping_check(trace_.points.back(), options_.stopping)) {
    converged_at_ = p.n;
  }
  return trace_.points.back();
}

EstimateReport SequentialEstimator::report(Regime regime, const std::string& fingerprint) const {
  const TracePoint p = snapshot();
  EstimateReport r;
  r.metric = options_.metric;
  r.regime = regime;
  r.fingerprint = fingerprint;
  r.estimate = p.estimate;
  r.std_error = p.std_error;
  r.confidence = options_.stopping.confidence;
  r.ci_low = p.estimate - z_ * p.std_error;
  r.ci_high = p.estimate + z_ * p.std_error;
  r.n_runs = p.n;
  r.n_events = p.n_events;
  r.converged_at = converged_at_;
  r.trace = trace_;
  return r;
}

EstimateReport is_estimate(std::span<const RunRecord> records, const EstimateOptions& options,
                           Regime regime, const std::string& fingerprint) {
  std::vector<const RunRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->run_index < b->run_index; });

  SequentialEstimator est(options);
  std::size_t n = 0;
  for (const RunRecord* r : ordered) {
    est.add(*r);
    if (++n % options.batch_size == 0) est.checkpoint();
  }
  if (n % options.batch_size != 0) est.checkpoint();
  return est.report(regime, fingerprint);
}

EstimateReport injury_rate_estimate(std::span<const RunRecord> records, EstimateOptions options,
                                    Regime regime, const std::string& fingerprint) {
  options.metric = Metric::injury;
  return is_estimate(records, options, regime, fingerprint);
}

double acceleration_rate(double n_naturalistic, double n_accelerated) {
  if (!(n_naturalistic >= 1.0) || !(n_accelerated >= 1.0)) {
    throw std::invalid_argument("run counts must be >= 1");
  }
  return n_naturalistic / n_accelerated;
}

double per_mile_rate(double per_episode, double v0, int horizon, double ts) {
  constexpr double kMetersPerMile = 1609.344;
  return per_episode / (v0 * horizon * ts / kMetersPerMile);
}

}  // namespace acceval
