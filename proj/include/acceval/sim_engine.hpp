#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acceval/hv_model.hpp"
#include "acceval/plant_controller.hpp"
#include "acceval/rng.hpp"
#include "acceval/shift_planner.hpp"

namespace acceval {

inline constexpr double kConflictRange = 9.144;  // 30 ft

enum class EventKind { crash, conflict, custom };

struct EventSpec {
  EventKind kind = EventKind::crash;
  double event_range = 0.0;  // R_E, m

  static EventSpec crash() { return {EventKind::crash, 0.0}; }
  static EventSpec conflict() { return {EventKind::conflict, kConflictRange}; }

  void validate(double r_desire) const;
};

enum class Regime { naturalistic, accelerated, uniform_baseline };

// Likelihood ratio of an accelerated run: against the sampled k* component
// alone, or against the equal-weight mixture of all table components.
enum class Weighting { component, mixture };

const char* to_string(EventKind k);
const char* to_string(Regime r);
const char* to_string(Weighting w);
EventKind parse_event_kind(const std::string& s);
Regime parse_regime(const std::string& s);
Weighting parse_weighting(const std::string& s);

struct RunRecord {
  std::uint64_t run_index = 0;
  std::uint64_t seed = 0;
  bool event_occurred = false;
  int termination_step = 0;           // k_T in [1, K]
  double log_likelihood_ratio = 0.0;  // log f/f~ over executed steps
  std::optional<double> delta_v;      // impact speed, crash events only
  bool impact_clamped = false;        // closing speed was <= 0 at trigger
  std::optional<int> sampled_k_star;
  bool bounds_violated = false;

  bool operator==(const RunRecord&) const = default;
};

struct EventCheck {
  bool triggered = false;
  std::optional<double> delta_v;
  bool clamped = false;
};

EventCheck detect_event_online(const StateVector& x, const EventSpec& e, const ClosedLoopModel& m);

/// Naturalistic N(mean, sigma^2) input, optionally mean-shifted.
struct GaussianInput {
  double mean = 0.0;
  double sigma = 1.0;

  static GaussianInput of(const ClosedLoopModel& m) { return {m.mu_u, m.hv.sigma_u}; }

  double draw(double shift, Rng& rng) const { return mean + shift + sigma * rng.normal(); }
  double log_density(double u, double shift) const {
    return gaussian_log_density(u, mean + shift, sigma);
  }
  /// log f(u) - log f_shift(u), in closed form.
  double log_ratio(double u, double shift) const {
    return shift / (sigma * sigma) * (mean + 0.5 * shift - u);
  }
};

/// Uniform proposal on [mean - width/2, mean + width/2].
struct UniformInput {
  double mean = 0.0;
  double width = 1.0;

  double draw(Rng& rng) const { return mean - 0.5 * width + width * rng.uniform(); }
  double log_density(double u) const {
    return std::abs(u - mean) <= 0.5 * width ? -std::log(width)
                                             : -std::numeric_limits<double>::infinity();
  }
};

/// Gaussian input restricted to a finite grid, probabilities renormalized.
/// Used to build reduced models whose event probability can be enumerated.
class DiscreteGaussianInput {
 public:
  DiscreteGaussianInput(std::vector<double> points, double mean, double sigma);

  const std::vector<double>& points() const { return points_; }
  std::vector<double> probabilities(double shift) const;

  double draw(double shift, Rng& rng) const;
  double log_density(double u, double shift) const;
  double log_ratio(double u, double shift) const {
    return log_density(u, 0.0) - log_density(u, shift);
  }

 private:
  std::size_t index_of(double u) const;

  std::vector<double> points_;
  double mean_;
  double sigma_;
};

/// Uniform over the grid points inside [mean - width/2, mean + width/2].
class DiscreteUniformInput {
 public:
  DiscreteUniformInput(std::vector<double> points, double mean, double width);

  const std::vector<double>& support() const { return support_; }
  double draw(Rng& rng) const { return support_[rng.below(support_.size())]; }
  double log_density(double u) const;

 private:
  std::vector<double> support_;
};

namespace detail {

inline bool outside_bounds(const StateVector& x, const ClosedLoopModel& m) {
  return ((x - m.x_max).array() > 0.0).any() || ((m.x_min - x).array() > 0.0).any();
}

// One episode: u(k) = draw(k), X(k+1) = A X(k) + B u(k), event tested on the
// advanced state. log_ratio(k, u) is accumulated over executed steps only.
template <typename Draw, typename LogRatio>
RunRecord episode(const ClosedLoopModel& m, const EventSpec& e, std::uint64_t seed, Draw&& draw,
                  LogRatio&& log_ratio, std::vector<double>* inputs) {
  RunRecord rec;
  rec.seed = seed;
  rec.termination_step = m.horizon;
  if (inputs) inputs->clear();
  StateVector x = m.x_init;
  double log_l = 0.0;
  for (int k = 1; k < m.horizon; ++k) {
    const double u = draw(k);
    if (inputs) inputs->push_back(u);
    log_l += log_ratio(k, u);
    x = step(x, u, m);
    const EventCheck ev = detect_event_online(x, e, m);
    if (ev.triggered) {
      rec.event_occurred = true;
      rec.termination_step = k + 1;
      rec.delta_v = ev.delta_v;
      rec.impact_clamped = ev.clamped;
      break;
    }
    if (!rec.bounds_violated && outside_bounds(x, m)) rec.bounds_violated = true;
  }
  rec.log_likelihood_ratio = log_l;
  return rec;
}

}  // namespace detail

/// log f(u) - log mean_j f_j(u) over the given executed inputs, j running
/// over every table entry.
template <typename Law>
double mixture_log_ratio(const ShiftTable& t, const Law& law, const std::vector<double>& u) {
  const int steps = static_cast<int>(u.size());
  std::vector<double> log_q;  // log f_j - log f
  log_q.reserve(static_cast<std::size_t>(t.table_size()));
  for (int j = t.k_min; j <= t.horizon; ++j) {
    const std::vector<double>& s = t.at(j);
    const int n = std::min(steps, j - 1);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      if (s[k] != 0.0) acc -= law.log_ratio(u[k], s[k]);
    }
    log_q.push_back(acc);
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_q) top = std::max(top, v);
  double sum = 0.0;
  for (double v : log_q) sum += std::exp(v - top);
  return -(top + std::log(sum / static_cast<double>(log_q.size())));
}

template <typename Law>
RunRecord run_naturalistic_with(const ClosedLoopModel& m, const EventSpec& e, const Law& law,
                                std::uint64_t seed, std::vector<double>* inputs = nullptr) {
  Rng rng(seed);
  return detail::episode(
      m, e, seed, [&](int) { return law.draw(0.0, rng); }, [](int, double) { return 0.0; },
      inputs);
}

/// Samples k* uniformly from [k_min, K], then shifts the input mean by the
/// table entry for k < k* and reverts to the naturalistic law afterwards.
/// With component weighting unshifted steps contribute exactly zero to the
/// log-likelihood ratio; with mixture weighting the ratio is taken against
/// the average of all table components over the executed steps.
template <typename Law>
RunRecord run_accelerated_with(const ClosedLoopModel& m, const ShiftTable& t, const EventSpec& e,
                               const Law& law, std::uint64_t seed,
                               std::vector<double>* inputs = nullptr,
                               Weighting weighting = Weighting::component) {
  Rng rng(seed);
  const int k_star =
      t.k_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(t.horizon - t.k_min + 1)));
  const std::vector<double>& shift = t.at(k_star);
  auto shift_at = [&](int k) { return k < k_star ? shift[k - 1] : 0.0; };
  std::vector<double> local;
  std::vector<double>* record = inputs;
  if (weighting == Weighting::mixture && !record) record = &local;
  RunRecord rec = detail::episode(
      m, e, seed, [&](int k) { return law.draw(shift_at(k), rng); },
      [&](int k, double u) {
        const double s = shift_at(k);
        return s == 0.0 ? 0.0 : law.log_ratio(u, s);
      },
      record);
  if (weighting == Weighting::mixture) {
    rec.log_likelihood_ratio = mixture_log_ratio(t, law, *record);
  }
  rec.sampled_k_star = k_star;
  return rec;
}

/// Inputs drawn from `proposal`; the ratio is taken against `target` at zero shift.
template <typename Target, typename Proposal>
RunRecord run_proposal_with(const ClosedLoopModel& m, const EventSpec& e, const Target& target,
                            const Proposal& proposal, std::uint64_t seed,
                            std::vector<double>* inputs = nullptr) {
  Rng rng(seed);
  return detail::episode(
      m, e, seed, [&](int) { return proposal.draw(rng); },
      [&](int, double u) { return target.log_density(u, 0.0) - proposal.log_density(u); },
      inputs);
}

RunRecord run_naturalistic(const ClosedLoopModel& m, const EventSpec& e, std::uint64_t seed,
                           std::vector<double>* inputs = nullptr);

/// Throws FingerprintMismatch unless `t` was planned for `m` and `e`.
RunRecord run_accelerated(const ClosedLoopModel& m, const ShiftTable& t, const EventSpec& e,
                          std::uint64_t seed, std::vector<double>* inputs = nullptr,
                          Weighting weighting = Weighting::component);

RunRecord run_uniform_baseline(const ClosedLoopModel& m, const EventSpec& e, double width,
                               std::uint64_t seed, std::vector<double>* inputs = nullptr);

void check_table_matches(const ShiftTable& t, const ClosedLoopModel& m, const EventSpec& e);

struct CampaignConfig {
  Regime regime = Regime::accelerated;
  EventSpec event = EventSpec::crash();
  std::size_t batch_size = 100;
  std::size_t max_runs = 100000;
  std::uint64_t base_seed = 1;
  std::optional<double> uniform_width;  // defaults to 6 sigma_u
  Weighting weighting = Weighting::mixture;

  double width_for(const ClosedLoopModel& m) const {
    return uniform_width ? *uniform_width : 6.0 * m.hv.sigma_u;
  }
  void validate() const;
};

/// Runs [first, first + count) of a campaign on up to `threads` workers.
/// Run n uses seed derive_seed(base_seed, n); the result is in index order
/// and independent of the thread count.
std::vector<RunRecord> run_batch(const ClosedLoopModel& m, const ShiftTable* table,
                                 const CampaignConfig& config, std::uint64_t first,
                                 std::size_t count, std::size_t threads = 1);

}  // namespace acceval
