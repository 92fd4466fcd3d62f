#include "acceval/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "acceval/error.hpp"

namespace acceval {

void EventSpec::validate(double r_desire) const {
  if (!(event_range >= 0.0) || !(event_range < r_desire)) {
    throw std::invalid_argument("event range must lie in [0, desired range)");
  }
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::crash: return "crash";
    case EventKind::conflict: return "conflict";
    case EventKind::custom: return "custom";
  }
  return "?";
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::naturalistic: return "naturalistic";
    case Regime::accelerated: return "accelerated";
    case Regime::uniform_baseline: return "uniform_baseline";
  }
  return "?";
}

const char* to_string(Weighting w) {
  return w == Weighting::mixture ? "mixture" : "component";
}

Weighting parse_weighting(const std::string& s) {
  if (s == "component") return Weighting::component;
  if (s == "mixture") return Weighting::mixture;
  throw std::invalid_argument("unknown weighting '" + s + "'");
}

EventKind parse_event_kind(const std::string& s) {
  if (s == "crash") return EventKind::crash;
  if (s == "conflict") return EventKind::conflict;
  if (s == "custom") return EventKind::custom;
  throw std::invalid_argument("unknown event kind '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "naturalistic") return Regime::naturalistic;
  if (s == "accelerated") return Regime::accelerated;
  if (s == "uniform_baseline") return Regime::uniform_baseline;
  throw std::invalid_argument("unknown regime '" + s + "'");
}

EventCheck detect_event_online(const StateVector& x, const EventSpec& e, const ClosedLoopModel& m) {
  EventCheck out;
  if (m.range_dev(x) > e.event_range - m.r_desire) return out;
  out.triggered = true;
  if (e.kind == EventKind::crash) {
    const double closing = x[kAvSpeedDev] - x[kLeadSpeedDev];
    if (closing > 0.0) {
      out.delta_v = closing;
    } else {
      out.delta_v = 0.0;
      out.clamped = true;
    }
  }
  return out;
}

DiscreteGaussianInput::DiscreteGaussianInput(std::vector<double> points, double mean, double sigma)
    : points_(std::move(points)), mean_(mean), sigma_(sigma) {
  if (points_.empty()) throw std::invalid_argument("grid needs at least one point");
  if (!std::is_sorted(points_.begin(), points_.end())) {
    throw std::invalid_argument("grid points must be sorted");
  }
  if (!(sigma_ > 0.0)) throw std::invalid_argument("grid sigma must be positive");
}

std::vector<double> DiscreteGaussianInput::probabilities(double shift) const {
  std::vector<double> logw(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double z = (points_[i] - mean_ - shift) / sigma_;
    logw[i] = -0.5 * z * z;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double& w : logw) total += (w = std::exp(w - top));
  for (double& w : logw) w /= total;
  return logw;
}

std::size_t DiscreteGaussianInput::index_of(double u) const {
  const auto it = std::lower_bound(points_.begin(), points_.end(), u);
  if (it == points_.end() || *it != u) throw std::invalid_argument("value is not a grid point");
  return static_cast<std::size_t>(it - points_.begin());
}

double DiscreteGaussianInput::draw(double shift, Rng& rng) const {
  const std::vector<double> p = probabilities(shift);
  const double r = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (r < acc) return points_[i];
  }
  return points_.back();
}

double DiscreteGaussianInput::log_density(double u, double shift) const {
  return std::log(probabilities(shift)[index_of(u)]);
}

DiscreteUniformInput::DiscreteUniformInput(std::vector<double> points, double mean, double width) {
  for (double p : points) {
    if (std::abs(p - mean) <= 0.5 * width) support_.push_back(p);
  }
  if (support_.empty()) throw std::invalid_argument("uniform grid support is empty");
}

double DiscreteUniformInput::log_density(double u) const {
  return std::find(support_.begin(), support_.end(), u) != support_.end()
             ? -std::log(static_cast<double>(support_.size()))
             : -std::numeric_limits<double>::infinity();
}

RunRecord run_naturalistic(const ClosedLoopModel& m, const EventSpec& e, std::uint64_t seed,
                           std::vector<double>* inputs) {
  return run_naturalistic_with(m, e, GaussianInput::of(m), seed, inputs);
}

void check_table_matches(const ShiftTable& t, const ClosedLoopModel& m, const EventSpec& e) {
  const std::string fp = model_fingerprint(m);
  if (t.fingerprint != fp) {
    throw FingerprintMismatch("shift table fingerprint " + t.fingerprint +
                              " does not match model " + fp);
  }
  if (t.event_range != e.event_range || t.horizon != m.horizon) {
    throw FingerprintMismatch("shift table was planned for a different event or horizon");
  }
}

RunRecord run_accelerated(const ClosedLoopModel& m, const ShiftTable& t, const EventSpec& e,
                          std::uint64_t seed, std::vector<double>* inputs, Weighting weighting) {
  check_table_matches(t, m, e);
  return run_accelerated_with(m, t, e, GaussianInput::of(m), seed, inputs, weighting);
}

RunRecord run_uniform_baseline(const ClosedLoopModel& m, const EventSpec& e, double width,
                               std::uint64_t seed, std::vector<double>* inputs) {
  if (!(width > 0.0)) throw std::invalid_argument("uniform width must be positive");
  return run_proposal_with(m, e, GaussianInput::of(m), UniformInput{m.mu_u, width}, seed, inputs);
}

void CampaignConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_runs < batch_size) throw std::invalid_argument("max_runs must be >= batch size");
  if (uniform_width && !(*uniform_width > 0.0)) {
    throw std::invalid_argument("uniform width must be positive");
  }
}

std::vector<RunRecord> run_batch(const ClosedLoopModel& m, const ShiftTable* table,
                                 const CampaignConfig& config, std::uint64_t first,
                                 std::size_t count, std::size_t threads) {
  if (config.regime == Regime::accelerated) {
    if (!table) throw std::invalid_argument("accelerated campaign needs a shift table");
    check_table_matches(*table, m, config.event);
  }
  const GaussianInput law = GaussianInput::of(m);
  const UniformInput uniform{m.mu_u, config.width_for(m)};

  std::vector<RunRecord> out(count);
  auto run_one = [&](std::size_t i) {
    const std::uint64_t index = first + i;
    const std::uint64_t seed = derive_seed(config.base_seed, index);
    RunRecord rec;
    switch (config.regime) {
      case Regime::naturalistic:
        rec = run_naturalistic_with(m, config.event, law, seed);
        break;
      case Regime::accelerated:
        rec = run_accelerated_with(m, *table, config.event, law, seed, nullptr, config.weighting);
        break;
      case Regime::uniform_baseline:
        rec = run_proposal_with(m, config.event, law, uniform, seed);
        break;
    }
    rec.run_index = index;
    out[i] = rec;
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 64;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t begin = next.fetch_add(kChunk);
        if (begin >= count) return;
        const std::size_t end = std::min(count, begin + kChunk);
        for (std::size_t i = begin; i < end; ++i) run_one(i);
      }
    });
  }
  pool.clear();
  return out;
}

}  // namespace acceval
