#include <doctest.h>

#include <cmath>
#include <vector>

#include "acceval/error.hpp"
#include "acceval/estimator.hpp"
#include "acceval/sim_engine.hpp"
#include "support.hpp"

using namespace acceval;
using namespace acceval::testing;

namespace {

ClosedLoopModel default_model(double event_range = 0.0) {
  return assemble_state_space(PlantParams{}, ControllerGains{}, HvModelParams{}, ScenarioParams{},
                              event_range);
}

const ClosedLoopModel& crash_model() {
  static const ClosedLoopModel m = default_model();
  return m;
}

const ShiftTable& crash_table() {
  static const ShiftTable t = compute_shift_table(crash_model());
  return t;
}

}  // namespace

TEST_CASE("online event detection") {
  const ClosedLoopModel& m = crash_model();
  StateVector x = StateVector::Zero();
  CHECK(!detect_event_online(x, EventSpec::crash(), m).triggered);
  CHECK(!detect_event_online(x, EventSpec::conflict(), m).triggered);

  x[kRangeDev] = -40.0;
  x[kLeadSpeedDev] = -5.0;
  const EventCheck c = detect_event_online(x, EventSpec::crash(), m);
  CHECK(c.triggered);
  REQUIRE(c.delta_v);
  CHECK(*c.delta_v == 5.0);
  CHECK(!c.clamped);

  x[kLeadSpeedDev] = 1.0;
  const EventCheck back = detect_event_online(x, EventSpec::crash(), m);
  CHECK(back.triggered);
  CHECK(*back.delta_v == 0.0);
  CHECK(back.clamped);

  x = StateVector::Zero();
  x[kRangeDev] = -30.856;
  CHECK(detect_event_online(x, EventSpec::conflict(), m).triggered);
  CHECK(!detect_event_online(x, EventSpec::conflict(), m).delta_v);
  x[kRangeDev] = -30.85;
  CHECK(!detect_event_online(x, EventSpec::conflict(), m).triggered);
}

TEST_CASE("naturalistic runs") {
  const ClosedLoopModel& m = crash_model();
  const RunRecord a = run_naturalistic(m, EventSpec::crash(), 123);
  const RunRecord b = run_naturalistic(m, EventSpec::crash(), 123);
  CHECK(a == b);
  CHECK(a.log_likelihood_ratio == 0.0);
  CHECK(!a.event_occurred);
  CHECK(a.termination_step == 119);
  CHECK(!a.sampled_k_star);

  std::vector<double> u;
  run_naturalistic(m, EventSpec::crash(), 123, &u);
  CHECK(u.size() == 118);
  std::vector<double> v;
  run_naturalistic(m, EventSpec::crash(), 124, &v);
  CHECK(u != v);
}

TEST_CASE("single-step log ratio") {
  const GaussianInput g{0.3, 0.7};
  for (double u : {-1.0, 0.0, 0.25, 2.0}) {
    for (double s : {-0.5, 0.1, 1.3}) {
      CHECK(g.log_ratio(u, s) ==
            doctest::Approx(g.log_density(u, 0.0) - g.log_density(u, s)).epsilon(1e-12));
    }
  }
  CHECK(g.log_ratio(1.0, 0.0) == 0.0);
}

TEST_CASE("vanishing noise follows the planned sequence") {
  ClosedLoopModel m = crash_model();
  m.hv.sigma_u = 1e-12;
  const ShiftTable& t = crash_table();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<double> u;
    const RunRecord r = run_accelerated_with(m, t, EventSpec::crash(), GaussianInput::of(m), seed, &u);
    const int k_star = *r.sampled_k_star;
    StateVector x = m.x_init;
    for (int k = 1; k < k_star && k <= static_cast<int>(u.size()); ++k) {
      CHECK(std::abs(u[k - 1] - (m.mu_u + t.at(k_star)[k - 1])) < 1e-9);
      x = step(x, u[k - 1], m);
    }
    if (u.size() + 1 >= static_cast<std::size_t>(k_star)) {
      CHECK(m.range_dev(x) <= m.event_threshold_dev + 1e-6);
    }
    CHECK(r.event_occurred);
  }
}

TEST_CASE("zero shifts give unit weights") {
  const ClosedLoopModel& m = crash_model();
  ShiftTable t = crash_table();
  for (auto& s : t.shifts) std::fill(s.begin(), s.end(), 0.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CHECK(run_accelerated(m, t, EventSpec::crash(), seed).log_likelihood_ratio == 0.0);
    CHECK(run_accelerated(m, t, EventSpec::crash(), seed, nullptr, Weighting::mixture)
              .log_likelihood_ratio == 0.0);
  }
}

TEST_CASE("online likelihood equals the offline recomputation") {
  const ClosedLoopModel m = default_model(9.144);
  const ShiftTable t = compute_shift_table(m);
  const EventSpec e = EventSpec::conflict();
  const double sigma = m.hv.sigma_u;
  int events = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::vector<double> u;
    const RunRecord r = run_accelerated(m, t, e, seed, &u);
    const int k_star = *r.sampled_k_star;
    CHECK(u.size() == static_cast<std::size_t>(r.termination_step - 1));
    double offline = 0.0;
    for (std::size_t k = 1; k <= u.size(); ++k) {
      const double shift = static_cast<int>(k) < k_star ? t.at(k_star)[k - 1] : 0.0;
      offline += gaussian_log_density(u[k - 1], m.mu_u, sigma) -
                 gaussian_log_density(u[k - 1], m.mu_u + shift, sigma);
    }
    CHECK(std::exp(r.log_likelihood_ratio) ==
          doctest::Approx(std::exp(offline)).epsilon(1e-10));

    // mixture: same draws, ratio against the average of every component
    std::vector<double> w;
    const RunRecord mix = run_accelerated(m, t, e, seed, &w, Weighting::mixture);
    CHECK(w == u);
    double q = 0.0;
    for (int j = t.k_min; j <= t.horizon; ++j) {
      double log_q = 0.0;
      for (std::size_t k = 1; k <= w.size(); ++k) {
        const double shift = static_cast<int>(k) < j ? t.at(j)[k - 1] : 0.0;
        log_q += gaussian_log_density(w[k - 1], m.mu_u + shift, sigma) -
                 gaussian_log_density(w[k - 1], m.mu_u, sigma);
      }
      q += std::exp(log_q);
    }
    q /= t.table_size();
    CHECK(std::exp(mix.log_likelihood_ratio) == doctest::Approx(1.0 / q).epsilon(1e-10));
    events += r.event_occurred;
  }
  CHECK(events > 50);
}

TEST_CASE("uniform baseline likelihood") {
  const ClosedLoopModel& m = crash_model();
  const double width = 6.0 * m.hv.sigma_u;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<double> u;
    const RunRecord r = run_uniform_baseline(m, EventSpec::crash(), width, seed, &u);
    double offline = 0.0;
    for (double x : u) {
      CHECK(std::abs(x - m.mu_u) <= 0.5 * width);
      offline += gaussian_log_density(x, m.mu_u, m.hv.sigma_u) + std::log(width);
    }
    CHECK(r.log_likelihood_ratio == doctest::Approx(offline).epsilon(1e-12));
  }
  CHECK_THROWS(run_uniform_baseline(m, EventSpec::crash(), 0.0, 1));
}

TEST_CASE("bound excursions are flagged, not clamped") {
  ClosedLoopModel m = crash_model();
  m.x_max[kLeadSpeedDev] = 0.05;
  m.x_min[kLeadSpeedDev] = -0.05;
  int flagged = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<double> u;
    const RunRecord r = run_naturalistic(m, EventSpec::crash(), seed, &u);
    flagged += r.bounds_violated;
    // replay without any clamping reproduces the run
    StateVector x = m.x_init;
    bool outside = false;
    for (double v : u) {
      x = step(x, v, m);
      outside |= ((x - m.x_max).array() > 0).any() || ((m.x_min - x).array() > 0).any();
    }
    CHECK(outside == r.bounds_violated);
  }
  CHECK(flagged > 0);
}

TEST_CASE("batches are independent of the thread count") {
  const ClosedLoopModel& m = crash_model();
  CampaignConfig cfg;
  cfg.base_seed = 77;
  for (Weighting w : {Weighting::component, Weighting::mixture}) {
    cfg.weighting = w;
    const auto one = run_batch(m, &crash_table(), cfg, 1000, 500, 1);
    const auto three = run_batch(m, &crash_table(), cfg, 1000, 500, 3);
    const auto eight = run_batch(m, &crash_table(), cfg, 1000, 500, 8);
    CHECK(one == three);
    CHECK(one == eight);
    CHECK(one.front().run_index == 1000);
    CHECK(one.back().run_index == 1499);
    CHECK(one[5].seed == derive_seed(77, 1005));
  }

  // a run does not depend on the batch it was computed in
  const auto whole = run_batch(m, &crash_table(), cfg, 0, 200, 2);
  const auto tail = run_batch(m, &crash_table(), cfg, 150, 50, 1);
  for (int i = 0; i < 50; ++i) CHECK(whole[150 + i] == tail[i]);
}

TEST_CASE("accelerated runs need a matching table") {
  const ClosedLoopModel& m = crash_model();
  CampaignConfig cfg;
  CHECK_THROWS(run_batch(m, nullptr, cfg, 0, 10));
  const ClosedLoopModel other = default_model(9.144);
  CHECK_THROWS_AS(run_batch(other, &crash_table(), cfg, 0, 10), FingerprintMismatch);
  CHECK_THROWS_AS(run_accelerated(other, crash_table(), EventSpec::conflict(), 1), FingerprintMismatch);
}

TEST_CASE("campaign configuration checks") {
  CampaignConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.max_runs = 10;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.uniform_width = -1.0;
  CHECK_THROWS(cfg.validate());
  CHECK(CampaignConfig{}.width_for(crash_model()) == doctest::Approx(6.0 * 0.3949));
  CHECK(parse_regime("uniform_baseline") == Regime::uniform_baseline);
  CHECK(parse_weighting("component") == Weighting::component);
  CHECK_THROWS(parse_event_kind("collision"));
}

TEST_CASE("toy estimates agree with enumeration") {
  const ClosedLoopModel m = toy_model();
  const double exact = toy_exact_probability(m.event_threshold_dev);
  const ShiftTable t = compute_shift_table(m);
  const DiscreteGaussianInput law(toy_grid(), 0.0, 1.0);
  const DiscreteUniformInput uniform(toy_grid(), 0.0, 10.5);
  REQUIRE(uniform.support().size() == 21);
  const EventSpec e{EventKind::custom, m.event_range};

  EstimateOptions o;
  o.metric = Metric::conflict;
  auto check_regime = [&](auto&& draw) {
    std::vector<RunRecord> recs;
    for (std::uint64_t i = 0; i < 20000; ++i) {
      RunRecord r = draw(derive_seed(5, i));
      r.run_index = i;
      recs.push_back(r);
    }
    const EstimateReport rep = is_estimate(recs, o);
    CHECK(std::abs(rep.estimate - exact) < 3.0 * rep.std_error);
    CHECK(rep.std_error < 0.1 * exact);
  };
  check_regime([&](std::uint64_t s) { return run_accelerated_with(m, t, e, law, s); });
  check_regime([&](std::uint64_t s) {
    return run_accelerated_with(m, t, e, law, s, nullptr, Weighting::mixture);
  });
  check_regime([&](std::uint64_t s) { return run_proposal_with(m, e, law, uniform, s); });
}

TEST_CASE("grid laws") {
  const DiscreteGaussianInput law(toy_grid(), 0.0, 1.0);
  const auto p = law.probabilities(0.0);
  double total = 0.0;
  for (double v : p) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p[10] > p[11]);
  CHECK(p[9] == doctest::Approx(p[11]).epsilon(1e-14));
  CHECK(std::exp(law.log_density(0.5, 0.0)) == doctest::Approx(p[11]).epsilon(1e-14));
  CHECK_THROWS(law.log_density(0.3, 0.0));

  Rng rng(3);
  std::vector<int> counts(21, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = law.draw(-1.0, rng);
    ++counts[static_cast<std::size_t>(std::lround(2.0 * u)) + 10];
  }
  const auto q = law.probabilities(-1.0);
  for (int i = 0; i < 21; ++i) {
    CHECK(std::abs(counts[i] / 1e5 - q[i]) < 5.0 * std::sqrt(q[i] * (1 - q[i]) / 1e5) + 1e-12);
  }

  const DiscreteUniformInput narrow(toy_grid(), 0.0, 2.0);
  CHECK(narrow.support().size() == 5);
  CHECK(narrow.log_density(1.0) == doctest::Approx(-std::log(5.0)));
  CHECK(std::isinf(narrow.log_density(1.5)));
}
