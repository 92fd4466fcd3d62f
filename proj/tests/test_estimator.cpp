#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "acceval/estimator.hpp"
#include "acceval/rng.hpp"

using namespace acceval;

namespace {

RunRecord event_record(std::uint64_t i, double log_l, std::optional<double> dv = std::nullopt) {
  RunRecord r;
  r.run_index = i;
  r.event_occurred = true;
  r.log_likelihood_ratio = log_l;
  r.delta_v = dv;
  return r;
}

std::vector<RunRecord> bernoulli_records(double p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RunRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].run_index = i;
    out[i].event_occurred = rng.uniform() < p;
  }
  return out;
}

}  // namespace

TEST_CASE("injury probability at the default coefficients") {
  // oracle: the logistic written out from the coefficients
  auto oracle = [](double dv) { return 1.0 / (1.0 + std::exp(6.068 + 0.6234 - 0.1 * dv)); };
  CHECK(std::abs(injury_probability(0.0) - oracle(0.0)) <= 1e-12);
  CHECK(std::abs(injury_probability(20.0) - oracle(20.0)) <= 1e-12);
  // frozen from a 30-digit evaluation
  CHECK(std::abs(injury_probability(0.0) - 1.2400038763055050e-3) <= 1e-12);
  CHECK(std::abs(injury_probability(20.0) - 9.0904396122577639e-3) <= 1e-12);

  double prev = 0.0;
  for (double dv = 0.0; dv <= 80.0; dv += 0.5) {
    const double p = injury_probability(dv);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  CHECK_THROWS(injury_probability(-0.1));
}

TEST_CASE("stopping threshold") {
  const double z = normal_quantile_two_sided(0.8);
  CHECK(z == doctest::Approx(1.2815515655446004).epsilon(1e-12));
  CHECK(0.2 / z == doctest::Approx(0.15606).epsilon(1e-4));
  CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));

  StoppingRule rule;
  TracePoint p;
  p.estimate = 1.0;
  p.n_events = 30;
  p.std_error = 0.2 / z * 0.999;
  CHECK(stopping_check(p, rule));
  p.std_error = 0.2 / z * 1.001;
  CHECK(!stopping_check(p, rule));
  p.std_error = 0.0;
  p.n_events = 29;
  CHECK(!stopping_check(p, rule));
  p.n_events = 30;
  p.estimate = 0.0;
  CHECK(!stopping_check(p, rule));
  CHECK(!stopping_check(ConvergenceTrace{}, rule));
}

TEST_CASE("crude Monte Carlo stops near the expected sample size") {
  // SE/p <= beta/z needs n ~ (1-p)/p (z/beta)^2 = 99 * 41.06 ~ 4065 at p = 0.01,
  // with the events floor irrelevant there.
  const double z = normal_quantile_two_sided(0.8);
  const double expect = 0.99 / 0.01 * (z / 0.2) * (z / 0.2);
  EstimateOptions opt;
  opt.batch_size = 100;
  std::vector<double> stops;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto recs = bernoulli_records(0.01, 20000, seed);
    const EstimateReport r = is_estimate(recs, opt);
    REQUIRE(r.converged_at);
    stops.push_back(static_cast<double>(*r.converged_at));
  }
  std::sort(stops.begin(), stops.end());
  const double median = 0.5 * (stops[9] + stops[10]);
  CHECK(median == doctest::Approx(expect).epsilon(0.2));
}

TEST_CASE("tighter precision at the conflict-scale rate") {
  // beta = 0.05 at p = 0.01 needs 16 times the runs
  const double z = normal_quantile_two_sided(0.8);
  const double expect = 0.99 / 0.01 * (z / 0.05) * (z / 0.05);
  CHECK(expect == doctest::Approx(65040).epsilon(0.01));
  EstimateOptions opt;
  opt.stopping.beta = 0.05;
  opt.batch_size = 500;
  const auto recs = bernoulli_records(0.01, 120000, 77);
  const EstimateReport r = is_estimate(recs, opt);
  REQUIRE(r.converged_at);
  CHECK(static_cast<double>(*r.converged_at) == doctest::Approx(expect).epsilon(0.2));
}

TEST_CASE("acceleration rates") {
  CHECK(acceleration_rate(1.07e6, 3260) == doctest::Approx(328.2).epsilon(1e-3));
  CHECK(acceleration_rate(4.30e8, 3840) == doctest::Approx(1.12e5).epsilon(1e-3));
  CHECK(acceleration_rate(10, 10) == 1.0);
  CHECK_THROWS(acceleration_rate(0, 10));
  CHECK_THROWS(acceleration_rate(10, 0.5));
}

TEST_CASE("per-mile conversion") {
  // 20 m/s for 119 steps of 0.3 s is 714 m per episode
  CHECK(per_mile_rate(1.0, 20.0, 119, 0.3) == doctest::Approx(1609.344 / 714.0).epsilon(1e-14));
}

TEST_CASE("weighted contributions") {
  RunRecord miss;
  miss.log_likelihood_ratio = 3.0;
  CHECK(contribution(miss, Metric::crash) == 0.0);
  const RunRecord hit = event_record(0, std::log(0.25), 12.0);
  CHECK(contribution(hit, Metric::crash) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(contribution(hit, Metric::injury) == doctest::Approx(0.25 * injury_probability(12.0)).epsilon(1e-15));
  const RunRecord no_dv = event_record(0, 0.0);
  CHECK(contribution(no_dv, Metric::injury) == 0.0);
  const RunRecord impossible = event_record(0, -std::numeric_limits<double>::infinity());
  CHECK(contribution(impossible, Metric::crash) == 0.0);
}

TEST_CASE("injury never exceeds crash") {
  Rng rng(4);
  std::vector<RunRecord> recs;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    if (rng.uniform() < 0.1) {
      recs.push_back(event_record(i, -5.0 + rng.normal(), 30.0 * rng.uniform()));
    } else {
      RunRecord r;
      r.run_index = i;
      recs.push_back(r);
    }
  }
  EstimateOptions opt;
  const EstimateReport crash = is_estimate(recs, opt);
  const EstimateReport injury = injury_rate_estimate(recs, opt);
  CHECK(injury.metric == Metric::injury);
  CHECK(injury.estimate <= crash.estimate);
  CHECK(injury.estimate > 0.0);
}

TEST_CASE("estimate does not depend on record order") {
  Rng rng(8);
  std::vector<RunRecord> recs;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RunRecord r;
    r.run_index = i;
    r.event_occurred = rng.uniform() < 0.2;
    r.log_likelihood_ratio = rng.normal();
    recs.push_back(r);
  }
  EstimateOptions opt;
  opt.batch_size = 64;
  const EstimateReport a = is_estimate(recs, opt);
  std::vector<RunRecord> shuffled = recs;
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
  }
  const EstimateReport b = is_estimate(shuffled, opt);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  CHECK(a.converged_at == b.converged_at);
  REQUIRE(a.trace.points.size() == b.trace.points.size());
  CHECK(a.trace.points.size() == 16);  // 15 full batches and the remainder
  CHECK(a.trace.points.back().n == 1000);
}

TEST_CASE("report fields") {
  std::vector<RunRecord> recs = bernoulli_records(0.3, 500, 2);
  EstimateOptions opt;
  const EstimateReport r = is_estimate(recs, opt, Regime::accelerated, "abc");
  CHECK(r.regime == Regime::accelerated);
  CHECK(r.fingerprint == "abc");
  CHECK(r.n_runs == 500);
  std::size_t events = 0;
  for (const auto& x : recs) events += x.event_occurred;
  CHECK(r.n_events == events);
  CHECK(r.estimate == doctest::Approx(static_cast<double>(events) / 500.0).epsilon(1e-14));
  const double z = normal_quantile_two_sided(0.8);
  CHECK(r.ci_high - r.estimate == doctest::Approx(z * r.std_error));
  CHECK(r.estimate - r.ci_low == doctest::Approx(z * r.std_error));
}

TEST_CASE("welford merge equals a single pass") {
  Rng rng(12);
  std::vector<double> w(3001);
  for (double& v : w) v = rng.uniform() < 0.5 ? 0.0 : std::exp(3.0 * rng.normal());
  RunningMoments all;
  for (double v : w) all.add(v);
  RunningMoments a, b, c;
  for (std::size_t i = 0; i < 1000; ++i) a.add(w[i]);
  for (std::size_t i = 1000; i < 2500; ++i) b.add(w[i]);
  for (std::size_t i = 2500; i < w.size(); ++i) c.add(w[i]);
  a.merge(b);
  a.merge(c);
  a.merge(RunningMoments{});
  CHECK(a.count() == all.count());
  CHECK(a.nonzero() == all.nonzero());
  CHECK(a.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
  CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-10));

  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double ss = 0.0;
  for (double v : w) ss += (v - mean) * (v - mean);
  CHECK(all.variance() == doctest::Approx(ss / static_cast<double>(w.size() - 1)).epsilon(1e-10));
}

TEST_CASE("option validation") {
  EstimateOptions opt;
  opt.stopping.confidence = 1.0;
  CHECK_THROWS(SequentialEstimator{opt});
  opt = {};
  opt.stopping.beta = 0.0;
  CHECK_THROWS(SequentialEstimator{opt});
  opt = {};
  opt.batch_size = 0;
  CHECK_THROWS(SequentialEstimator{opt});
  CHECK_THROWS(parse_metric("bogus"));
  CHECK(parse_metric("conflict") == Metric::conflict);
}
