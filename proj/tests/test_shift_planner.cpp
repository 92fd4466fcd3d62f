#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "acceval/error.hpp"
#include "acceval/shift_planner.hpp"
#include "support.hpp"

using namespace acceval;
using acceval::testing::toy_model;

namespace {

ClosedLoopModel default_model(double event_range = 0.0) {
  return assemble_state_space(PlantParams{}, ControllerGains{}, HvModelParams{}, ScenarioParams{},
                              event_range);
}

StateMatrix power(const StateMatrix& A, int n) {
  StateMatrix P = StateMatrix::Identity();
  for (int i = 0; i < n; ++i) P = P * A;
  return P;
}

}  // namespace

TEST_CASE("qp layout") {
  const ClosedLoopModel m = default_model();

  SUBCASE("k* = 2 has the terminal row and one box pair") {
    const QpInstance q = build_qp(2, m);
    CHECK(q.dimension() == 1);
    CHECK(q.ineq_matrix.rows() == 3);
    CHECK(q.ineq_matrix(0, 0) == doctest::Approx(m.C.dot(m.B)));
    CHECK(q.ineq_rhs(0) == -40.0);
    CHECK(q.ineq_matrix(1, 0) == 1.0);
    CHECK(q.ineq_rhs(1) == 1.2);
    CHECK(q.ineq_matrix(2, 0) == -1.0);
    CHECK(q.ineq_rhs(2) == 1.2);
  }

  SUBCASE("blocks follow powers of A") {
    const int k = 6;
    const QpInstance q = build_qp(k, m);
    CHECK(q.ineq_matrix.rows() == 1 + 10 * (k - 2) + 2 * (k - 1));
    for (int i = 1; i < k; ++i) {
      CHECK(q.ineq_matrix(0, i - 1) == doctest::Approx(m.C.dot(power(m.A, k - 1 - i) * m.B)));
    }
    for (int j = 1; j <= k - 2; ++j) {
      for (int i = 1; i < k; ++i) {
        const StateVector expect = i <= j ? StateVector(power(m.A, j - i) * m.B) : StateVector::Zero();
        for (int r = 0; r < kStateDim; ++r) {
          CHECK(q.ineq_matrix(1 + 5 * (j - 1) + r, i - 1) == doctest::Approx(expect[r]));
          CHECK(q.ineq_matrix(1 + 5 * (k - 2) + 5 * (j - 1) + r, i - 1) == doctest::Approx(-expect[r]));
        }
      }
      for (int r = 0; r < kStateDim; ++r) {
        CHECK(q.ineq_rhs(1 + 5 * (j - 1) + r) == m.x_max[r]);
        CHECK(q.ineq_rhs(1 + 5 * (k - 2) + 5 * (j - 1) + r) == -m.x_min[r]);
      }
    }
    CHECK(q.linear_term.isApprox(Eigen::VectorXd::Constant(k - 1, -m.mu_u)));
  }
}

TEST_CASE("three-step toy plan") {
  const ClosedLoopModel m = toy_model();
  const ShiftTable t = compute_shift_table(m);
  CHECK(t.k_min == 3);
  CHECK(t.table_size() == 1);
  REQUIRE(t.at(3).size() == 2);
  CHECK(t.at(3)[0] == doctest::Approx(-2.75).epsilon(1e-12));
  CHECK(t.at(3)[1] == doctest::Approx(-2.75).epsilon(1e-12));
  CHECK(t.cost[3] == doctest::Approx(0.5 * 2 * 2.75 * 2.75));
  CHECK(verify_shift_table(t, m).ok);
}

TEST_CASE("toy plan with an active intermediate bound matches a grid search") {
  ClosedLoopModel m = toy_model(-5.5, 4);
  m.x_min[kRangeDev] = -2.0;  // intermediate range may not drop below -2
  const QpInstance q = build_qp(4, m);
  const QpSolution s = solve_qp(q);
  REQUIRE(s.status == QpStatus::optimal);

  // oracle: enumerate inputs, simulate the running sum directly
  double best = std::numeric_limits<double>::infinity();
  double bu[3] = {0, 0, 0};
  const double h = 0.01;
  for (int i = -500; i <= 500; ++i) {
    const double u1 = h * i;
    if (u1 < -2.0) continue;
    for (int j = -500; j <= 500; ++j) {
      const double u2 = h * j;
      if (u1 + u2 < -2.0) continue;
      const double u3 = std::max(-5.0, -5.5 - u1 - u2);
      if (u1 + u2 + u3 > -5.5 + 1e-12) continue;
      const double f = 0.5 * (u1 * u1 + u2 * u2 + u3 * u3);
      if (f < best) {
        best = f;
        bu[0] = u1;
        bu[1] = u2;
        bu[2] = u3;
      }
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s.x(i) - bu[i]) < 2e-3);
  CHECK(kkt_residuals(q, s).max() <= 1e-8);
}

TEST_CASE("minimum feasible horizon at the default parameters") {
  // frozen from the feasibility scan
  CHECK(find_min_feasible_horizon(default_model()) == 51);
  CHECK(find_min_feasible_horizon(default_model(9.144)) == 26);

  const FeasibilityScan scan = scan_feasibility(default_model());
  CHECK(scan.monotone);
  CHECK(scan.violations.empty());
  CHECK(!scan.feasible[50]);
  CHECK(scan.feasible[51]);
}

TEST_CASE("at k_min some input sits on a bound") {
  const ClosedLoopModel m = default_model();
  const ShiftTable t = compute_shift_table(m);
  bool on_bound = false;
  for (double s : t.at(t.k_min)) {
    const double u = m.mu_u + s;
    on_bound |= std::abs(u - m.hv.u_max) < 1e-7 || std::abs(u - m.hv.u_min) < 1e-7;
  }
  CHECK(on_bound);
}

TEST_CASE("unreachable event") {
  ClosedLoopModel m = toy_model();
  m.hv.u_min = -1.0;
  m.hv.u_max = 1.0;
  CHECK_THROWS_AS(find_min_feasible_horizon(m), UnreachableEvent);

  HvModelParams tight;
  tight.u_min = -1e-4;
  tight.u_max = 1e-4;
  const ClosedLoopModel r =
      assemble_state_space(PlantParams{}, ControllerGains{}, tight, ScenarioParams{}, 0.0);
  CHECK_THROWS_AS(compute_shift_table(r), UnreachableEvent);
}

TEST_CASE("crash table properties") {
  const ClosedLoopModel m = default_model();
  const ShiftTable t = compute_shift_table(m);
  CHECK(t.fingerprint == model_fingerprint(m));
  CHECK(t.horizon == 119);
  CHECK(t.table_size() == 69);
  CHECK(t.monotone_feasibility);

  const ShiftVerification v = verify_shift_table(t, m);
  CHECK(v.ok);
  CHECK(v.worst_terminal_excess <= 1e-6);
  CHECK(v.worst_bound_excess <= 1e-6);

  for (int k = t.k_min; k <= t.horizon; ++k) {
    CHECK(t.kkt[k] <= 1e-8);
    CHECK(t.at(k).size() == static_cast<std::size_t>(k - 1));
    if (k > t.k_min) CHECK(t.cost[k] <= t.cost[k - 1] + 1e-9);
  }
}

TEST_CASE("verification catches a corrupted entry") {
  const ClosedLoopModel m = default_model();
  ShiftTable t = compute_shift_table(m);
  for (double& s : t.shifts[80]) s *= 0.5;
  const ShiftVerification v = verify_shift_table(t, m);
  CHECK(!v.ok);
  REQUIRE(v.failing.size() == 1);
  CHECK(v.failing[0] == 80);
}

TEST_CASE("shift table text round trip") {
  const ClosedLoopModel m = default_model(9.144);
  ShiftTable t = compute_shift_table(m);
  t.config = R"({"a": 1})";
  std::stringstream ss;
  write_shift_table(ss, t);
  const ShiftTable back = read_shift_table(ss);
  CHECK(back.fingerprint == t.fingerprint);
  CHECK(back.event_range == t.event_range);
  CHECK(back.k_min == t.k_min);
  CHECK(back.mu_u == t.mu_u);
  CHECK(back.config == t.config);
  for (int k = t.k_min; k <= t.horizon; ++k) {
    CHECK(back.at(k) == t.at(k));
    CHECK(back.cost[k] == t.cost[k]);
  }

  std::stringstream again;
  write_shift_table(again, back);
  std::stringstream first;
  write_shift_table(first, t);
  CHECK(again.str() == first.str());
}

TEST_CASE("malformed shift tables") {
  std::istringstream unknown("# acceval shift table v1\nfingerprint abc\nhorizon 3\nk_min 3\nbogus 1\n");
  CHECK_THROWS_AS(read_shift_table(unknown), DataError);
  std::istringstream missing("# acceval shift table v1\nfingerprint abc\nhorizon 3\nk_min 2\nentry 3 0 0 2 1 1\n");
  CHECK_THROWS_AS(read_shift_table(missing), DataError);
  std::istringstream short_entry("fingerprint abc\nhorizon 3\nk_min 3\nentry 3 0 0 2 1\n");
  CHECK_THROWS_AS(read_shift_table(short_entry), DataError);
}
