#include "acceval/shift_planner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "acceval/error.hpp"

namespace acceval {

QpInstance build_qp(int k_star, const ClosedLoopModel& m) {
  if (k_star < 2) throw std::invalid_argument("k* must be at least 2");
  const int n = k_star - 1;
  const int blocks = k_star - 2;
  const int rows = 1 + 2 * kStateDim * blocks + 2 * n;

  // impulse[j] = A^j B, free[j] = A^j X(1).
  std::vector<StateVector> impulse(static_cast<std::size_t>(n));
  std::vector<StateVector> free(static_cast<std::size_t>(k_star));
  impulse[0] = m.B;
  for (int j = 1; j < n; ++j) impulse[j] = m.A * impulse[j - 1];
  free[0] = m.x_init;
  for (int j = 1; j < k_star; ++j) free[j] = m.A * free[j - 1];

  QpInstance q;
  q.k_star = k_star;
  q.linear_term = Eigen::VectorXd::Constant(n, -m.mu_u);
  q.ineq_matrix = Eigen::MatrixXd::Zero(rows, n);
  q.ineq_rhs = Eigen::VectorXd::Zero(rows);

  // Range at k* reaches the event threshold.
  for (int i = 1; i <= n; ++i) q.ineq_matrix(0, i - 1) = m.C.dot(impulse[k_star - 1 - i]);
  q.ineq_rhs(0) = m.event_threshold_dev - m.C.dot(free[k_star - 1]);

  // State bounds on X(j + 1), j = 1..k*-2.
  const int upper0 = 1;
  const int lower0 = 1 + kStateDim * blocks;
  for (int j = 1; j <= blocks; ++j) {
    const int up = upper0 + kStateDim * (j - 1);
    const int lo = lower0 + kStateDim * (j - 1);
    for (int i = 1; i <= j; ++i) {
      q.ineq_matrix.block(up, i - 1, kStateDim, 1) = impulse[j - i];
      q.ineq_matrix.block(lo, i - 1, kStateDim, 1) = -impulse[j - i];
    }
    q.ineq_rhs.segment(up, kStateDim) = m.x_max - free[j];
    q.ineq_rhs.segment(lo, kStateDim) = -m.x_min + free[j];
  }

  const int box0 = 1 + 2 * kStateDim * blocks;
  for (int i = 0; i < n; ++i) {
    q.ineq_matrix(box0 + i, i) = 1.0;
    q.ineq_rhs(box0 + i) = m.hv.u_max;
    q.ineq_matrix(box0 + n + i, i) = -1.0;
    q.ineq_rhs(box0 + n + i) = -m.hv.u_min;
  }
  return q;
}

QpSolution solve_qp(const QpInstance& q, const QpOptions& options) {
  const int n = q.dimension();
  return solve_dense_qp(Eigen::MatrixXd::Identity(n, n), q.linear_term, q.ineq_matrix, q.ineq_rhs,
                        options);
}

KktResiduals kkt_residuals(const QpInstance& q, const QpSolution& sol) {
  const int n = q.dimension();
  return kkt_residuals(Eigen::MatrixXd::Identity(n, n), q.linear_term, q.ineq_matrix, q.ineq_rhs,
                       sol.x, sol.multipliers);
}

FeasibilityScan scan_feasibility(const ClosedLoopModel& m, const QpOptions& options) {
  if (m.horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  FeasibilityScan scan;
  scan.feasible.assign(static_cast<std::size_t>(m.horizon + 1), 0);
  scan.solutions.resize(static_cast<std::size_t>(m.horizon + 1));
  for (int k = 2; k <= m.horizon; ++k) {
    QpSolution sol = solve_qp(build_qp(k, m), options);
    if (sol.status == QpStatus::no_convergence) {
      throw std::runtime_error("QP for k* = " + std::to_string(k) + " did not converge after " +
                               std::to_string(sol.iterations) + " iterations");
    }
    const bool ok = sol.status == QpStatus::optimal;
    scan.feasible[k] = ok ? 1 : 0;
    if (ok && !scan.k_min) scan.k_min = k;
    if (!ok && scan.k_min) {
      scan.monotone = false;
      scan.violations.push_back(k);
    }
    scan.solutions[k] = std::move(sol);
  }
  return scan;
}

int find_min_feasible_horizon(const ClosedLoopModel& m, const QpOptions& options) {
  const FeasibilityScan scan = scan_feasibility(m, options);
  if (!scan.k_min) {
    throw UnreachableEvent("event unreachable within horizon: no k* <= " +
                           std::to_string(m.horizon) +
                           " admits an input sequence satisfying the physical constraints");
  }
  return *scan.k_min;
}

ShiftTable compute_shift_table(const ClosedLoopModel& m, const QpOptions& options) {
  FeasibilityScan scan = scan_feasibility(m, options);
  if (!scan.k_min) {
    throw UnreachableEvent("event unreachable within horizon: no k* <= " +
                           std::to_string(m.horizon) +
                           " admits an input sequence satisfying the physical constraints");
  }
  ShiftTable t;
  t.fingerprint = model_fingerprint(m);
  t.event_range = m.event_range;
  t.horizon = m.horizon;
  t.k_min = *scan.k_min;
  t.mu_u = m.mu_u;
  t.monotone_feasibility = scan.monotone;
  t.shifts.resize(static_cast<std::size_t>(m.horizon + 1));
  t.cost.assign(static_cast<std::size_t>(m.horizon + 1), 0.0);
  t.kkt.assign(static_cast<std::size_t>(m.horizon + 1), 0.0);
  for (int k = t.k_min; k <= m.horizon; ++k) {
    const QpSolution& sol = scan.solutions[k];
    if (sol.status != QpStatus::optimal) {
      throw std::runtime_error("shift planning failed at k* = " + std::to_string(k) + ": " +
                               to_string(sol.status));
    }
    std::vector<double> shift(static_cast<std::size_t>(k - 1));
    double sq = 0.0;
    for (int i = 0; i < k - 1; ++i) {
      shift[i] = sol.x(i) - m.mu_u;
      sq += shift[i] * shift[i];
    }
    t.cost[k] = 0.5 * sq;
    t.kkt[k] = kkt_residuals(build_qp(k, m), sol).max();
    t.shifts[k] = std::move(shift);
  }
  return t;
}

ShiftVerification verify_shift_table(const ShiftTable& t, const ClosedLoopModel& m,
                                     double tolerance) {
  ShiftVerification v;
  const double threshold = m.event_range - m.r_desire;
  for (int k_star = t.k_min; k_star <= t.horizon; ++k_star) {
    const auto& shift = t.at(k_star);
    StateVector x = m.x_init;
    double bound_excess = 0.0;
    double input_excess = 0.0;
    for (int k = 1; k < k_star; ++k) {
      const double u = t.mu_u + shift[k - 1];
      input_excess = std::max({input_excess, u - m.hv.u_max, m.hv.u_min - u});
      x = step(x, u, m);
      if (k + 1 < k_star) {
        bound_excess = std::max({bound_excess, (x - m.x_max).maxCoeff(), (m.x_min - x).maxCoeff()});
      }
    }
    const double terminal_excess = m.range_dev(x) - threshold;
    v.worst_terminal_excess = std::max(v.worst_terminal_excess, terminal_excess);
    v.worst_bound_excess = std::max(v.worst_bound_excess, bound_excess);
    v.worst_input_excess = std::max(v.worst_input_excess, input_excess);
    if (terminal_excess > tolerance || bound_excess > tolerance || input_excess > tolerance) {
      v.ok = false;
      v.failing.push_back(k_star);
    }
  }
  return v;
}

void write_shift_table(std::ostream& os, const ShiftTable& t) {
  os << "# acceval shift table v1\n";
  os << "fingerprint " << t.fingerprint << '\n';
  os << "event_range " << format_double(t.event_range) << '\n';
  os << "horizon " << t.horizon << '\n';
  os << "k_min " << t.k_min << '\n';
  os << "mu_u " << format_double(t.mu_u) << '\n';
  os << "monotone_feasibility " << (t.monotone_feasibility ? 1 : 0) << '\n';
  if (!t.config.empty()) os << "config " << t.config << '\n';
  for (int k = t.k_min; k <= t.horizon; ++k) {
    const auto& s = t.at(k);
    os << "entry " << k << ' ' << format_double(t.cost[k]) << ' ' << format_double(t.kkt[k]) << ' '
       << s.size();
    for (double v : s) os << ' ' << format_double(v);
    os << '\n';
  }
}

ShiftTable read_shift_table(std::istream& is) {
  ShiftTable t;
  bool have_header = false;
  std::string line;
  int entries = 0;
  auto fail = [](const std::string& what) { throw DataError("shift table: " + what); };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "fingerprint") {
      ls >> t.fingerprint;
    } else if (key == "event_range") {
      ls >> t.event_range;
    } else if (key == "horizon") {
      ls >> t.horizon;
      if (t.horizon < 2) fail("bad horizon");
      t.shifts.assign(static_cast<std::size_t>(t.horizon + 1), {});
      t.cost.assign(static_cast<std::size_t>(t.horizon + 1), 0.0);
      t.kkt.assign(static_cast<std::size_t>(t.horizon + 1), 0.0);
      have_header = true;
    } else if (key == "k_min") {
      ls >> t.k_min;
    } else if (key == "mu_u") {
      ls >> t.mu_u;
    } else if (key == "monotone_feasibility") {
      int flag = 1;
      ls >> flag;
      t.monotone_feasibility = flag != 0;
    } else if (key == "config") {
      std::getline(ls >> std::ws, t.config);
    } else if (key == "entry") {
      if (!have_header) fail("entry before horizon");
      int k = 0;
      std::size_t count = 0;
      double cost = 0.0, kkt = 0.0;
      ls >> k >> cost >> kkt >> count;
      if (!ls || k < 2 || k > t.horizon || count != static_cast<std::size_t>(k - 1)) {
        fail("malformed entry line");
      }
      std::vector<double> s(count);
      for (auto& v : s) ls >> v;
      if (!ls) fail("truncated entry for k* = " + std::to_string(k));
      t.shifts[k] = std::move(s);
      t.cost[k] = cost;
      t.kkt[k] = kkt;
      ++entries;
    } else {
      fail("unknown key '" + key + "'");
    }
    if (!ls && key != "entry") fail("bad value for '" + key + "'");
  }
  if (!have_header || t.fingerprint.empty()) fail("missing header");
  if (t.k_min < 2 || t.k_min > t.horizon) fail("bad k_min");
  if (entries != t.table_size()) fail("expected " + std::to_string(t.table_size()) + " entries");
  for (int k = t.k_min; k <= t.horizon; ++k) {
    if (t.shifts[k].size() != static_cast<std::size_t>(k - 1)) {
      fail("missing entry for k* = " + std::to_string(k));
    }
  }
  return t;
}

}  // namespace acceval
