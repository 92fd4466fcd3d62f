#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "acceval/plant_controller.hpp"
#include "acceval/qp_solver.hpp"

namespace acceval {

/// Most-likely input sequence problem for a target event step k*:
///   minimize 1/2 u'u + linear_term' u  subject to ineq_matrix u <= ineq_rhs
/// over u(1..k*-1). Rows are ordered: terminal range row, (k*-2) upper
/// state-bound blocks, (k*-2) lower state-bound blocks, upper input bounds,
/// lower input bounds.
struct QpInstance {
  int k_star = 0;
  Eigen::VectorXd linear_term;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;

  int dimension() const { return k_star - 1; }
};

QpInstance build_qp(int k_star, const ClosedLoopModel& m);

/// Optimal sequence for `q`, or infeasible / no_convergence status.
QpSolution solve_qp(const QpInstance& q, const QpOptions& options = {});

KktResiduals kkt_residuals(const QpInstance& q, const QpSolution& sol);

struct FeasibilityScan {
  std::optional<int> k_min;
  std::vector<char> feasible;   // indexed by k*, entries 0 and 1 unused
  bool monotone = true;         // no infeasible k* above a feasible one
  std::vector<int> violations;  // infeasible k* found above k_min
  std::vector<QpSolution> solutions;  // indexed by k*
};

/// Solves every k* in [2, K] in increasing order.
FeasibilityScan scan_feasibility(const ClosedLoopModel& m, const QpOptions& options = {});

/// Smallest feasible k*; throws UnreachableEvent when none exists.
int find_min_feasible_horizon(const ClosedLoopModel& m, const QpOptions& options = {});

/// Optimal mean shifts for every k* in [k_min, K]. Entry k* holds
/// u*(1..k*-1) - mu_u; steps at or after k* carry no shift.
struct ShiftTable {
  std::string fingerprint;
  double event_range = 0.0;
  int horizon = 0;
  int k_min = 0;
  double mu_u = 0.0;
  std::vector<std::vector<double>> shifts;  // indexed by k*
  std::vector<double> cost;                 // 1/2 |shift|^2, indexed by k*
  std::vector<double> kkt;                  // KKT residual of the solve, indexed by k*
  bool monotone_feasibility = true;
  std::string config;  // single-line config echo, optional

  int table_size() const { return horizon - k_min + 1; }
  const std::vector<double>& at(int k_star) const { return shifts.at(k_star); }
};

ShiftTable compute_shift_table(const ClosedLoopModel& m, const QpOptions& options = {});

struct ShiftVerification {
  bool ok = true;
  double worst_terminal_excess = 0.0;  // max over k* of range_dev(k*) - threshold
  double worst_bound_excess = 0.0;     // max state-bound violation before k*
  double worst_input_excess = 0.0;     // max input-bound violation
  std::vector<int> failing;
};

/// Replays mu_u + shift through `step` for every entry.
ShiftVerification verify_shift_table(const ShiftTable& t, const ClosedLoopModel& m,
                                     double tolerance = 1e-6);

void write_shift_table(std::ostream& os, const ShiftTable& t);
ShiftTable read_shift_table(std::istream& is);

}  // namespace acceval
