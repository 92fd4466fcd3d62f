#pragma once

#include <vector>

#include <Eigen/Core>

namespace acceval {

struct QpOptions {
  double tolerance = 1e-8;   // KKT residual target
  int max_iterations = 0;    // 0 selects 10 * (variables + constraints)
};

enum class QpStatus { optimal, infeasible, no_convergence };

const char* to_string(QpStatus s);

struct QpSolution {
  QpStatus status = QpStatus::no_convergence;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per inequality row, >= 0
  std::vector<int> active;
  int iterations = 0;
  double objective = 0.0;
};

struct KktResiduals {
  double stationarity = 0.0;    // |H x + c + G' lambda|_inf
  double primal = 0.0;          // max(G x - h, 0)
  double dual = 0.0;            // max(-lambda, 0)
  double complementarity = 0.0; // max |lambda_i (h_i - G_i x)|
  double max() const;
};

/// Minimizes 1/2 x'Hx + c'x subject to G x <= h for positive definite H,
/// with the Goldfarb-Idnani dual active-set method. The iteration starts at
/// the unconstrained minimum and adds violated rows, so an empty dual step
/// certifies infeasibility.
QpSolution solve_dense_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                          const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                          const QpOptions& options = {});

KktResiduals kkt_residuals(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                           const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

}  // namespace acceval
