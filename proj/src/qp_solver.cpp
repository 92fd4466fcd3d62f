#include "acceval/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace acceval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rotates columns (i, j) of J so that the pair (a, b) becomes (hypot, 0).
void rotate_columns(Eigen::MatrixXd& J, Eigen::Index i, Eigen::Index j, double cs, double sn) {
  for (Eigen::Index k = 0; k < J.rows(); ++k) {
    const double ji = J(k, i);
    const double jj = J(k, j);
    J(k, i) = cs * ji + sn * jj;
    J(k, j) = -sn * ji + cs * jj;
  }
}

// Working set of the dual method. R is the upper-triangular factor with
// J' N_active = [R; 0]; the trailing n - q columns of J span the null space
// of the active normals in the H metric.
struct ActiveSet {
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  Eigen::VectorXd u;
  std::vector<int> rows;
  std::vector<char> member;

  int size() const { return static_cast<int>(rows.size()); }

  void add(int row, Eigen::VectorXd& d, double multiplier) {
    const int n = static_cast<int>(J.rows());
    const int q = size();
    for (int j = n - 1; j > q; --j) {
      if (d(j) == 0.0) continue;
      const double hyp = std::hypot(d(j - 1), d(j));
      const double cs = d(j - 1) / hyp;
      const double sn = d(j) / hyp;
      d(j - 1) = hyp;
      d(j) = 0.0;
      rotate_columns(J, j - 1, j, cs, sn);
    }
    R.col(q).head(q + 1) = d.head(q + 1);
    u(q) = multiplier;
    rows.push_back(row);
    member[row] = 1;
  }

  void drop(int l) {
    const int q = size();
    member[rows[l]] = 0;
    rows.erase(rows.begin() + l);
    for (int j = l; j < q - 1; ++j) {
      u(j) = u(j + 1);
      R.col(j) = R.col(j + 1);
    }
    R.col(q - 1).setZero();
    // Restore the triangular shape left upper-Hessenberg by the column shift.
    for (int j = l; j < q - 1; ++j) {
      const double a = R(j, j);
      const double b = R(j + 1, j);
      if (b == 0.0) continue;
      const double hyp = std::hypot(a, b);
      const double cs = a / hyp;
      const double sn = b / hyp;
      for (int k = j; k < q - 1; ++k) {
        const double t1 = R(j, k);
        const double t2 = R(j + 1, k);
        R(j, k) = cs * t1 + sn * t2;
        R(j + 1, k) = -sn * t1 + cs * t2;
      }
      R(j + 1, j) = 0.0;
      rotate_columns(J, j, j + 1, cs, sn);
    }
  }
};

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::no_convergence: return "no_convergence";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

QpSolution solve_dense_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                          const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                          const QpOptions& options) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = G.rows();
  if (H.rows() != n || H.cols() != n || (m > 0 && G.cols() != n) || h.size() != m) {
    throw std::invalid_argument("QP dimensions are inconsistent");
  }

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("QP Hessian is not positive definite");

  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(m);

  // Rows normalized to unit length and flipped to n_i' x >= b_i.
  Eigen::MatrixXd N(m, n);
  Eigen::VectorXd b(m);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(m);
  std::vector<char> usable(static_cast<std::size_t>(m), 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = G.row(i).norm();
    if (norm == 0.0) {
      usable[i] = 0;
      N.row(i).setZero();
      b(i) = 0.0;
      if (h(i) < 0.0) {
        sol.status = QpStatus::infeasible;
        sol.x = llt.solve(-c);
        return sol;
      }
      continue;
    }
    scale(i) = norm;
    N.row(i) = -G.row(i) / norm;
    b(i) = -h(i) / norm;
  }

  ActiveSet ws;
  const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  ws.J = Linv.transpose();
  ws.R = Eigen::MatrixXd::Zero(n, n);
  ws.u = Eigen::VectorXd::Zero(n);
  ws.member.assign(static_cast<std::size_t>(m), 0);

  Eigen::VectorXd x = llt.solve(-c);
  Eigen::VectorXd d(n), z(n), r(n);
  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : static_cast<int>(10 * (n + m) + 10);
  int iter = 0;

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.x = x;
    sol.iterations = iter;
    for (int j = 0; j < ws.size(); ++j) {
      sol.multipliers(ws.rows[j]) = ws.u(j) / scale(ws.rows[j]);
    }
    sol.active = ws.rows;
    sol.objective = 0.5 * x.dot(H * x) + c.dot(x);
    return sol;
  };

  for (;;) {
    const double feas_tol = 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>());
    int p = -1;
    double worst = -feas_tol;
    if (m > 0) {
      const Eigen::VectorXd s = N * x - b;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!usable[i] || ws.member[i]) continue;
        if (s(i) < worst) {
          worst = s(i);
          p = static_cast<int>(i);
        }
      }
    }
    if (p < 0) return finish(QpStatus::optimal);

    double u_p = 0.0;
    for (;;) {
      if (++iter > max_iter) return finish(QpStatus::no_convergence);
      const int q = ws.size();
      const auto np = N.row(p).transpose();
      d.noalias() = ws.J.transpose() * np;
      z.noalias() = ws.J.rightCols(n - q) * d.tail(n - q);
      if (q > 0) {
        r.head(q) = ws.R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
      }

      double t1 = kInf;
      int l = -1;
      for (int j = 0; j < q; ++j) {
        if (r(j) > 0.0) {
          const double t = ws.u(j) / r(j);
          if (t < t1) {
            t1 = t;
            l = j;
          }
        }
      }
      double t2 = kInf;
      const double curvature = d.tail(n - q).squaredNorm();
      if (curvature > 1e-24) {
        const double s_p = np.dot(x) - b(p);
        t2 = -s_p / z.dot(np);
      }

      const double t = std::min(t1, t2);
      if (t == kInf) return finish(QpStatus::infeasible);

      if (t2 == kInf) {
        // Dual-only step: no primal progress possible until a row leaves.
        ws.u.head(q) -= t * r.head(q);
        u_p += t;
        ws.drop(l);
        continue;
      }

      x += t * z;
      ws.u.head(q) -= t * r.head(q);
      u_p += t;
      if (t2 <= t1) {
        ws.add(p, d, u_p);
        break;
      }
      ws.drop(l);
    }
  }
}

KktResiduals kkt_residuals(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                           const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  KktResiduals k;
  Eigen::VectorXd grad = H * x + c;
  if (G.rows() > 0) grad += G.transpose() * lambda;
  k.stationarity = grad.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const double slack = h(i) - G.row(i).dot(x);
    k.primal = std::max(k.primal, -slack);
    k.dual = std::max(k.dual, -lambda(i));
    k.complementarity = std::max(k.complementarity, std::abs(lambda(i) * slack));
  }
  return k;
}

}  // namespace acceval
