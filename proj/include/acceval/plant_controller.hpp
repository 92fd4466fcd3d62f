#pragma once

#include <string>

#include <Eigen/Core>

#include "acceval/hv_model.hpp"

namespace acceval {

inline constexpr int kStateDim = 5;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using OutputRow = Eigen::Matrix<double, 1, kStateDim>;

/// State ordering [a_L, v_L - v0, v - v0, F_x - F_x0, R_L - R_desire].
enum StateIndex : int {
  kLeadAccel = 0,
  kLeadSpeedDev = 1,
  kAvSpeedDev = 2,
  kForceDev = 3,
  kRangeDev = 4,
};

inline constexpr double kGravity = 9.81;

struct PlantParams {
  double mass = 1757.0;        // kg
  double frontal_area = 2.2;   // m^2
  double drag_coeff = 0.32;
  double air_density = 1.202;  // kg/m^3
  double rolling_resist = 0.0;
  double road_grade = 0.0;     // rad
  double wind_speed = 0.0;     // m/s
  double force_min = -17236.0; // N
  double force_max = 17236.0;  // N

  void validate() const;
};

struct ControllerGains {
  double kp = 62.63;   // N/m
  double ki = 1.111;   // N/(m s)
  double kd = 882.7;   // N s/m
  double desired_headway = 2.0;  // s

  void validate() const;
};

/// Operating point, step, horizon and the AV/range bounds of the test.
struct ScenarioParams {
  double v0 = 20.0;            // equilibrium speed of both vehicles, m/s
  double ts = 0.3;             // simulation step, s
  int horizon = 119;           // K
  double av_speed_min = 1.0;
  double av_speed_max = 50.0;
  double range_min = 0.0;
  double range_max = 1000.0;
  double following_time = 114.0;  // T_CF, carried for reference only

  void validate() const;
};

/// tau dv/dt + v = k_av F, around v0.
struct FirstOrderLag {
  double tau = 0.0;    // s
  double gain = 0.0;   // m/s per N
};

/// v(k+1) = -d_v v(k) + n_v F(k).
struct DiscreteLag {
  double n_v = 0.0;
  double d_v = 0.0;
};

/// Scalars entering the closed-loop recurrences.
struct LoopCoefficients {
  double h1 = 0.0;
  double h2 = 0.0;
  double ts = 0.0;
  double n_v = 0.0;
  double d_v = 0.0;
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

/// Discrete closed loop X(k+1) = A X(k) + B u(k), range deviation = C X(k),
/// in deviation coordinates around the equilibrium. Immutable after assembly.
struct ClosedLoopModel {
  StateMatrix A = StateMatrix::Zero();
  StateVector B = StateVector::Zero();
  OutputRow C = OutputRow::Zero();
  StateVector x_min = StateVector::Constant(-1e300);
  StateVector x_max = StateVector::Constant(1e300);
  StateVector x_init = StateVector::Zero();

  double v0 = 0.0;
  double r_desire = 0.0;
  double mu_u = 0.0;
  double equilibrium_force = 0.0;
  HvModelParams hv;
  double ts = 0.0;
  int horizon = 0;
  double event_range = 0.0;
  double event_threshold_dev = 0.0;  // event_range - r_desire

  FirstOrderLag lag;
  LoopCoefficients coeffs;

  double range_dev(const StateVector& x) const { return C.dot(x); }
};

FirstOrderLag linearize_plant(const PlantParams& plant, double v0);

DiscreteLag discretize_zoh(const FirstOrderLag& lag, double ts);

/// Builds A, B, C by composing the scalar recurrences as linear forms.
ClosedLoopModel assemble_state_space(const PlantParams& plant, const ControllerGains& gains,
                                     const HvModelParams& hv, const ScenarioParams& scenario,
                                     double event_range);

inline StateVector step(const StateVector& x, double u, const ClosedLoopModel& m) {
  return m.A * x + m.B * u;
}

/// Same transition as `step`, evaluated equation by equation.
StateVector direct_step(const StateVector& x, double u, const LoopCoefficients& c);

/// Exact-decimal text dump of the model (17 significant digits).
std::string dump_model(const ClosedLoopModel& m);

/// 64-bit FNV-1a of `dump_model`, as 16 hex digits.
std::string model_fingerprint(const ClosedLoopModel& m);

std::string format_double(double x);
std::string fnv1a_hex(const std::string& text);

}  // namespace acceval
