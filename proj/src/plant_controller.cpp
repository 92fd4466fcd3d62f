#include "acceval/plant_controller.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace acceval {

void PlantParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("plant mass must be positive");
  if (!(frontal_area > 0.0)) throw std::invalid_argument("frontal area must be positive");
  if (!(drag_coeff > 0.0)) throw std::invalid_argument("drag coefficient must be positive");
  if (!(air_density > 0.0)) throw std::invalid_argument("air density must be positive");
  if (!(force_min < force_max)) throw std::invalid_argument("force_min must be below force_max");
}

void ControllerGains::validate() const {
  if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(kd)) {
    throw std::invalid_argument("controller gains must be finite");
  }
  if (!(desired_headway > 0.0)) throw std::invalid_argument("desired headway must be positive");
}

void ScenarioParams::validate() const {
  if (!(v0 > 0.0)) throw std::invalid_argument("v0 must be positive");
  if (!(ts > 0.0)) throw std::invalid_argument("time step must be positive");
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2 steps");
  if (!(av_speed_min < av_speed_max)) throw std::invalid_argument("AV speed bounds reversed");
  if (!(range_min < range_max)) throw std::invalid_argument("range bounds reversed");
}

FirstOrderLag linearize_plant(const PlantParams& plant, double v0) {
  const double airspeed = v0 + plant.wind_speed;
  const double damping = plant.air_density * plant.drag_coeff * plant.frontal_area * airspeed;
  if (!(damping > 0.0)) {
    throw std::invalid_argument("linearization needs positive airspeed and drag");
  }
  return FirstOrderLag{plant.mass / damping, 1.0 / damping};
}

DiscreteLag discretize_zoh(const FirstOrderLag& lag, double ts) {
  if (!(lag.tau > 0.0) || !(ts > 0.0)) throw std::invalid_argument("ZOH needs tau > 0 and ts > 0");
  // -expm1 keeps 1 - e^{-ts/tau} accurate when ts << tau.
  const double decay = std::exp(-ts / lag.tau);
  return DiscreteLag{lag.gain * -std::expm1(-ts / lag.tau), -decay};
}

ClosedLoopModel assemble_state_space(const PlantParams& plant, const ControllerGains& gains,
                                     const HvModelParams& hv, const ScenarioParams& scenario,
                                     double event_range) {
  plant.validate();
  gains.validate();
  hv.validate();
  scenario.validate();

  ClosedLoopModel m;
  m.v0 = scenario.v0;
  m.ts = scenario.ts;
  m.horizon = scenario.horizon;
  m.hv = hv;
  m.r_desire = scenario.v0 * gains.desired_headway;
  if (!(event_range >= 0.0 && event_range < m.r_desire)) {
    throw std::invalid_argument("event range must lie in [0, desired range)");
  }
  m.mu_u = hv.input_mean(scenario.v0);
  m.lag = linearize_plant(plant, scenario.v0);
  const DiscreteLag disc = discretize_zoh(m.lag, scenario.ts);
  m.coeffs = LoopCoefficients{hv.h1, hv.h2, scenario.ts, disc.n_v, disc.d_v,
                              gains.kp, gains.ki, gains.kd};

  const double airspeed = scenario.v0 + plant.wind_speed;
  m.equilibrium_force = plant.mass * kGravity * std::sin(plant.road_grade) +
                        plant.rolling_resist * plant.mass * kGravity * std::cos(plant.road_grade) +
                        0.5 * plant.air_density * plant.frontal_area * plant.drag_coeff *
                            airspeed * airspeed;

  // Each next-state quantity as a linear form in X(k) (u enters only a_L).
  const double ts = scenario.ts;
  const OutputRow e_a = OutputRow::Unit(kLeadAccel);
  const OutputRow e_vl = OutputRow::Unit(kLeadSpeedDev);
  const OutputRow e_v = OutputRow::Unit(kAvSpeedDev);
  const OutputRow e_f = OutputRow::Unit(kForceDev);
  const OutputRow e_r = OutputRow::Unit(kRangeDev);

  const OutputRow a_next = hv.h1 * e_a + hv.h2 * e_vl;
  const OutputRow vl_next = e_vl + ts * e_a;
  const OutputRow v_next = -disc.d_v * e_v + disc.n_v * e_f;
  const OutputRow rdot = e_vl - e_v;
  const OutputRow r_next = e_r + ts * rdot;
  const OutputRow rdot_next = vl_next - v_next;
  const OutputRow f_next = e_f + gains.kp * r_next + (-gains.kp + gains.ki * ts) * e_r +
                           gains.kd * rdot_next - gains.kd * rdot;

  m.A.row(kLeadAccel) = a_next;
  m.A.row(kLeadSpeedDev) = vl_next;
  m.A.row(kAvSpeedDev) = v_next;
  m.A.row(kForceDev) = f_next;
  m.A.row(kRangeDev) = r_next;
  m.B = StateVector::Unit(kLeadAccel);
  m.C = e_r;

  m.x_min << hv.a_min, hv.v_min - m.v0, scenario.av_speed_min - m.v0,
      plant.force_min - m.equilibrium_force, scenario.range_min - m.r_desire;
  m.x_max << hv.a_max, hv.v_max - m.v0, scenario.av_speed_max - m.v0,
      plant.force_max - m.equilibrium_force, scenario.range_max - m.r_desire;
  m.x_init.setZero();

  m.event_range = event_range;
  m.event_threshold_dev = event_range - m.r_desire;
  return m;
}

StateVector direct_step(const StateVector& x, double u, const LoopCoefficients& c) {
  const double a = x[kLeadAccel];
  const double vl = x[kLeadSpeedDev];
  const double v = x[kAvSpeedDev];
  const double f = x[kForceDev];
  const double r = x[kRangeDev];

  const double a_next = c.h1 * a + c.h2 * vl + u;
  const double vl_next = vl + c.ts * a;
  const double v_next = -c.d_v * v + c.n_v * f;
  const double rdot = vl - v;
  const double r_next = r + c.ts * rdot;
  const double rdot_next = vl_next - v_next;
  const double f_next =
      f + c.kp * r_next + (-c.kp + c.ki * c.ts) * r + c.kd * rdot_next - c.kd * rdot;

  StateVector out;
  out << a_next, vl_next, v_next, f_next, r_next;
  return out;
}

std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dump_model(const ClosedLoopModel& m) {
  std::ostringstream os;
  auto line = [&](const char* key, std::initializer_list<double> values) {
    os << key;
    for (double v : values) os << ' ' << format_double(v);
    os << '\n';
  };
  auto vec = [&](const std::string& key, const auto& v) {
    os << key;
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v(i));
    os << '\n';
  };
  os << "# acceval closed-loop model v1\n";
  line("ts", {m.ts});
  os << "horizon " << m.horizon << '\n';
  line("v0", {m.v0});
  line("r_desire", {m.r_desire});
  line("mu_u", {m.mu_u});
  line("equilibrium_force", {m.equilibrium_force});
  line("event_range", {m.event_range});
  line("event_threshold_dev", {m.event_threshold_dev});
  line("hv", {m.hv.h0, m.hv.h1, m.hv.h2, m.hv.sigma_u});
  line("u_bounds", {m.hv.u_min, m.hv.u_max});
  line("lag", {m.lag.tau, m.lag.gain});
  line("zoh", {m.coeffs.n_v, m.coeffs.d_v});
  line("gains", {m.coeffs.kp, m.coeffs.ki, m.coeffs.kd});
  for (int i = 0; i < kStateDim; ++i) vec("A" + std::to_string(i + 1), m.A.row(i));
  vec("B", m.B);
  vec("C", m.C);
  vec("x_min", m.x_min);
  vec("x_max", m.x_max);
  vec("x_init", m.x_init);
  return os.str();
}

std::string model_fingerprint(const ClosedLoopModel& m) { return fnv1a_hex(dump_model(m)); }

}  // namespace acceval
