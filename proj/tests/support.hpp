#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "acceval/hv_model.hpp"
#include "acceval/plant_controller.hpp"
#include "acceval/rng.hpp"
#include "acceval/sim_engine.hpp"

namespace acceval::testing {

// Reduced model for exhaustive enumeration: the range deviation is the running
// sum of the inputs, the other states are inert. K = 3 gives two inputs.
inline ClosedLoopModel toy_model(double threshold_dev = -5.5, int horizon = 3) {
  ClosedLoopModel m;
  m.A = StateMatrix::Zero();
  for (int i = 1; i < kStateDim; ++i) m.A(i, i) = 1.0;
  m.B = StateVector::Zero();
  m.B(kLeadAccel) = 1.0;
  m.B(kRangeDev) = 1.0;
  m.C = OutputRow::Zero();
  m.C(kRangeDev) = 1.0;
  m.x_min = StateVector::Constant(-1e6);
  m.x_max = StateVector::Constant(1e6);
  m.x_init = StateVector::Zero();
  m.hv.sigma_u = 1.0;
  m.hv.u_min = -5.0;
  m.hv.u_max = 5.0;
  m.mu_u = 0.0;
  m.r_desire = 10.0;
  m.event_range = m.r_desire + threshold_dev;
  m.event_threshold_dev = threshold_dev;
  m.ts = 1.0;
  m.horizon = horizon;
  return m;
}

inline std::vector<double> toy_grid() {
  std::vector<double> g;
  for (int i = -10; i <= 10; ++i) g.push_back(0.5 * i);
  return g;
}

// Exact event probability of the K = 3 toy under the grid-renormalized
// N(0, 1) law, by summing over all 21 x 21 input pairs.
inline double toy_exact_probability(double threshold_dev) {
  const auto g = toy_grid();
  std::vector<double> p;
  double total = 0.0;
  for (double u : g) total += p.emplace_back(std::exp(-0.5 * u * u));
  for (double& v : p) v /= total;
  double prob = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] <= threshold_dev) {
      prob += p[i];
      continue;
    }
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[i] + g[j] <= threshold_dev) prob += p[i] * p[j];
    }
  }
  return prob;
}

// Noiseless or noisy AR(1)-with-speed sequences from several starting points.
inline std::vector<LeadKinematics> simulate_lead(const HvModelParams& h, double noise, int events,
                                                 int steps, std::uint64_t seed, double dt = 0.1) {
  Rng rng(seed);
  std::vector<LeadKinematics> out;
  for (int e = 0; e < events; ++e) {
    LeadKinematics k;
    double a = -1.0 + 2.0 * rng.uniform();
    double v = 10.0 + 20.0 * rng.uniform();
    for (int i = 0; i < steps; ++i) {
      k.lead_speed.push_back(v);
      k.lead_accel.push_back(a);
      const double a_next = h.h0 + h.h1 * a + h.h2 * v + noise * rng.normal();
      v += dt * a;
      a = a_next;
    }
    k.valid_window = {0, k.lead_accel.size()};
    out.push_back(std::move(k));
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("acceval_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace acceval::testing
