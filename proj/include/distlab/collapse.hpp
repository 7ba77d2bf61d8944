// Toy min-max games with mode collapse (scale generator vs. scale
// discriminator) and the one-dimensional transport landscape dynamics.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "distlab/metrics.hpp"
#include "distlab/trajectory.hpp"

namespace distlab {

// ---- Case one: D(x) = b|x|, continuous-time dynamics -----------------------
//   da/dt = -b/2,  db/dt = (a - 1)/2 - c b,  a0 > 0, b0 = 0, c in [0, 1).

struct Case1State {
  double a = 0.0;
  double b = 0.0;
};

// Closed-form solution, valid until a first hits 0. The b amplitude is fixed
// by the initial conditions b(0) = 0, b'(0) = (a0 - 1)/2.
Case1State case1_closed_form(double a0, double c, double t);

// Time derivative of the closed form, for residual checks.
Case1State case1_closed_form_rate(double a0, double c, double t);

struct CollapseOutcome {
  bool collapsed = false;
  double t_collapse = 0.0;  // first time a <= 0 (dense evaluation, step 1e-3)
};

CollapseOutcome detect_collapse_case1(double a0, double c, double horizon);

// Threshold a0 above which the trajectory must hit {a = 0} within one period.
double case1_collapse_threshold(double c);

// ---- Case two: D(x) = b x^2 / 2, explicit Euler with learning rate gamma ---

double case2_energy(double a, double b);  // H = b^2/2 + (a^2-1)/4 - log(a)/2

struct Case2Result {
  std::vector<double> a;  // per-step trajectory, index = step
  std::vector<double> b;
  std::vector<double> energy;
  bool collapsed = false;       // a reached the underflow stop 1e-12
  std::int64_t steps_run = 0;

  std::optional<std::int64_t> first_step_below(double threshold) const;
};

Case2Result case2_discrete(double a0, double b0, double c, double gamma,
                           std::int64_t max_steps);

// Modified (higher-order-in-gamma) ODE that the discrete iterates follow to
// O(gamma^3) per unit time.
struct Rates {
  double da = 0.0;
  double db = 0.0;
};

Rates case2_modified_ode(double a, double b, double c, double gamma);

// Closed-form dH/dt along the modified field.
double case2_energy_rate(double a, double b, double c, double gamma);

// One RK4 step of length gamma of the modified ODE (oracle for the order-of-
// accuracy comparison with the discrete map).
Case1State case2_modified_rk4_step(double a, double b, double c, double gamma);

// ---- 1-D Wasserstein landscape dynamics ------------------------------------

struct Transport1DState {
  Eigen::VectorXd g;   // generator values at nodes z_i = (i + 1/2)/N
  GridDensity target;  // absolutely continuous 1-D target
};

Transport1DState make_transport_state(int nodes, const std::function<double(double)>& g0,
                                      GridDensity target);

// Conditional mean of the matched target quantile block per node
// (m o G, computed by quantile matching; ties grouped within 1e-9).
Eigen::VectorXd matched_block_means(const Transport1DState& state);

// Closed-form trajectory G_t = e^{-t} G_0 + (1 - e^{-t}) m0 o G0.
Transport1DState landscape_state_at(const Transport1DState& init, double t);

ParticleMeasure pushforward_particles(const Transport1DState& state);

// Logs t, w2 = W2(P*, G_t # U[0,1]) at multiples of dt up to T.
TrajectoryLog landscape_flow(const Transport1DState& init, double dt, double total_time);

enum class StationaryClass { global_min, generalized_saddle, not_stationary };

StationaryClass classify_stationary(const Transport1DState& state);

}  // namespace distlab
