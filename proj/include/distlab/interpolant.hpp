// Fixed-generator representation: stochastic-interpolant flow matching and
// score-based diffusion (target fields, regression losses, trainers, ODE/SDE
// generators).
#pragma once

#include <cstdint>
#include <functional>
#include <variant>

#include "distlab/measures.hpp"
#include "distlab/rfm.hpp"
#include "distlab/trajectory.hpp"

namespace distlab {

using InterpTarget = std::variant<ParticleMeasure, GaussianMeasure>;

struct InterpolantProblem {
  GaussianMeasure base;
  InterpTarget target;

  int dim() const { return base.dim(); }
};

Eigen::VectorXd sample_target_point(const InterpTarget& target, Philox& rng);

// Self-normalized Monte Carlo estimate of V*(x, tau) = E[x1 - x0 | X_tau = x]
// with a Gaussian space window of width h ~ window_scale * n_mc^(-1/6).
// Throws "unsupported point" when no weight mass falls in the window.
Eigen::VectorXd target_velocity_mc(const InterpolantProblem& prob, const Eigen::VectorXd& x,
                                   double tau, int n_mc, std::uint64_t seed,
                                   double window_scale = 0.5);

// Closed-form interpolant velocity when both endpoints are diagonal Gaussians.
Eigen::VectorXd gaussian_interpolant_velocity(const GaussianMeasure& base,
                                              const GaussianMeasure& target,
                                              const Eigen::VectorXd& x, double tau);

// MC value of (1/2) E |V((1-tau)x0 + tau x1, tau) - (x1 - x0)|^2.
double interpolant_loss(const TimeVelocityField& field, const InterpolantProblem& prob, int n_mc,
                        std::uint64_t seed);

// L2(rho_m) coefficient gradient of the same fixed-sample loss (identical
// seed draws the identical sample set).
Eigen::MatrixXd interpolant_loss_gradient(const TimeVelocityField& field,
                                          const InterpolantProblem& prob, int n_mc,
                                          std::uint64_t seed);

struct InterpTrainConfig {
  int batch = 256;
  double dt = 1.0;
  int steps = 20000;
  int log_every = 200;
  int eval_mc = 20000;  // fixed evaluation sample for the logged loss
  std::uint64_t seed = 0;
};

struct InterpTrainResult {
  TimeVelocityField field;
  TrajectoryLog log;  // columns: t, loss, param_norm
};

// Stochastic gradient flow on the interpolant loss with fresh minibatches,
// zero initialization. Aborts with partial log on non-finite loss.
InterpTrainResult train_interpolant(const InterpolantProblem& prob, const FeatureBank& bank,
                                    const InterpTrainConfig& config);

using VelocityFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// RK4 integration of dx/dtau = V(x, tau) from tau = 0 to 1.
Eigen::VectorXd flow_transport(const VelocityFn& velocity, const Eigen::VectorXd& x0, int steps);
Eigen::VectorXd flow_transport(const TimeVelocityField& field, const Eigen::VectorXd& x0,
                               int steps);

// Same integrator for a batch of start points (rows), sharing the feature
// evaluations across the batch at each stage.
Eigen::MatrixXd flow_transport_many(const TimeVelocityField& field, const Eigen::MatrixXd& x0,
                                    int steps);

// Noise schedule beta with its closed-form integral B(tau) = Int_0^tau beta.
struct DiffusionSchedule {
  std::function<double(double)> beta;
  std::function<double(double)> B;
  double T = 1.0;
};

DiffusionSchedule constant_beta_schedule(double beta, double T);

// Law of X_tau | X_0 = x0 under dX = -(beta/2) X dtau + sqrt(beta) dW.
GaussianMeasure diffusion_forward_law(const DiffusionSchedule& sched, const Eigen::VectorXd& x0,
                                      double tau);

// Euler-Maruyama paths of the forward SDE, used as the moment oracle.
ParticleMeasure diffusion_forward_em(const DiffusionSchedule& sched, const Eigen::VectorXd& x0,
                                     double tau, int paths, double dt, std::uint64_t seed);

enum class ReverseMode { sde, ode };

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// Integrates the reverse-time generator from tau = T to 0 starting from
// X_T ~ N(0, I): SDE via Euler-Maruyama, ODE via RK4.
ParticleMeasure reverse_generate(const DiffusionSchedule& sched, const ScoreFn& score,
                                 ReverseMode mode, int dim, int n, int steps, std::uint64_t seed);

// Exact score of the diffused marginal when the target is a diagonal Gaussian.
ScoreFn gaussian_diffusion_score(const GaussianMeasure& target, const DiffusionSchedule& sched);

// MC value of the denoising score-matching loss with weight lambda(tau);
// tau is sampled uniformly from [tau_min, T] to avoid the tau = 0 singularity.
double score_matching_loss(const ScoreFn& score, const InterpTarget& target,
                           const DiffusionSchedule& sched,
                           const std::function<double(double)>& lambda, int n_mc,
                           std::uint64_t seed, double tau_min = 1e-3);

}  // namespace distlab
