#include "distlab/interpolant.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace distlab {

Eigen::VectorXd sample_target_point(const InterpTarget& target, Philox& rng) {
  if (const auto* gauss = std::get_if<GaussianMeasure>(&target)) {
    Eigen::VectorXd x(gauss->dim());
    for (int j = 0; j < gauss->dim(); ++j)
      x[j] = gauss->mean[j] + std::sqrt(gauss->variance[j]) * rng.normal();
    return x;
  }
  const auto& particles = std::get<ParticleMeasure>(target);
  const double u = rng.next_double();
  double acc = 0.0;
  for (int k = 0; k < particles.size(); ++k) {
    acc += particles.weights[k];
    if (u <= acc) return particles.points.row(k).transpose();
  }
  return particles.points.row(particles.size() - 1).transpose();
}

Eigen::VectorXd target_velocity_mc(const InterpolantProblem& prob, const Eigen::VectorXd& x,
                                   double tau, int n_mc, std::uint64_t seed,
                                   double window_scale) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("target_velocity_mc: tau in (0,1)");
  if (n_mc < 1) throw std::invalid_argument("target_velocity_mc: n_mc >= 1");
  const int d = prob.dim();
  const double h = window_scale * std::pow(static_cast<double>(n_mc), -1.0 / 6.0);
  Philox rng(seed);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
  double den = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    Eigen::VectorXd x0(d);
    for (int j = 0; j < d; ++j)
      x0[j] = prob.base.mean[j] + std::sqrt(prob.base.variance[j]) * rng.normal();
    const Eigen::VectorXd x1 = sample_target_point(prob.target, rng);
    const Eigen::VectorXd mid = (1.0 - tau) * x0 + tau * x1;
    const double w = std::exp(-(mid - x).squaredNorm() / (2.0 * h * h));
    num += w * (x1 - x0);
    den += w;
  }
  if (!(den > 0.0)) throw std::runtime_error("unsupported point");
  return num / den;
}

Eigen::VectorXd gaussian_interpolant_velocity(const GaussianMeasure& base,
                                              const GaussianMeasure& target,
                                              const Eigen::VectorXd& x, double tau) {
  const int d = base.dim();
  Eigen::VectorXd v(d);
  for (int j = 0; j < d; ++j) {
    const double v0 = base.variance[j], v1 = target.variance[j];
    const double mean_tau = (1.0 - tau) * base.mean[j] + tau * target.mean[j];
    const double var_tau = (1.0 - tau) * (1.0 - tau) * v0 + tau * tau * v1;
    v[j] = target.mean[j] - base.mean[j] +
           (tau * v1 - (1.0 - tau) * v0) / var_tau * (x[j] - mean_tau);
  }
  return v;
}

namespace {

struct InterpSample {
  Eigen::MatrixXd inputs;      // n x (d+1), last column tau
  Eigen::MatrixXd velocities;  // n x d, rows x1 - x0
};

InterpSample draw_interp_sample(const InterpolantProblem& prob, int n, Philox& rng) {
  const int d = prob.dim();
  InterpSample s;
  s.inputs.resize(n, d + 1);
  s.velocities.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const double tau = rng.next_double();
    Eigen::VectorXd x0(d);
    for (int j = 0; j < d; ++j)
      x0[j] = prob.base.mean[j] + std::sqrt(prob.base.variance[j]) * rng.normal();
    const Eigen::VectorXd x1 = sample_target_point(prob.target, rng);
    s.inputs.row(i).head(d) = ((1.0 - tau) * x0 + tau * x1).transpose();
    s.inputs(i, d) = tau;
    s.velocities.row(i) = (x1 - x0).transpose();
  }
  return s;
}

double loss_on_sample(const TimeVelocityField& field, const InterpSample& s) {
  const Eigen::MatrixXd pred = field.inner.evaluate_many(s.inputs);
  return 0.5 * (pred - s.velocities).squaredNorm() / static_cast<double>(s.inputs.rows());
}

}  // namespace

double interpolant_loss(const TimeVelocityField& field, const InterpolantProblem& prob, int n_mc,
                        std::uint64_t seed) {
  Philox rng(seed);
  return loss_on_sample(field, draw_interp_sample(prob, n_mc, rng));
}

Eigen::MatrixXd interpolant_loss_gradient(const TimeVelocityField& field,
                                          const InterpolantProblem& prob, int n_mc,
                                          std::uint64_t seed) {
  Philox rng(seed);
  const InterpSample s = draw_interp_sample(prob, n_mc, rng);
  const Eigen::MatrixXd phi = field.inner.bank.feature_matrix(s.inputs);
  const Eigen::MatrixXd residual =
      field.inner.evaluate_many(s.inputs) - s.velocities;  // n x d
  return phi.transpose() * residual / static_cast<double>(s.inputs.rows());
}

InterpTrainResult train_interpolant(const InterpolantProblem& prob, const FeatureBank& bank,
                                    const InterpTrainConfig& config) {
  if (bank.d_in != prob.dim() + 1)
    throw std::invalid_argument("train_interpolant: bank must take (x, tau) inputs");
  InterpTrainResult result;
  result.field.inner = zero_function(bank, prob.dim());
  result.log = TrajectoryLog({"t", "loss", "param_norm"});

  Philox batch_rng = Philox(config.seed).split(1);
  Philox eval_rng = Philox(config.seed).split(2);
  const InterpSample eval_set = draw_interp_sample(prob, config.eval_mc, eval_rng);
  const Eigen::VectorXd batch_masses =
      Eigen::VectorXd::Constant(config.batch, 1.0 / config.batch);

  const auto log_state = [&](int step) {
    const double loss = loss_on_sample(result.field, eval_set);
    if (!std::isfinite(loss)) return false;
    result.log.append(std::array<double, 3>{step * config.dt, loss,
                                            result.field.inner.parameter_norm()});
    return true;
  };

  log_state(0);
  for (int step = 1; step <= config.steps; ++step) {
    const InterpSample batch = draw_interp_sample(prob, config.batch, batch_rng);
    const Eigen::MatrixXd phi = bank.feature_matrix(batch.inputs);
    const Eigen::MatrixXd residual =
        phi * result.field.inner.coeffs / static_cast<double>(bank.size()) - batch.velocities;
    gradient_step_inplace(result.field.inner.coeffs, phi, residual, batch_masses, config.dt);
    if (step % config.log_every == 0 || step == config.steps) {
      if (!log_state(step)) break;  // abort on divergence, keep partial log
    }
  }
  return result;
}

Eigen::VectorXd flow_transport(const VelocityFn& velocity, const Eigen::VectorXd& x0, int steps) {
  if (steps < 1) throw std::invalid_argument("flow_transport: steps >= 1");
  const double h = 1.0 / steps;
  Eigen::VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    const double tau = k * h;
    const Eigen::VectorXd k1 = velocity(x, tau);
    const Eigen::VectorXd k2 = velocity(x + 0.5 * h * k1, tau + 0.5 * h);
    const Eigen::VectorXd k3 = velocity(x + 0.5 * h * k2, tau + 0.5 * h);
    const Eigen::VectorXd k4 = velocity(x + h * k3, tau + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw std::runtime_error("blow-up");
  }
  return x;
}

Eigen::VectorXd flow_transport(const TimeVelocityField& field, const Eigen::VectorXd& x0,
                               int steps) {
  return flow_transport(
      [&](const Eigen::VectorXd& x, double tau) { return field.evaluate(x, tau); }, x0, steps);
}

Eigen::MatrixXd flow_transport_many(const TimeVelocityField& field, const Eigen::MatrixXd& x0,
                                    int steps) {
  if (steps < 1) throw std::invalid_argument("flow_transport: steps >= 1");
  const int n = static_cast<int>(x0.rows());
  const int d = static_cast<int>(x0.cols());
  const double h = 1.0 / steps;
  const auto eval = [&](const Eigen::MatrixXd& x, double tau) {
    Eigen::MatrixXd z(n, d + 1);
    z.leftCols(d) = x;
    z.col(d).setConstant(tau);
    return field.inner.evaluate_many(z);
  };
  Eigen::MatrixXd x = x0;
  for (int k = 0; k < steps; ++k) {
    const double tau = k * h;
    const Eigen::MatrixXd k1 = eval(x, tau);
    const Eigen::MatrixXd k2 = eval(x + 0.5 * h * k1, tau + 0.5 * h);
    const Eigen::MatrixXd k3 = eval(x + 0.5 * h * k2, tau + 0.5 * h);
    const Eigen::MatrixXd k4 = eval(x + h * k3, tau + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw std::runtime_error("blow-up");
  }
  return x;
}

DiffusionSchedule constant_beta_schedule(double beta, double T) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  DiffusionSchedule s;
  s.beta = [beta](double) { return beta; };
  s.B = [beta](double tau) { return beta * tau; };
  s.T = T;
  return s;
}

GaussianMeasure diffusion_forward_law(const DiffusionSchedule& sched, const Eigen::VectorXd& x0,
                                      double tau) {
  if (tau < 0.0 || tau > sched.T) throw std::invalid_argument("tau outside [0, T]");
  const double decay = std::exp(-0.5 * sched.B(tau));
  GaussianMeasure g;
  g.mean = decay * x0;
  g.variance = Eigen::VectorXd::Constant(x0.size(), 1.0 - decay * decay);
  return g;
}

ParticleMeasure diffusion_forward_em(const DiffusionSchedule& sched, const Eigen::VectorXd& x0,
                                     double tau, int paths, double dt, std::uint64_t seed) {
  const int d = static_cast<int>(x0.size());
  const int steps = static_cast<int>(std::ceil(tau / dt));
  Philox rng(seed);
  Eigen::MatrixXd pts(paths, d);
  for (int p = 0; p < paths; ++p) {
    Eigen::VectorXd x = x0;
    double s = 0.0;
    for (int k = 0; k < steps; ++k) {
      const double h = std::min(dt, tau - s);
      const double beta = sched.beta(s);
      for (int j = 0; j < d; ++j)
        x[j] += -0.5 * beta * x[j] * h + std::sqrt(beta * h) * rng.normal();
      s += h;
    }
    pts.row(p) = x.transpose();
  }
  return equal_weight_particles(std::move(pts));
}

ParticleMeasure reverse_generate(const DiffusionSchedule& sched, const ScoreFn& score,
                                 ReverseMode mode, int dim, int n, int steps,
                                 std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("reverse_generate: steps >= 1");
  const double h = sched.T / steps;
  Philox rng(seed);
  Eigen::MatrixXd pts(n, dim);
  const auto drift = [&](const Eigen::VectorXd& x, double tau) -> Eigen::VectorXd {
    return -0.5 * sched.beta(tau) * (x + score(x, tau));
  };
  for (int p = 0; p < n; ++p) {
    Eigen::VectorXd x = rng.normal_vector(dim);  // X_T ~ N(0, I)
    for (int k = 0; k < steps; ++k) {
      const double tau = sched.T - k * h;
      if (mode == ReverseMode::sde) {
        const double beta = sched.beta(tau);
        x += h * 0.5 * beta * (x + 2.0 * score(x, tau));
        for (int j = 0; j < dim; ++j) x[j] += std::sqrt(beta * h) * rng.normal();
      } else {
        // RK4 with signed step -h on dx/dtau = -(beta/2)(x + s)
        const Eigen::VectorXd k1 = drift(x, tau);
        const Eigen::VectorXd k2 = drift(x - 0.5 * h * k1, tau - 0.5 * h);
        const Eigen::VectorXd k3 = drift(x - 0.5 * h * k2, tau - 0.5 * h);
        const Eigen::VectorXd k4 = drift(x - h * k3, tau - h);
        x -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      if (!x.allFinite()) throw std::runtime_error("blow-up");
    }
    pts.row(p) = x.transpose();
  }
  return equal_weight_particles(std::move(pts));
}

ScoreFn gaussian_diffusion_score(const GaussianMeasure& target, const DiffusionSchedule& sched) {
  return [target, B = sched.B](const Eigen::VectorXd& x, double tau) {
    const double decay2 = std::exp(-B(tau));
    const double decay = std::sqrt(decay2);
    Eigen::VectorXd s(x.size());
    for (int j = 0; j < x.size(); ++j) {
      const double mean = decay * target.mean[j];
      const double var = decay2 * target.variance[j] + 1.0 - decay2;
      s[j] = -(x[j] - mean) / var;
    }
    return s;
  };
}

double score_matching_loss(const ScoreFn& score, const InterpTarget& target,
                           const DiffusionSchedule& sched,
                           const std::function<double(double)>& lambda, int n_mc,
                           std::uint64_t seed, double tau_min) {
  Philox rng(seed);
  double total = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const double tau = rng.uniform(tau_min, sched.T);
    const Eigen::VectorXd x0 = sample_target_point(target, rng);
    const double decay2 = std::exp(-sched.B(tau));
    const double noise_sd = std::sqrt(1.0 - decay2);
    Eigen::VectorXd omega(x0.size());
    for (int j = 0; j < x0.size(); ++j) omega[j] = rng.normal();
    const Eigen::VectorXd x = std::sqrt(decay2) * x0 + noise_sd * omega;
    total += 0.5 * lambda(tau) * (score(x, tau) + omega / noise_sd).squaredNorm();
  }
  return total / n_mc;
}

}  // namespace distlab
