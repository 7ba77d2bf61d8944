#include "distlab/potential.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace distlab {
namespace {

// log Int e^{-V} dbase over the grid, overflow-safe.
double log_partition(const Eigen::VectorXd& v_values, const Eigen::VectorXd& base_masses) {
  const double shift = -v_values.minCoeff();
  double z = 0.0;
  for (int i = 0; i < v_values.size(); ++i) z += base_masses[i] * std::exp(-v_values[i] - shift);
  return std::log(z) + shift;
}

}  // namespace

GridDensity density_from_values(const Eigen::VectorXd& potential_values, const GridDensity& base) {
  if (potential_values.size() != base.num_cells())
    throw std::invalid_argument("density_from_values: grid mismatch");
  const double shift = -potential_values.minCoeff();
  GridDensity out = base;
  for (int i = 0; i < base.num_cells(); ++i)
    out.values[i] = base.values[i] * std::exp(-potential_values[i] - shift);
  return normalize(out);
}

GridDensity density_of(const RfmFunction& potential, const GridDensity& base) {
  const Eigen::VectorXd v = potential.evaluate_many(base.cell_centers()).col(0);
  return density_from_values(v, base);
}

double bp_loss(const RfmFunction& potential, const BpTarget& target, const GridDensity& base) {
  const Eigen::VectorXd v = potential.evaluate_many(base.cell_centers()).col(0);
  double mean_v = 0.0;
  if (const auto* grid = std::get_if<GridDensity>(&target)) {
    mean_v = grid->cell_masses().dot(potential.evaluate_many(grid->cell_centers()).col(0));
  } else {
    const auto& particles = std::get<ParticleMeasure>(target);
    mean_v = particles.weights.dot(potential.evaluate_many(particles.points).col(0));
  }
  return mean_v + log_partition(v, base.cell_masses());
}

Eigen::VectorXd bp_grad_field(const RfmFunction& potential, const GridDensity& target,
                              const GridDensity& base) {
  const GridDensity pv = density_of(potential, base);
  Eigen::VectorXd field(base.num_cells());
  for (int i = 0; i < base.num_cells(); ++i) field[i] = target.values[i] - pv.values[i];
  return field;
}

RfmFunction plant_potential(const FeatureBank& bank, const GridDensity& base,
                            double param_norm) {
  // Coefficients aligned with the top eigenfunction of the centered kernel
  // over the base: the largest-variance potential at the stated coefficient
  // norm. (I.i.d. coefficient draws average out to a potential of size
  // O(1/sqrt(m)), which disappears under the sampling noise of any
  // empirical target.)
  const Quadrature q = quadrature_of(base);
  const Eigen::MatrixXd phi = bank.feature_matrix(q.points);
  const Eigen::RowVectorXd mean_features = q.masses.transpose() * phi;
  const Eigen::MatrixXd centered = phi - Eigen::VectorXd::Ones(phi.rows()) * mean_features;
  const Eigen::VectorXd s = q.masses.cwiseSqrt();
  const Eigen::MatrixXd sym =
      s.asDiagonal() * (centered * centered.transpose() / bank.size()) * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  int top = 0;
  es.eigenvalues().maxCoeff(&top);
  const Eigen::VectorXd u = es.eigenvectors().col(top);

  RfmFunction f;
  f.bank = bank;
  f.coeffs = centered.transpose() * (s.asDiagonal() * u);
  f.coeffs *= param_norm / f.parameter_norm();
  // fix the arbitrary eigenvector sign: largest-magnitude cell positive
  const Eigen::VectorXd values = f.evaluate_many(q.points).col(0);
  int peak = 0;
  values.cwiseAbs().maxCoeff(&peak);
  if (values[peak] < 0.0) f.coeffs = -f.coeffs;
  return f;
}

namespace {

BpRunResult run_bp_flow(const BpTarget& target, const GridDensity& base, const FeatureBank& bank,
                        const BpRegularization& reg, const BpTrainConfig& config) {
  const Eigen::MatrixXd phi_grid = bank.feature_matrix(base.cell_centers());
  const Eigen::VectorXd base_masses = base.cell_masses();
  const double m = static_cast<double>(bank.size());

  Eigen::VectorXd target_feature;  // <sigma_j, P*>
  int sample_count = 0;
  if (const auto* grid = std::get_if<GridDensity>(&target)) {
    if (grid->cells_per_axis != base.cells_per_axis || grid->dim != base.dim)
      throw std::invalid_argument("train_bp: target grid must match base");
    target_feature = phi_grid.transpose() * grid->cell_masses();
  } else {
    const auto& particles = std::get<ParticleMeasure>(target);
    target_feature = bank.feature_matrix(particles.points).transpose() * particles.weights;
    sample_count = particles.size();
  }

  const GridDensity* reference =
      config.reference ? &*config.reference : std::get_if<GridDensity>(&target);

  const int steps = static_cast<int>(std::llround(config.total_time / config.dt));
  const int log_stride = std::max(1, static_cast<int>(std::llround(config.log_every / config.dt)));

  BpRunResult result;
  result.log = TrajectoryLog({"t", "loss", "kl", "param_norm"});
  Eigen::VectorXd a = Eigen::VectorXd::Zero(bank.size());

  const auto model_masses = [&](const Eigen::VectorXd& v) {
    const double shift = -v.minCoeff();
    Eigen::VectorXd w(v.size());
    for (int i = 0; i < v.size(); ++i) w[i] = base_masses[i] * std::exp(-v[i] - shift);
    return Eigen::VectorXd(w / w.sum());
  };

  const auto log_state = [&](double time) {
    const Eigen::VectorXd v = phi_grid * a / m;
    double loss_value = target_feature.dot(a) / m + log_partition(v, base_masses);
    if (reg.mode == BpRegularization::Mode::tikhonov)
      loss_value += reg.lambda / std::sqrt(sample_count) * (a.norm() / std::sqrt(m));
    if (!std::isfinite(loss_value)) {
      result.diverged = true;
      return false;
    }
    double kl_value = std::numeric_limits<double>::quiet_NaN();
    if (reference) kl_value = kl(*reference, density_from_values(v, base)).value;
    result.log.append(std::array<double, 4>{time, loss_value, kl_value, a.norm() / std::sqrt(m)});
    return true;
  };

  log_state(0.0);
  for (int k = 1; k <= steps; ++k) {
    const Eigen::VectorXd v = phi_grid * a / m;
    // da/dt = <sigma, P_V> - <sigma, P*>
    a += config.dt * (phi_grid.transpose() * model_masses(v) - target_feature);
    if (reg.mode == BpRegularization::Mode::tikhonov) {
      // proximal step for (lambda/sqrt(n)) |a|: soft shrinkage toward 0,
      // which realizes the subgradient-0-at-0 convention without chatter
      const double norm = a.norm() / std::sqrt(m);
      const double pull = config.dt * reg.lambda / std::sqrt(sample_count);
      a *= norm > pull ? 1.0 - pull / norm : 0.0;
    } else if (reg.mode == BpRegularization::Mode::ivanov) {
      const double norm = a.norm() / std::sqrt(m);
      if (norm > reg.radius && norm > 0.0) a *= reg.radius / norm;
    }
    if (k % log_stride == 0 || k == steps) {
      if (!log_state(k * config.dt)) break;
    }
  }
  result.potential = RfmFunction{bank, a};
  return result;
}

}  // namespace

BpRunResult train_bp(const BpTarget& target, const GridDensity& base, const FeatureBank& bank,
                     const BpTrainConfig& config) {
  return run_bp_flow(target, base, bank, BpRegularization{}, config);
}

BpRunResult train_bp_regularized(const ParticleMeasure& target, const GridDensity& base,
                                 const FeatureBank& bank, const BpRegularization& reg,
                                 const BpTrainConfig& config) {
  if (reg.mode == BpRegularization::Mode::ivanov && !(reg.radius > 0.0))
    throw std::invalid_argument("ivanov regularization needs R > 0");
  if (reg.mode == BpRegularization::Mode::tikhonov && !(reg.lambda > 0.0))
    throw std::invalid_argument("tikhonov regularization needs lambda > 0");
  return run_bp_flow(BpTarget{target}, base, bank, reg, config);
}

}  // namespace distlab
