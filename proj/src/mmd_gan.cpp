#include "distlab/mmd_gan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace distlab {
namespace {

GridDensity grid_like(const DensityIterate& p) {
  GridDensity g;
  g.dim = p.dim;
  g.cells_per_axis = p.cells_per_axis;
  g.values.assign(p.values.data(), p.values.data() + p.values.size());
  return g;
}

void check_grids(const DensityIterate& p, const GridDensity& target) {
  if (p.dim != target.dim || p.cells_per_axis != target.cells_per_axis)
    throw std::invalid_argument("mmd_gan: iterate and target grids must match");
}

}  // namespace

DensityIterate iterate_from(const GridDensity& g) {
  DensityIterate p;
  p.dim = g.dim;
  p.cells_per_axis = g.cells_per_axis;
  p.values = Eigen::Map<const Eigen::VectorXd>(g.values.data(),
                                               static_cast<Eigen::Index>(g.values.size()));
  return p;
}

std::vector<MmdFlowSnapshot> mmd_gan_flow(const DensityIterate& p0, const GridDensity& target,
                                          const FeatureBank& bank, double dt, double total_time,
                                          double log_every) {
  check_grids(p0, target);
  const GridDensity base_grid = grid_like(p0);
  const Eigen::MatrixXd phi = bank.feature_matrix(base_grid.cell_centers());
  const Eigen::MatrixXd ktilde = phi * phi.transpose() / static_cast<double>(bank.size());
  const double vol = base_grid.cell_volume();
  const Eigen::VectorXd target_masses = target.cell_masses();

  const int steps = static_cast<int>(std::llround(total_time / dt));
  const int stride = std::max(1, static_cast<int>(std::llround(log_every / dt)));
  const double guard = 1e3 * std::max(1.0, (p0.values - Eigen::Map<const Eigen::VectorXd>(
                                                            target.values.data(),
                                                            target_masses.size()))
                                               .norm());

  std::vector<MmdFlowSnapshot> out;
  Eigen::VectorXd p = p0.values;
  out.push_back({0.0, DensityIterate{p0.dim, p0.cells_per_axis, p}});
  for (int k = 1; k <= steps; ++k) {
    // K(P - P*) with the residual measure's cell masses
    const Eigen::VectorXd residual_masses = p * vol - target_masses;
    p -= dt * (ktilde * residual_masses);
    if (!p.allFinite() || p.norm() > guard) throw std::runtime_error("instability");
    if (k % stride == 0 || k == steps)
      out.push_back({k * dt, DensityIterate{p0.dim, p0.cells_per_axis, p}});
  }
  return out;
}

DensityIterate mmd_gan_closed_form(const DensityIterate& p0, const GridDensity& target,
                                   const FeatureBank& bank, double t) {
  check_grids(p0, target);
  const GridDensity base_grid = grid_like(p0);
  const Eigen::MatrixXd phi = bank.feature_matrix(base_grid.cell_centers());
  const Eigen::MatrixXd ktilde = phi * phi.transpose() / static_cast<double>(bank.size());
  const double vol = base_grid.cell_volume();
  // Uniform cell volume makes M = Ktilde * vol symmetric, so its plain
  // eigenvectors diagonalize the flow.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ktilde * vol);
  const Eigen::VectorXd lambda = es.eigenvalues();
  const Eigen::MatrixXd q = es.eigenvectors();
  const Eigen::VectorXd target_values =
      Eigen::Map<const Eigen::VectorXd>(target.values.data(), p0.values.size());
  const Eigen::VectorXd c0 = q.transpose() * (p0.values - target_values);
  Eigen::VectorXd ct(c0.size());
  for (int i = 0; i < c0.size(); ++i)
    ct[i] = c0[i] * std::exp(-std::max(lambda[i], 0.0) * t);
  DensityIterate out{p0.dim, p0.cells_per_axis, target_values + q * ct};
  return out;
}

GridDensity project_simplex(const DensityIterate& p) {
  GridDensity g = grid_like(p);
  const double vol = g.cell_volume();
  const int n = static_cast<int>(p.values.size());
  // Threshold theta with sum_i vol * max(p_i - theta, 0) = 1: water-filling
  // on the sorted densities.
  std::vector<double> sorted(p.values.data(), p.values.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (int k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0 / vol) / (k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0)
      theta = candidate;
    else
      break;
  }
  for (int i = 0; i < n; ++i) g.values[static_cast<std::size_t>(i)] = std::max(p.values[i] - theta, 0.0);
  return g;
}

double mmd2_iterate(const DensityIterate& p, const GridDensity& target, const FeatureBank& bank) {
  check_grids(p, target);
  const GridDensity base_grid = grid_like(p);
  Quadrature qa{base_grid.cell_centers(), p.values * base_grid.cell_volume()};
  return mmd2(qa, quadrature_of(target), bank);
}

TrajectoryLog mmd_gan_experiment(const GridDensity& target, int n, const FeatureBank& bank,
                                 const MmdExperimentConfig& config, std::uint64_t seed) {
  const GridDensity start = uniform_grid(target.dim, target.cells_per_axis);
  const Eigen::MatrixXd centers = start.cell_centers();
  const Eigen::MatrixXd phi = bank.feature_matrix(centers);
  const double m = static_cast<double>(bank.size());
  const Eigen::MatrixXd ktilde = phi * phi.transpose() / m;
  const double vol = start.cell_volume();
  const Eigen::VectorXd target_masses = target.cell_masses();

  // Empirical operator term (1/n) sum_k k(x_i, x_k), evaluated exactly.
  const ParticleMeasure samples = sample(target, n, seed);
  const Eigen::VectorXd sample_embedding =
      bank.feature_matrix(samples.points).transpose() * samples.weights;
  const Eigen::VectorXd empirical_term = phi * sample_embedding / m;

  const int steps = static_cast<int>(std::llround(config.total_time / config.dt));
  const int stride =
      std::max(1, static_cast<int>(std::llround(config.log_every / config.dt)));

  TrajectoryLog log({"t", "mmd2", "w2", "w2_empirical"});
  Eigen::VectorXd p = iterate_from(start).values;
  Eigen::VectorXd p_emp = p;

  const auto record = [&](double t) {
    const DensityIterate it{target.dim, target.cells_per_axis, p};
    const DensityIterate it_emp{target.dim, target.cells_per_axis, p_emp};
    const double mmd = mmd2_iterate(it, target, bank);
    const double w2 = w2_1d(target, project_simplex(it));
    const double w2_emp = w2_1d(target, project_simplex(it_emp));
    log.append(std::array<double, 4>{t, mmd, w2, w2_emp});
  };

  record(0.0);
  for (int k = 1; k <= steps; ++k) {
    p -= config.dt * (ktilde * (p * vol - target_masses));
    p_emp -= config.dt * (ktilde * (p_emp * vol) - empirical_term);
    if (!p.allFinite() || !p_emp.allFinite()) throw std::runtime_error("instability");
    if (k % stride == 0 || k == steps) record(k * config.dt);
  }
  return log;
}

}  // namespace distlab
