// Simplified GAN: density-valued generator iterate, RKHS-ball discriminator,
// linear gradient-flow dynamics dP/dt = -K(P - P*), simplex projection.
#pragma once

#include <cstdint>
#include <vector>

#include "distlab/metrics.hpp"
#include "distlab/rfm.hpp"
#include "distlab/trajectory.hpp"

namespace distlab {

// Density values on the target's grid; lives in L^2, entries may be negative.
struct DensityIterate {
  int dim = 1;
  int cells_per_axis = 1;
  Eigen::VectorXd values;
};

DensityIterate iterate_from(const GridDensity& g);

struct MmdFlowSnapshot {
  double t = 0.0;
  DensityIterate state;
};

// Euler integration of dP/dt = -K(P - P*); snapshots at multiples of
// log_every (t = 0 included). Throws "instability" on norm blow-up.
std::vector<MmdFlowSnapshot> mmd_gan_flow(const DensityIterate& p0, const GridDensity& target,
                                          const FeatureBank& bank, double dt, double total_time,
                                          double log_every);

// Spectral closed form P_t = P* + sum_i e^{-lambda_i t} <P0 - P*, phi_i> phi_i
// from the eigendecomposition of the Gram quadrature operator.
DensityIterate mmd_gan_closed_form(const DensityIterate& p0, const GridDensity& target,
                                   const FeatureBank& bank, double t);

// Mass-weighted L2 projection onto {values >= 0, sum values * vol = 1}.
GridDensity project_simplex(const DensityIterate& p);

// Squared MMD between a (possibly signed) iterate and the target density.
double mmd2_iterate(const DensityIterate& p, const GridDensity& target, const FeatureBank& bank);

struct MmdExperimentConfig {
  double dt = 0.01;
  double total_time = 1000.0;
  double log_every = 1.0;
};

// Population and empirical flows from the uniform initialization; logs
// t, mmd2 (population), w2 = W2(P*, proj(P_t)), w2_empirical likewise for the
// flow trained on n samples of the target.
TrajectoryLog mmd_gan_experiment(const GridDensity& target, int n, const FeatureBank& bank,
                                 const MmdExperimentConfig& config, std::uint64_t seed);

}  // namespace distlab
