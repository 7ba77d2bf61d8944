// Probability measures on R^d (d = 1 or 2): piecewise-constant grid densities
// on [0,1]^d, weighted particle sets, and diagonal Gaussians.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "distlab/rng.hpp"

namespace distlab {

// Density values on a regular grid of half-open cells over [0,1]^dim.
// values[i] is a density; the mass of cell i is values[i] * cell_volume().
// 2-D cells are indexed row-major: index = ix * cells_per_axis + iy.
struct GridDensity {
  int dim = 1;
  int cells_per_axis = 1;
  std::vector<double> values;

  int num_cells() const;
  double cell_volume() const;
  double total_mass() const;
  Eigen::VectorXd cell_center(int index) const;
  Eigen::MatrixXd cell_centers() const;  // num_cells x dim
  Eigen::VectorXd cell_masses() const;
};

GridDensity uniform_grid(int dim, int cells_per_axis);
GridDensity normalize(const GridDensity& g);  // throws on all-zero input

struct ParticleMeasure {
  Eigen::MatrixXd points;   // n x d
  Eigen::VectorXd weights;  // nonnegative, sums to 1

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

ParticleMeasure equal_weight_particles(Eigen::MatrixXd points);

struct GaussianMeasure {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // diagonal covariance, entries > 0

  int dim() const { return static_cast<int>(mean.size()); }
};

GaussianMeasure standard_gaussian(int dim);

ParticleMeasure sample(const GridDensity& g, int n, std::uint64_t seed);
ParticleMeasure sample(const GaussianMeasure& g, int n, std::uint64_t seed);

using PointMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

ParticleMeasure pushforward_empirical(const GaussianMeasure& base, const PointMap& map, int n,
                                      std::uint64_t seed);
ParticleMeasure pushforward_empirical(const GridDensity& base, const PointMap& map, int n,
                                      std::uint64_t seed);

// CSV: grid rows are `cell_index,value`; particle rows are `x0[,x1],weight`.
void write_csv(const GridDensity& g, std::ostream& out);
void write_csv(const ParticleMeasure& p, std::ostream& out);
GridDensity read_grid_csv(std::istream& in, int dim, int cells_per_axis);
ParticleMeasure read_particles_csv(std::istream& in, int dim);

}  // namespace distlab
