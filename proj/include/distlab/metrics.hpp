// Divergences and transport metrics used as test errors.
#pragma once

#include <vector>

#include "distlab/measures.hpp"
#include "distlab/rfm.hpp"

namespace distlab {

struct KlResult {
  double value = 0.0;
  bool support_ok = true;  // false when q vanishes where p does not
};

// KL(p||q) between densities on the same grid, convention 0 log 0 = 0.
KlResult kl(const GridDensity& p, const GridDensity& q);

// Piecewise-linear inverse CDF of a 1-D measure; exact for step CDFs.
// Segments partition (0,1]; within one, the quantile is linear in u.
class QuantileFunction {
 public:
  struct Segment {
    double u_lo, u_hi;  // cumulative-probability range
    double x_lo, x_hi;  // quantile values at the range endpoints
  };

  static QuantileFunction from_grid(const GridDensity& g);
  static QuantileFunction from_particles(const ParticleMeasure& p);

  const std::vector<Segment>& segments() const { return segments_; }
  double value(double u) const;
  // Mean of the quantile function over [u_lo, u_hi] (conditional mean of the
  // measure restricted to that quantile block).
  double block_mean(double u_lo, double u_hi) const;

 private:
  std::vector<Segment> segments_;
};

// Exact 2-Wasserstein distance in one dimension by quantile coupling.
double w2_1d(const QuantileFunction& a, const QuantileFunction& b);
double w2_1d(const GridDensity& a, const GridDensity& b);
double w2_1d(const ParticleMeasure& a, const ParticleMeasure& b);
double w2_1d(const GridDensity& a, const ParticleMeasure& b);
double w2_1d(const ParticleMeasure& a, const GridDensity& b);

// Exact W2 between equal-weight particle sets of equal size n <= 64, solved
// as an assignment problem on squared Euclidean cost.
double w2_exact_small(const ParticleMeasure& a, const ParticleMeasure& b);

// Squared MMD (1/2) Int Int k d(a-b) d(a-b), computed through the feature
// embedding of the bank; exact reordering of the double sum.
double mmd2(const Quadrature& a, const Quadrature& b, const FeatureBank& bank);
double mmd2(const GridDensity& a, const GridDensity& b, const FeatureBank& bank);
double mmd2(const ParticleMeasure& a, const ParticleMeasure& b, const FeatureBank& bank);

}  // namespace distlab
