// Random feature function spaces: sampled feature banks, kernel and Gram
// quadrature operators, coefficient norms, and Euler gradient-flow steps.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include <Eigen/Core>

#include "distlab/measures.hpp"

namespace distlab {

enum class Activation { relu, sigmoid };
enum class FeatureLaw { l1_sphere, gaussian };

// m frozen first-layer features (w_j, b_j) drawn i.i.d. from the feature law.
struct FeatureBank {
  int d_in = 1;
  Activation activation = Activation::relu;
  FeatureLaw law = FeatureLaw::l1_sphere;
  Eigen::MatrixXd w;  // m x d_in
  Eigen::VectorXd b;  // m

  int size() const { return static_cast<int>(b.size()); }

  // Feature matrix sigma(w_j . x_i + b_j) for points given as rows; n x m.
  Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& points) const;
  Eigen::VectorXd feature_vector(const Eigen::VectorXd& x) const;
};

// l1_sphere: uniform direction on the l1 unit sphere of R^(d_in+1).
// gaussian: N(0, 1/(d_in+1)) entries, so E[|w|^2 + b^2] = 1.
FeatureBank draw_bank(int d_in, int m, Activation activation, FeatureLaw law, std::uint64_t seed);

double kernel(const FeatureBank& bank, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Quadrature support: evaluation points with their masses (grid cells use the
// cell centers and masses, particles use their locations and weights).
struct Quadrature {
  Eigen::MatrixXd points;  // n x d
  Eigen::VectorXd masses;  // n
};

Quadrature quadrature_of(const GridDensity& g);
Quadrature quadrature_of(const ParticleMeasure& p);

// Discretization of K(f)(x) = Int k(x,x') f(x') dP(x'):
//   K[i][j] = k(x_i, x_j) * mass_j.
Eigen::MatrixXd gram_operator(const FeatureBank& bank, const Quadrature& support);

// Eigenvalues of the Gram operator via its symmetrization
// diag(sqrt(mass)) Ktilde diag(sqrt(mass)); all real and >= 0 up to roundoff.
Eigen::VectorXd gram_eigenvalues(const FeatureBank& bank, const Quadrature& support);

// f(x) = (1/m) sum_j a_j sigma(w_j . x + b_j), coefficients a of shape m x k.
struct RfmFunction {
  FeatureBank bank;
  Eigen::MatrixXd coeffs;  // m x k

  int output_dim() const { return static_cast<int>(coeffs.cols()); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd evaluate_many(const Eigen::MatrixXd& points) const;  // n x k

  // sqrt((1/m) sum_j |a_j|^2); reported as the proxy for the RKHS norm.
  double parameter_norm() const;
};

RfmFunction zero_function(FeatureBank bank, int output_dim);

// One Euler step of continuous-time gradient descent:
//   a_j <- a_j - dt * Int grad_f L(x) sigma(w_j . x + b_j) dP(x)
// with the integral taken as a quadrature sum over the support.
// grad evaluates the loss gradient at the support points (n x k).
using GradAtPoints = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

RfmFunction gradient_step(const RfmFunction& f, const GradAtPoints& grad,
                          const Quadrature& support, double dt);

// Core update used by the trainers; phi is the precomputed feature matrix of
// the support points and grad_values their n x k loss gradient.
void gradient_step_inplace(Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& phi,
                           const Eigen::MatrixXd& grad_values, const Eigen::VectorXd& masses,
                           double dt);

// Velocity field on R^(d+1), last input coordinate is the flow time tau.
struct TimeVelocityField {
  RfmFunction inner;

  int space_dim() const { return inner.bank.d_in - 1; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double tau) const;
  double flow_norm() const;  // exp(parameter_norm)
};

// CSV replay format: features as `j,w...,b`, coefficients as `j,a...`.
void write_bank_csv(const FeatureBank& bank, std::ostream& out);
void write_coeffs_csv(const Eigen::MatrixXd& coeffs, std::ostream& out);

}  // namespace distlab
