#include "distlab/rfm.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace distlab {
namespace {

inline double activate(Activation act, double z) {
  if (act == Activation::relu) return z > 0.0 ? z : 0.0;
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

Eigen::MatrixXd FeatureBank::feature_matrix(const Eigen::MatrixXd& points) const {
  if (points.cols() != d_in) throw std::invalid_argument("feature_matrix: dimension mismatch");
  Eigen::MatrixXd phi = points * w.transpose();  // n x m
  phi.rowwise() += b.transpose();
  if (activation == Activation::relu)
    phi = phi.cwiseMax(0.0);
  else
    phi = (1.0 + (-phi.array()).exp()).inverse().matrix();
  return phi;
}

Eigen::VectorXd FeatureBank::feature_vector(const Eigen::VectorXd& x) const {
  if (x.size() != d_in) throw std::invalid_argument("feature_vector: dimension mismatch");
  Eigen::VectorXd z = w * x + b;
  for (int j = 0; j < z.size(); ++j) z[j] = activate(activation, z[j]);
  return z;
}

FeatureBank draw_bank(int d_in, int m, Activation activation, FeatureLaw law, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("draw_bank: m must be >= 1");
  FeatureBank bank;
  bank.d_in = d_in;
  bank.activation = activation;
  bank.law = law;
  bank.w.resize(m, d_in);
  bank.b.resize(m);
  Philox rng(seed);
  if (law == FeatureLaw::l1_sphere) {
    // Exponential spacings give a uniform point on the simplex; random signs
    // spread it over the whole l1 sphere of R^(d_in+1).
    for (int j = 0; j < m; ++j) {
      double total = 0.0;
      Eigen::VectorXd e(d_in + 1);
      for (int i = 0; i <= d_in; ++i) {
        e[i] = -std::log(rng.next_double() + 0x1.0p-54);
        total += e[i];
      }
      for (int i = 0; i <= d_in; ++i) {
        const double sign = (rng.next_u32() & 1u) ? 1.0 : -1.0;
        e[i] = sign * e[i] / total;
      }
      bank.w.row(j) = e.head(d_in).transpose();
      bank.b[j] = e[d_in];
    }
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in + 1));
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < d_in; ++i) bank.w(j, i) = scale * rng.normal();
      bank.b[j] = scale * rng.normal();
    }
  }
  return bank;
}

double kernel(const FeatureBank& bank, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd fx = bank.feature_vector(x);
  const Eigen::VectorXd fy = bank.feature_vector(y);
  return fx.dot(fy) / static_cast<double>(bank.size());
}

Quadrature quadrature_of(const GridDensity& g) {
  return Quadrature{g.cell_centers(), g.cell_masses()};
}

Quadrature quadrature_of(const ParticleMeasure& p) { return Quadrature{p.points, p.weights}; }

Eigen::MatrixXd gram_operator(const FeatureBank& bank, const Quadrature& support) {
  if (support.points.rows() == 0) throw std::invalid_argument("gram_operator: empty support");
  const Eigen::MatrixXd phi = bank.feature_matrix(support.points);
  Eigen::MatrixXd k = phi * phi.transpose() / static_cast<double>(bank.size());
  return k * support.masses.asDiagonal();
}

Eigen::VectorXd gram_eigenvalues(const FeatureBank& bank, const Quadrature& support) {
  const Eigen::MatrixXd phi = bank.feature_matrix(support.points);
  const Eigen::MatrixXd ktilde = phi * phi.transpose() / static_cast<double>(bank.size());
  const Eigen::VectorXd s = support.masses.cwiseSqrt();
  const Eigen::MatrixXd sym = s.asDiagonal() * ktilde * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::VectorXd RfmFunction::evaluate(const Eigen::VectorXd& x) const {
  return coeffs.transpose() * bank.feature_vector(x) / static_cast<double>(bank.size());
}

Eigen::MatrixXd RfmFunction::evaluate_many(const Eigen::MatrixXd& points) const {
  return bank.feature_matrix(points) * coeffs / static_cast<double>(bank.size());
}

double RfmFunction::parameter_norm() const {
  return coeffs.norm() / std::sqrt(static_cast<double>(bank.size()));
}

RfmFunction zero_function(FeatureBank bank, int output_dim) {
  RfmFunction f;
  f.coeffs = Eigen::MatrixXd::Zero(bank.size(), output_dim);
  f.bank = std::move(bank);
  return f;
}

void gradient_step_inplace(Eigen::MatrixXd& coeffs, const Eigen::MatrixXd& phi,
                           const Eigen::MatrixXd& grad_values, const Eigen::VectorXd& masses,
                           double dt) {
  if (!grad_values.allFinite()) throw std::runtime_error("diverged");
  coeffs.noalias() -= dt * (phi.transpose() * (masses.asDiagonal() * grad_values));
}

RfmFunction gradient_step(const RfmFunction& f, const GradAtPoints& grad,
                          const Quadrature& support, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("gradient_step: dt must be > 0");
  RfmFunction out = f;
  const Eigen::MatrixXd phi = f.bank.feature_matrix(support.points);
  gradient_step_inplace(out.coeffs, phi, grad(support.points), support.masses, dt);
  return out;
}

Eigen::VectorXd TimeVelocityField::evaluate(const Eigen::VectorXd& x, double tau) const {
  Eigen::VectorXd z(x.size() + 1);
  z.head(x.size()) = x;
  z[x.size()] = tau;
  return inner.evaluate(z);
}

double TimeVelocityField::flow_norm() const { return std::exp(inner.parameter_norm()); }

namespace {

void write_value(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_bank_csv(const FeatureBank& bank, std::ostream& out) {
  out << "j";
  for (int i = 0; i < bank.d_in; ++i) out << ",w" << i;
  out << ",b\n";
  for (int j = 0; j < bank.size(); ++j) {
    out << j;
    for (int i = 0; i < bank.d_in; ++i) {
      out << ',';
      write_value(out, bank.w(j, i));
    }
    out << ',';
    write_value(out, bank.b[j]);
    out << '\n';
  }
}

void write_coeffs_csv(const Eigen::MatrixXd& coeffs, std::ostream& out) {
  out << "j";
  for (int i = 0; i < coeffs.cols(); ++i) out << ",a" << i;
  out << '\n';
  for (int j = 0; j < coeffs.rows(); ++j) {
    out << j;
    for (int i = 0; i < coeffs.cols(); ++i) {
      out << ',';
      write_value(out, coeffs(j, i));
    }
    out << '\n';
  }
}

}  // namespace distlab
