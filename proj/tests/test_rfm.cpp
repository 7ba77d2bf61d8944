#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "distlab/rfm.hpp"

using namespace distlab;

TEST_CASE("l1_sphere features sit on the l1 unit sphere") {
  const FeatureBank bank = draw_bank(2, 500, Activation::relu, FeatureLaw::l1_sphere, 4);
  for (int j = 0; j < bank.size(); ++j) {
    const double radius = bank.w.row(j).cwiseAbs().sum() + std::abs(bank.b[j]);
    CHECK(radius == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gaussian feature law has unit second moment") {
  const FeatureBank bank = draw_bank(3, 100000, Activation::sigmoid, FeatureLaw::gaussian, 4);
  double second = 0.0;
  for (int j = 0; j < bank.size(); ++j)
    second += bank.w.row(j).squaredNorm() + bank.b[j] * bank.b[j];
  second /= bank.size();
  CHECK(second == doctest::Approx(1.0).epsilon(0.02));
  CHECK(second <= 1.05);
}

TEST_CASE("bank draws are deterministic in the seed") {
  const FeatureBank a = draw_bank(2, 64, Activation::relu, FeatureLaw::l1_sphere, 12);
  const FeatureBank b = draw_bank(2, 64, Activation::relu, FeatureLaw::l1_sphere, 12);
  CHECK((a.w - b.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.b - b.b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero coefficients evaluate to zero") {
  const RfmFunction f = zero_function(
      draw_bank(2, 32, Activation::sigmoid, FeatureLaw::gaussian, 1), 3);
  Eigen::VectorXd x(2);
  x << 0.3, -0.4;
  CHECK(f.evaluate(x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.parameter_norm() == 0.0);
}

TEST_CASE("single sigmoid feature evaluates in closed form") {
  FeatureBank bank;
  bank.d_in = 1;
  bank.activation = Activation::sigmoid;
  bank.law = FeatureLaw::gaussian;
  bank.w = Eigen::MatrixXd::Zero(1, 1);
  bank.b = Eigen::VectorXd::Constant(1, 1.0);
  RfmFunction f{bank, Eigen::MatrixXd::Constant(1, 1, 1.0)};
  Eigen::VectorXd x(1);
  x << 0.77;
  CHECK(f.evaluate(x)[0] == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-15));
}

TEST_CASE("evaluate matches a direct summation oracle") {
  const FeatureBank bank = draw_bank(2, 200, Activation::relu, FeatureLaw::l1_sphere, 5);
  Philox rng(77);
  RfmFunction f{bank, {}};
  f.coeffs.resize(bank.size(), 2);
  for (int j = 0; j < bank.size(); ++j)
    for (int k = 0; k < 2; ++k) f.coeffs(j, k) = rng.normal();
  Eigen::VectorXd x(2);
  x << rng.normal(), rng.normal();

  Eigen::VectorXd direct = Eigen::VectorXd::Zero(2);
  for (int j = 0; j < bank.size(); ++j) {
    const double z = bank.w.row(j).dot(x) + bank.b[j];
    direct += f.coeffs.row(j).transpose() * std::max(z, 0.0);
  }
  direct /= bank.size();
  CHECK((f.evaluate(x) - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel symmetry and positivity") {
  const FeatureBank bank = draw_bank(2, 300, Activation::relu, FeatureLaw::l1_sphere, 6);
  Philox rng(8);
  Eigen::MatrixXd pts(10, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 2; ++j) pts(i, j) = rng.normal();
  Eigen::MatrixXd gram(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      gram(i, j) = kernel(bank, pts.row(i).transpose(), pts.row(j).transpose());
  CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < 10; ++i) CHECK(gram(i, i) >= 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("gram operator on a two-cell grid with a constant kernel") {
  FeatureBank bank;
  bank.d_in = 1;
  bank.activation = Activation::sigmoid;
  bank.law = FeatureLaw::gaussian;
  bank.w = Eigen::MatrixXd::Zero(1, 1);
  bank.b = Eigen::VectorXd::Constant(1, 1.0);
  const double c = std::pow(std::exp(1.0) / (1.0 + std::exp(1.0)), 2);
  const GridDensity grid = uniform_grid(1, 2);
  const Eigen::MatrixXd k = gram_operator(bank, quadrature_of(grid));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(k(i, j) == doctest::Approx(c / 2.0).epsilon(1e-14));
}

TEST_CASE("gram operator applied to one gives the kernel mean embedding") {
  const FeatureBank bank = draw_bank(1, 400, Activation::relu, FeatureLaw::l1_sphere, 9);
  const GridDensity grid = uniform_grid(1, 16);
  const Quadrature q = quadrature_of(grid);
  const Eigen::MatrixXd k = gram_operator(bank, q);
  const Eigen::VectorXd image = k * Eigen::VectorXd::Ones(16);
  for (int i = 0; i < 16; ++i) {
    double embedding = 0.0;
    for (int j = 0; j < 16; ++j)
      embedding += kernel(bank, q.points.row(i).transpose(), q.points.row(j).transpose()) *
                   q.masses[j];
    CHECK(image[i] == doctest::Approx(embedding).epsilon(1e-12));
  }
}

TEST_CASE("gram eigenvalues are real and nonnegative") {
  const FeatureBank bank = draw_bank(1, 512, Activation::relu, FeatureLaw::l1_sphere, 10);
  const Eigen::VectorXd eigs = gram_eigenvalues(bank, quadrature_of(uniform_grid(1, 32)));
  CHECK(eigs.minCoeff() >= -1e-10);
}

TEST_CASE("parameter norm homogeneity") {
  const FeatureBank bank = draw_bank(1, 50, Activation::relu, FeatureLaw::l1_sphere, 11);
  RfmFunction f{bank, Eigen::MatrixXd::Constant(50, 1, 1.0)};
  CHECK(f.parameter_norm() == doctest::Approx(1.0).epsilon(1e-14));
  f.coeffs *= -3.5;
  CHECK(f.parameter_norm() == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("gradient step leaves f unchanged on a zero gradient") {
  const FeatureBank bank = draw_bank(1, 64, Activation::relu, FeatureLaw::l1_sphere, 13);
  RfmFunction f{bank, Eigen::MatrixXd::Constant(64, 1, 0.5)};
  const auto zero_grad = [](const Eigen::MatrixXd& pts) {
    return Eigen::MatrixXd::Zero(pts.rows(), 1).eval();
  };
  const RfmFunction g = gradient_step(f, zero_grad, quadrature_of(uniform_grid(1, 8)), 0.1);
  CHECK((g.coeffs - f.coeffs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient step shrinks the L2 norm on the quadratic loss") {
  const FeatureBank bank = draw_bank(1, 256, Activation::relu, FeatureLaw::l1_sphere, 14);
  const GridDensity grid = uniform_grid(1, 32);
  const Quadrature q = quadrature_of(grid);
  Philox rng(14);
  RfmFunction f{bank, {}};
  f.coeffs.resize(bank.size(), 1);
  for (int j = 0; j < bank.size(); ++j) f.coeffs(j, 0) = rng.normal();

  const auto l2norm = [&](const RfmFunction& h) {
    const Eigen::VectorXd values = h.evaluate_many(q.points).col(0);
    return std::sqrt(values.array().square().matrix().dot(q.masses));
  };
  // grad of L = (1/2)|f|^2 at the support points is f itself
  const auto grad = [&](const Eigen::MatrixXd& pts) { return f.evaluate_many(pts); };
  const RfmFunction g = gradient_step(f, grad, q, 0.5);
  CHECK(l2norm(g) < l2norm(f));
}

TEST_CASE("halved steps quarter the splitting error on a quadratic loss") {
  const FeatureBank bank = draw_bank(1, 128, Activation::relu, FeatureLaw::l1_sphere, 15);
  const Quadrature q = quadrature_of(uniform_grid(1, 16));
  Philox rng(15);
  RfmFunction f0{bank, {}};
  f0.coeffs.resize(bank.size(), 1);
  for (int j = 0; j < bank.size(); ++j) f0.coeffs(j, 0) = rng.normal();

  const auto advance = [&](double dt, int steps) {
    RfmFunction f = f0;
    for (int s = 0; s < steps; ++s) {
      const auto grad = [&](const Eigen::MatrixXd& pts) { return f.evaluate_many(pts); };
      f = gradient_step(f, grad, q, dt);
    }
    return f;
  };
  const auto gap = [&](double dt) {
    const RfmFunction one = advance(dt, 1);
    RfmFunction two = advance(dt / 2.0, 2);
    return (one.coeffs - two.coeffs).cwiseAbs().maxCoeff();
  };
  const double g1 = gap(0.8), g2 = gap(0.4);
  CHECK(g1 / g2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("gradient step rejects non-finite gradients") {
  const FeatureBank bank = draw_bank(1, 16, Activation::relu, FeatureLaw::l1_sphere, 16);
  RfmFunction f = zero_function(bank, 1);
  const auto bad = [](const Eigen::MatrixXd& pts) {
    return Eigen::MatrixXd::Constant(pts.rows(), 1,
                                     std::numeric_limits<double>::quiet_NaN())
        .eval();
  };
  CHECK_THROWS_WITH_AS(gradient_step(f, bad, quadrature_of(uniform_grid(1, 4)), 0.1),
                       "diverged", std::runtime_error);
}

TEST_CASE("kernel values are Cauchy in the feature count") {
  Eigen::VectorXd x(1), y(1);
  x << 0.3;
  y << 0.8;
  // successive differences stay inside the shrinking 3/sqrt(m) envelope
  double prev = 0.0;
  std::vector<int> ms = {1024, 2048, 4096};
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const FeatureBank bank = draw_bank(1, ms[i], Activation::relu, FeatureLaw::l1_sphere, 17);
    const double k = kernel(bank, x, y);
    if (i > 0) CHECK(std::abs(k - prev) <= 3.0 / std::sqrt(static_cast<double>(ms[i - 1])));
    prev = k;
  }
}

TEST_CASE("euler gradient flow follows the spectral closed form") {
  // kernel regression on a 32-cell grid: per-mode solution
  // c_i(t) = (1 - e^{-lambda_i t}) c*_i in the Gram eigenbasis
  const int cells = 32, m = 2048;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 18);
  const GridDensity grid = uniform_grid(1, cells);
  const Quadrature q = quadrature_of(grid);

  Philox rng(18);
  RfmFunction target{bank, {}};
  target.coeffs.resize(m, 1);
  for (int j = 0; j < m; ++j) target.coeffs(j, 0) = rng.normal();
  target.coeffs /= target.parameter_norm();
  const Eigen::VectorXd f_star = target.evaluate_many(q.points).col(0);

  const Eigen::MatrixXd phi = bank.feature_matrix(q.points);
  const Eigen::MatrixXd ktilde = phi * phi.transpose() / m;
  const Eigen::VectorXd sqrt_mass = q.masses.cwiseSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      Eigen::MatrixXd(sqrt_mass.asDiagonal() * ktilde * sqrt_mass.asDiagonal()));
  const Eigen::VectorXd lambda = es.eigenvalues();
  const Eigen::MatrixXd qv = es.eigenvectors();
  const Eigen::VectorXd c_star = qv.transpose() * (sqrt_mass.asDiagonal() * f_star);

  const auto closed_form = [&](double t) {
    Eigen::VectorXd coef(cells);
    for (int i = 0; i < cells; ++i)
      coef[i] = (1.0 - std::exp(-std::max(lambda[i], 0.0) * t)) * c_star[i];
    return Eigen::VectorXd(sqrt_mass.cwiseInverse().asDiagonal() * (qv * coef));
  };

  const double dt = 1e-3;
  RfmFunction f = zero_function(bank, 1);
  double t = 0.0;
  double max_tl = 0.0;
  for (int step = 1; step <= 10000; ++step) {
    const Eigen::MatrixXd residual = f.evaluate_many(q.points) - f_star;
    gradient_step_inplace(f.coeffs, phi, residual, q.masses, dt);
    t = step * dt;
    if (step % 1000 == 0) {
      const Eigen::VectorXd diff = f.evaluate_many(q.points).col(0) - f_star;
      const double loss = 0.5 * diff.array().square().matrix().dot(q.masses);
      if (t >= 1.0) max_tl = std::max(max_tl, t * loss);
    }
    if (std::abs(t - 1.0) < 1e-12 || std::abs(t - 10.0) < 1e-12) {
      const Eigen::VectorXd exact = closed_form(t);
      const double linf =
          (f.evaluate_many(q.points).col(0) - exact).cwiseAbs().maxCoeff();
      CHECK(linf <= 1e-4);
    }
  }
  CHECK(max_tl <= 0.5 * 1.05);  // t L(f_t) <= |f*|_H^2 / 2 with 5% slack
}
