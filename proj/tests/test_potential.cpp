#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "distlab/potential.hpp"

using namespace distlab;

namespace {

// bank whose two features span {x, constants} exactly on [0,1):
// relu(1*x + 0) = x and relu(0*x + 0.5) = 0.5
FeatureBank line_and_constant_bank() {
  FeatureBank bank;
  bank.d_in = 1;
  bank.activation = Activation::relu;
  bank.law = FeatureLaw::l1_sphere;
  bank.w.resize(2, 1);
  bank.w << 1.0, 0.0;
  bank.b.resize(2);
  bank.b << 0.0, 0.5;
  return bank;
}

}  // namespace

TEST_CASE("zero potential reproduces the base") {
  const GridDensity base = uniform_grid(1, 16);
  const RfmFunction v = zero_function(line_and_constant_bank(), 1);
  const GridDensity p = density_of(v, base);
  for (double x : p.values) CHECK(x == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("constant potentials are shift invariant") {
  const GridDensity base = uniform_grid(1, 16);
  RfmFunction v{line_and_constant_bank(), Eigen::MatrixXd::Zero(2, 1)};
  v.coeffs(1, 0) = 6.0;  // V = (1/2) * 6 * 0.5 = 1.5 everywhere
  const GridDensity p = density_of(v, base);
  for (double x : p.values) CHECK(x == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(bp_loss(v, BpTarget{base}, base) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("linear potential tilts a two-cell grid as exp(-x)") {
  const GridDensity base = uniform_grid(1, 2);
  RfmFunction v{line_and_constant_bank(), Eigen::MatrixXd::Zero(2, 1)};
  v.coeffs(0, 0) = 2.0;  // V(x) = (1/2) * 2 * x = x
  const GridDensity p = density_of(v, base);
  const double ratio = p.values[0] / p.values[1];
  CHECK(ratio == doctest::Approx(std::exp(-0.25) / std::exp(-0.75)).epsilon(1e-12));
  CHECK(p.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shifting cached potential values leaves the density unchanged") {
  const GridDensity base = uniform_grid(1, 32);
  Philox rng(3);
  Eigen::VectorXd v(32);
  for (int i = 0; i < 32; ++i) v[i] = rng.normal();
  const GridDensity a = density_from_values(v, base);
  const GridDensity b = density_from_values(v.array() + 17.5, base);
  for (int i = 0; i < 32; ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("bp loss vanishes for the zero potential and matches the kl identity") {
  const int cells = 64, m = 512;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 21);
  const GridDensity base = uniform_grid(1, cells);
  const RfmFunction zero = zero_function(bank, 1);
  CHECK(bp_loss(zero, BpTarget{base}, base) == doctest::Approx(0.0).epsilon(1e-13));

  // L(V) - L(V*) = KL(P* || P_V) when P* is generated by V*
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);
  Philox rng(22);
  RfmFunction v{bank, {}};
  v.coeffs.resize(m, 1);
  for (int j = 0; j < m; ++j) v.coeffs(j, 0) = 0.3 * rng.normal();
  const double gap = bp_loss(v, BpTarget{target}, base) - bp_loss(v_star, BpTarget{target}, base);
  const double kl_value = kl(target, density_of(v, base)).value;
  CHECK(gap == doctest::Approx(kl_value).epsilon(1e-10));
}

TEST_CASE("gradient field vanishes at the optimum and integrates to zero") {
  const FeatureBank bank = draw_bank(1, 256, Activation::relu, FeatureLaw::l1_sphere, 23);
  const GridDensity base = uniform_grid(1, 32);
  const RfmFunction v = plant_potential(bank, base, 0.7);
  const GridDensity pv = density_of(v, base);

  const Eigen::VectorXd at_optimum = bp_grad_field(v, pv, base);
  CHECK(at_optimum.cwiseAbs().maxCoeff() < 1e-12);

  const RfmFunction v_star = plant_potential(bank, base, 1.3);
  const GridDensity target = density_of(v_star, base);
  const Eigen::VectorXd field = bp_grad_field(v, target, base);
  CHECK(std::abs(field.sum() * base.cell_volume()) < 1e-12);
}

TEST_CASE("assembled coefficient gradient matches finite differences") {
  const int cells = 32, m = 128;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 24);
  const GridDensity base = uniform_grid(1, cells);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);

  Philox rng(25);
  RfmFunction v{bank, {}};
  v.coeffs.resize(m, 1);
  for (int j = 0; j < m; ++j) v.coeffs(j, 0) = 0.5 * rng.normal();

  // Euclidean coefficient gradient of the loss is (<sigma_j,P*> - <sigma_j,P_V>)/m
  const Quadrature q = quadrature_of(base);
  const Eigen::MatrixXd phi = bank.feature_matrix(q.points);
  const GridDensity pv = density_of(v, base);
  const Eigen::VectorXd grad =
      (phi.transpose() * quadrature_of(target).masses -
       phi.transpose() * quadrature_of(pv).masses) /
      m;

  Eigen::VectorXd direction(m);
  for (int j = 0; j < m; ++j) direction[j] = rng.normal();
  direction.normalize();
  const double eps = 1e-6;
  RfmFunction vp = v, vm = v;
  vp.coeffs += eps * direction;
  vm.coeffs -= eps * direction;
  const double fd = (bp_loss(vp, BpTarget{target}, base) - bp_loss(vm, BpTarget{target}, base)) /
                    (2.0 * eps);
  const double analytic = grad.dot(direction);
  CHECK(std::abs(fd - analytic) / std::abs(analytic) < 1e-5);
}

TEST_CASE("training on the base target stays at zero") {
  const FeatureBank bank = draw_bank(1, 128, Activation::relu, FeatureLaw::l1_sphere, 26);
  const GridDensity base = uniform_grid(1, 32);
  BpTrainConfig cfg;
  cfg.dt = 0.5;
  cfg.total_time = 10.0;
  cfg.log_every = 1.0;
  const BpRunResult run = train_bp(BpTarget{base}, base, bank, cfg);
  for (int r = 0; r < run.log.rows(); ++r) {
    CHECK(run.log.at(r, 3) == 0.0);  // param_norm
    CHECK(std::abs(run.log.at(r, 2)) < 1e-13);
  }
}

TEST_CASE("population loss decreases monotonically and obeys the rate bound") {
  const int cells = 64, m = 1024;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 27);
  const GridDensity base = uniform_grid(1, cells);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);

  BpTrainConfig cfg;
  cfg.dt = 0.05;
  cfg.total_time = 50.0;
  cfg.log_every = 1.0;
  const BpRunResult run = train_bp(BpTarget{target}, base, bank, cfg);
  CHECK_FALSE(run.diverged);
  for (int r = 1; r < run.log.rows(); ++r)
    CHECK(run.log.at(r, 1) <= run.log.at(r - 1, 1) + 1e-10);
  for (int r = 0; r < run.log.rows(); ++r) {
    const double t = run.log.at(r, 0);
    if (t >= 1.0) CHECK(run.log.at(r, 2) <= 1.10 / (2.0 * t));
  }
}

TEST_CASE("empirical target produces a u-shaped kl curve") {
  const int cells = 64, m = 1024;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 28);
  const GridDensity base = uniform_grid(1, cells);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);
  const ParticleMeasure samples = sample(target, 100, 29);

  BpTrainConfig cfg;
  cfg.dt = 0.1;
  cfg.total_time = 600.0;
  cfg.log_every = 2.0;
  cfg.reference = target;
  const BpRunResult run = train_bp(BpTarget{samples}, base, bank, cfg);
  double kl_min = 1e18, t_star = 0.0;
  for (int r = 0; r < run.log.rows(); ++r)
    if (run.log.at(r, 2) < kl_min) {
      kl_min = run.log.at(r, 2);
      t_star = run.log.at(r, 0);
    }
  const double kl_final = run.log.at(run.log.rows() - 1, 2);
  CHECK(t_star > 0.0);
  CHECK(t_star < 600.0);
  CHECK(kl_final > kl_min);
}

TEST_CASE("ivanov projection caps the parameter norm") {
  const FeatureBank bank = draw_bank(1, 256, Activation::relu, FeatureLaw::l1_sphere, 30);
  const GridDensity base = uniform_grid(1, 32);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);
  const ParticleMeasure samples = sample(target, 200, 31);

  BpRegularization reg;
  reg.mode = BpRegularization::Mode::ivanov;
  reg.radius = 0.8;
  BpTrainConfig cfg;
  cfg.dt = 0.1;
  cfg.total_time = 200.0;
  cfg.log_every = 1.0;
  cfg.reference = target;
  const BpRunResult run = train_bp_regularized(samples, base, bank, reg, cfg);
  for (int r = 0; r < run.log.rows(); ++r) CHECK(run.log.at(r, 3) <= reg.radius + 1e-12);
}

TEST_CASE("huge tikhonov strength pins the potential at zero") {
  const FeatureBank bank = draw_bank(1, 128, Activation::relu, FeatureLaw::l1_sphere, 32);
  const GridDensity base = uniform_grid(1, 32);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);
  const ParticleMeasure samples = sample(target, 100, 33);

  BpRegularization reg;
  reg.mode = BpRegularization::Mode::tikhonov;
  reg.lambda = 1e6;
  BpTrainConfig cfg;
  cfg.dt = 0.01;
  cfg.total_time = 20.0;
  cfg.log_every = 1.0;
  cfg.reference = target;
  const BpRunResult run = train_bp_regularized(samples, base, bank, reg, cfg);
  const double kl_base = kl(target, base).value;
  CHECK(run.log.at(run.log.rows() - 1, 3) < 0.05);
  CHECK(run.log.at(run.log.rows() - 1, 2) == doctest::Approx(kl_base).epsilon(0.05));
}

TEST_CASE("ivanov at a generous radius beats the unregularized endpoint") {
  const int cells = 64, m = 1024;
  const FeatureBank bank = draw_bank(1, m, Activation::relu, FeatureLaw::l1_sphere, 34);
  const GridDensity base = uniform_grid(1, cells);
  const RfmFunction v_star = plant_potential(bank, base, 1.0);
  const GridDensity target = density_of(v_star, base);
  const ParticleMeasure samples = sample(target, 800, 35);

  BpTrainConfig cfg;
  cfg.dt = 0.1;
  cfg.total_time = 800.0;
  cfg.log_every = 4.0;
  cfg.reference = target;
  const BpRunResult plain = train_bp(BpTarget{samples}, base, bank, cfg);

  BpRegularization reg;
  reg.mode = BpRegularization::Mode::ivanov;
  reg.radius = 1.0;  // R >= |a*|
  const BpRunResult capped = train_bp_regularized(samples, base, bank, reg, cfg);
  CHECK(capped.log.at(capped.log.rows() - 1, 2) < plain.log.at(plain.log.rows() - 1, 2));
}
