#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "distlab/mmd_gan.hpp"

using namespace distlab;

namespace {

GridDensity bump_target(int cells) {
  GridDensity g = uniform_grid(1, cells);
  for (int i = 0; i < cells; ++i) {
    const double x = (i + 0.5) / cells;
    g.values[static_cast<std::size_t>(i)] = 0.3 + std::exp(-18.0 * (x - 0.4) * (x - 0.4));
  }
  return normalize(g);
}

}  // namespace

TEST_CASE("flow started at the target never moves") {
  const int cells = 16;
  const GridDensity target = bump_target(cells);
  const FeatureBank bank = draw_bank(1, 512, Activation::relu, FeatureLaw::l1_sphere, 71);
  const auto snaps = mmd_gan_flow(iterate_from(target), target, bank, 0.05, 5.0, 1.0);
  for (const auto& s : snaps)
    for (int i = 0; i < cells; ++i)
      CHECK(s.state.values[i] == doctest::Approx(target.values[i]).epsilon(1e-12));
}

TEST_CASE("euler flow tracks the spectral closed form") {
  const int cells = 16;
  const GridDensity target = bump_target(cells);
  const FeatureBank bank = draw_bank(1, 1024, Activation::relu, FeatureLaw::l1_sphere, 72);
  const DensityIterate p0 = iterate_from(uniform_grid(1, cells));
  const auto snaps = mmd_gan_flow(p0, target, bank, 1e-3, 10.0, 1.0);
  for (const double t : {1.0, 10.0}) {
    const DensityIterate exact = mmd_gan_closed_form(p0, target, bank, t);
    for (const auto& s : snaps)
      if (std::abs(s.t - t) < 1e-9)
        CHECK((s.state.values - exact.values).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("residual decays no slower than the smallest eigenvalue rate") {
  const int cells = 8;
  const GridDensity target = bump_target(cells);
  const FeatureBank bank = draw_bank(1, 4096, Activation::relu, FeatureLaw::l1_sphere, 73);
  const DensityIterate p0 = iterate_from(uniform_grid(1, cells));
  const Eigen::VectorXd lambda = gram_eigenvalues(bank, quadrature_of(uniform_grid(1, cells)));
  const double lambda_min = lambda.minCoeff();

  const Eigen::VectorXd target_values =
      Eigen::Map<const Eigen::VectorXd>(target.values.data(), cells);
  const double r0 = (p0.values - target_values).norm();
  const auto snaps = mmd_gan_flow(p0, target, bank, 1e-3, 50.0, 50.0);
  const double rt = (snaps.back().state.values - target_values).norm();
  CHECK(rt <= std::exp(-lambda_min * 50.0) * r0 * (1.0 + 1e-6));
}

TEST_CASE("project_simplex leaves valid densities untouched") {
  const GridDensity g = bump_target(32);
  const GridDensity p = project_simplex(iterate_from(g));
  for (int i = 0; i < 32; ++i) CHECK(p.values[i] == doctest::Approx(g.values[i]).epsilon(1e-12));
}

TEST_CASE("project_simplex reproduces the two-cell hand computation") {
  DensityIterate it{1, 2, Eigen::Vector2d(3.0, 1.0)};
  const GridDensity p = project_simplex(it);
  CHECK(p.values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.values[1] == doctest::Approx(0.0));
}

TEST_CASE("project_simplex output is a density and locally optimal") {
  Philox rng(74);
  for (int rep = 0; rep < 20; ++rep) {
    const int cells = 16;
    DensityIterate it{1, cells, {}};
    it.values.resize(cells);
    for (int i = 0; i < cells; ++i) it.values[i] = 3.0 * rng.normal();
    const GridDensity p = project_simplex(it);
    const double vol = p.cell_volume();

    double mass = 0.0;
    for (int i = 0; i < cells; ++i) {
      CHECK(p.values[i] >= 0.0);
      mass += p.values[i] * vol;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

    // mass-preserving pairwise perturbations cannot get closer to the input
    const auto dist2 = [&](const std::vector<double>& v) {
      double acc = 0.0;
      for (int i = 0; i < cells; ++i)
        acc += (v[i] - it.values[i]) * (v[i] - it.values[i]) * vol;
      return acc;
    };
    const double base_dist = dist2(p.values);
    for (int trial = 0; trial < 30; ++trial) {
      const int i = static_cast<int>(rng.next_u32() % cells);
      const int j = static_cast<int>(rng.next_u32() % cells);
      if (i == j) continue;
      const double eps = 1e-4;
      std::vector<double> v = p.values;
      if (v[i] < eps) continue;  // keep feasibility
      v[i] -= eps;
      v[j] += eps;
      CHECK(dist2(v) >= base_dist - 1e-12);
    }
  }
}

TEST_CASE("projection is 1-lipschitz in the mass-weighted norm") {
  Philox rng(75);
  const int cells = 24;
  const double vol = 1.0 / cells;
  for (int rep = 0; rep < 20; ++rep) {
    DensityIterate a{1, cells, {}}, b{1, cells, {}};
    a.values.resize(cells);
    b.values.resize(cells);
    for (int i = 0; i < cells; ++i) {
      a.values[i] = 2.0 * rng.normal();
      b.values[i] = 2.0 * rng.normal();
    }
    const GridDensity pa = project_simplex(a);
    const GridDensity pb = project_simplex(b);
    double in2 = 0.0, out2 = 0.0;
    for (int i = 0; i < cells; ++i) {
      in2 += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]) * vol;
      out2 += (pa.values[i] - pb.values[i]) * (pa.values[i] - pb.values[i]) * vol;
    }
    CHECK(out2 <= in2 + 1e-12);
  }
}

TEST_CASE("population mmd2 is a lyapunov function of the experiment flow") {
  const GridDensity target = bump_target(32);
  const FeatureBank bank = draw_bank(1, 1024, Activation::relu, FeatureLaw::l1_sphere, 76);
  MmdExperimentConfig cfg;
  cfg.dt = 0.05;
  cfg.total_time = 100.0;
  cfg.log_every = 1.0;
  const TrajectoryLog log = mmd_gan_experiment(target, 50, bank, cfg, 77);
  for (int r = 1; r < log.rows(); ++r) CHECK(log.at(r, 1) <= log.at(r - 1, 1) + 1e-12);
}

TEST_CASE("unstable step size is reported") {
  const int cells = 8;
  const GridDensity target = bump_target(cells);
  const FeatureBank bank = draw_bank(1, 256, Activation::relu, FeatureLaw::l1_sphere, 78);
  const DensityIterate p0 = iterate_from(uniform_grid(1, cells));
  CHECK_THROWS_WITH_AS(mmd_gan_flow(p0, target, bank, 500.0, 50000.0, 1000.0), "instability",
                       std::runtime_error);
}
