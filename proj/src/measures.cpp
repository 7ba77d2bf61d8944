#include "distlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace distlab {

int GridDensity::num_cells() const {
  int n = 1;
  for (int k = 0; k < dim; ++k) n *= cells_per_axis;
  return n;
}

double GridDensity::cell_volume() const {
  return 1.0 / static_cast<double>(num_cells());
}

double GridDensity::total_mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell_volume();
}

Eigen::VectorXd GridDensity::cell_center(int index) const {
  Eigen::VectorXd x(dim);
  const double h = 1.0 / cells_per_axis;
  if (dim == 1) {
    x[0] = (index + 0.5) * h;
  } else {
    x[0] = (index / cells_per_axis + 0.5) * h;
    x[1] = (index % cells_per_axis + 0.5) * h;
  }
  return x;
}

Eigen::MatrixXd GridDensity::cell_centers() const {
  Eigen::MatrixXd pts(num_cells(), dim);
  for (int i = 0; i < num_cells(); ++i) pts.row(i) = cell_center(i).transpose();
  return pts;
}

Eigen::VectorXd GridDensity::cell_masses() const {
  const double vol = cell_volume();
  Eigen::VectorXd m(num_cells());
  for (int i = 0; i < num_cells(); ++i) m[i] = values[i] * vol;
  return m;
}

GridDensity uniform_grid(int dim, int cells_per_axis) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dim must be 1 or 2");
  GridDensity g;
  g.dim = dim;
  g.cells_per_axis = cells_per_axis;
  g.values.assign(static_cast<std::size_t>(g.num_cells()), 1.0);
  return g;
}

GridDensity normalize(const GridDensity& g) {
  double mass = g.total_mass();
  if (!(mass > 0.0)) throw std::domain_error("degenerate density");
  GridDensity out = g;
  for (double& v : out.values) v /= mass;
  return out;
}

ParticleMeasure equal_weight_particles(Eigen::MatrixXd points) {
  ParticleMeasure p;
  p.weights = Eigen::VectorXd::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
  p.points = std::move(points);
  return p;
}

GaussianMeasure standard_gaussian(int dim) {
  GaussianMeasure g;
  g.mean = Eigen::VectorXd::Zero(dim);
  g.variance = Eigen::VectorXd::Ones(dim);
  return g;
}

ParticleMeasure sample(const GridDensity& g, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const int cells = g.num_cells();
  std::vector<double> cdf(cells);
  double acc = 0.0;
  for (int i = 0; i < cells; ++i) {
    acc += g.values[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw std::domain_error("degenerate density");
  for (double& c : cdf) c /= acc;

  Philox rng(seed);
  const double h = 1.0 / g.cells_per_axis;
  Eigen::MatrixXd pts(n, g.dim);
  for (int k = 0; k < n; ++k) {
    const double u = rng.next_double();
    const int cell = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const Eigen::VectorXd c = g.cell_center(std::min(cell, cells - 1));
    for (int j = 0; j < g.dim; ++j) pts(k, j) = c[j] + (rng.next_double() - 0.5) * h;
  }
  return equal_weight_particles(std::move(pts));
}

ParticleMeasure sample(const GaussianMeasure& g, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Philox rng(seed);
  const int d = g.dim();
  Eigen::MatrixXd pts(n, d);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < d; ++j) pts(k, j) = g.mean[j] + std::sqrt(g.variance[j]) * rng.normal();
  return equal_weight_particles(std::move(pts));
}

namespace {

ParticleMeasure apply_map(ParticleMeasure base, const PointMap& map) {
  for (int k = 0; k < base.size(); ++k) {
    const Eigen::VectorXd y = map(base.points.row(k).transpose());
    base.points.row(k) = y.transpose();
  }
  return base;
}

}  // namespace

ParticleMeasure pushforward_empirical(const GaussianMeasure& base, const PointMap& map, int n,
                                      std::uint64_t seed) {
  return apply_map(sample(base, n, seed), map);
}

ParticleMeasure pushforward_empirical(const GridDensity& base, const PointMap& map, int n,
                                      std::uint64_t seed) {
  return apply_map(sample(base, n, seed), map);
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_csv(const GridDensity& g, std::ostream& out) {
  out << "cell_index,value\n";
  for (int i = 0; i < g.num_cells(); ++i) {
    out << i << ',';
    write_value(out, g.values[i]);
    out << '\n';
  }
}

void write_csv(const ParticleMeasure& p, std::ostream& out) {
  if (p.dim() == 1)
    out << "x0,weight\n";
  else
    out << "x0,x1,weight\n";
  for (int k = 0; k < p.size(); ++k) {
    for (int j = 0; j < p.dim(); ++j) {
      write_value(out, p.points(k, j));
      out << ',';
    }
    write_value(out, p.weights[k]);
    out << '\n';
  }
}

GridDensity read_grid_csv(std::istream& in, int dim, int cells_per_axis) {
  GridDensity g;
  g.dim = dim;
  g.cells_per_axis = cells_per_axis;
  g.values.assign(static_cast<std::size_t>(g.num_cells()), 0.0);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    const int idx = std::stoi(field);
    std::getline(row, field, ',');
    g.values.at(static_cast<std::size_t>(idx)) = std::stod(field);
  }
  return g;
}

ParticleMeasure read_particles_csv(std::istream& in, int dim) {
  std::vector<double> flat;
  std::vector<double> weights;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    for (int j = 0; j < dim; ++j) {
      std::getline(row, field, ',');
      flat.push_back(std::stod(field));
    }
    std::getline(row, field, ',');
    weights.push_back(std::stod(field));
  }
  ParticleMeasure p;
  const int n = static_cast<int>(weights.size());
  p.points.resize(n, dim);
  p.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < dim; ++j) p.points(k, j) = flat[static_cast<std::size_t>(k) * dim + j];
    p.weights[k] = weights[static_cast<std::size_t>(k)];
  }
  return p;
}

}  // namespace distlab
