#include "distlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace distlab {

KlResult kl(const GridDensity& p, const GridDensity& q) {
  if (p.dim != q.dim || p.cells_per_axis != q.cells_per_axis)
    throw std::invalid_argument("kl: grids must match");
  const double vol = p.cell_volume();
  KlResult r;
  for (int i = 0; i < p.num_cells(); ++i) {
    const double pi = p.values[i];
    if (pi <= 0.0) continue;  // 0 log 0 = 0
    const double qi = q.values[i];
    if (qi <= 0.0) {
      r.value = std::numeric_limits<double>::infinity();
      r.support_ok = false;
      return r;
    }
    r.value += pi * vol * std::log(pi / qi);
  }
  return r;
}

QuantileFunction QuantileFunction::from_grid(const GridDensity& g) {
  if (g.dim != 1) throw std::invalid_argument("quantile function requires d = 1");
  const double mass_total = g.total_mass();
  if (!(mass_total > 0.0)) throw std::domain_error("degenerate density");
  QuantileFunction q;
  const double h = 1.0 / g.cells_per_axis;
  double u = 0.0;
  for (int i = 0; i < g.num_cells(); ++i) {
    const double m = g.values[i] * g.cell_volume() / mass_total;
    if (m <= 0.0) continue;
    q.segments_.push_back({u, u + m, i * h, (i + 1) * h});
    u += m;
  }
  q.segments_.back().u_hi = 1.0;
  return q;
}

QuantileFunction QuantileFunction::from_particles(const ParticleMeasure& p) {
  if (p.dim() != 1) throw std::invalid_argument("quantile function requires d = 1");
  std::vector<int> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return p.points(a, 0) < p.points(b, 0); });
  QuantileFunction q;
  double u = 0.0;
  for (int idx : order) {
    const double m = p.weights[idx];
    if (m <= 0.0) continue;
    const double x = p.points(idx, 0);
    q.segments_.push_back({u, u + m, x, x});
    u += m;
  }
  if (q.segments_.empty()) throw std::domain_error("degenerate particle measure");
  q.segments_.back().u_hi = 1.0;
  return q;
}

namespace {

inline double seg_value(const QuantileFunction::Segment& s, double u) {
  if (s.u_hi <= s.u_lo) return s.x_lo;
  const double t = (u - s.u_lo) / (s.u_hi - s.u_lo);
  return s.x_lo + (s.x_hi - s.x_lo) * t;
}

}  // namespace

double QuantileFunction::value(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  for (const auto& s : segments_)
    if (u <= s.u_hi) return seg_value(s, std::max(u, s.u_lo));
  return segments_.back().x_hi;
}

double QuantileFunction::block_mean(double u_lo, double u_hi) const {
  if (!(u_hi > u_lo)) throw std::invalid_argument("block_mean: empty block");
  double integral = 0.0;
  for (const auto& s : segments_) {
    const double a = std::max(u_lo, s.u_lo);
    const double b = std::min(u_hi, s.u_hi);
    if (b <= a) continue;
    integral += (b - a) * 0.5 * (seg_value(s, a) + seg_value(s, b));
  }
  return integral / (u_hi - u_lo);
}

double w2_1d(const QuantileFunction& a, const QuantileFunction& b) {
  // Merge-sweep over both segment lists; on each piece both quantiles are
  // linear in u, so the squared difference integrates exactly.
  const auto& sa = a.segments();
  const auto& sb = b.segments();
  std::size_t ia = 0, ib = 0;
  double u = 0.0;
  double total = 0.0;
  while (ia < sa.size() && ib < sb.size()) {
    const auto& pa = sa[ia];
    const auto& pb = sb[ib];
    const double u1 = std::min(pa.u_hi, pb.u_hi);
    if (u1 > u) {
      const double d0 = seg_value(pa, u) - seg_value(pb, u);
      const double d1 = seg_value(pa, u1) - seg_value(pb, u1);
      total += (u1 - u) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
      u = u1;
    }
    if (pa.u_hi <= u1) ++ia;
    if (pb.u_hi <= u1) ++ib;
  }
  return std::sqrt(std::max(total, 0.0));
}

double w2_1d(const GridDensity& a, const GridDensity& b) {
  return w2_1d(QuantileFunction::from_grid(a), QuantileFunction::from_grid(b));
}
double w2_1d(const ParticleMeasure& a, const ParticleMeasure& b) {
  return w2_1d(QuantileFunction::from_particles(a), QuantileFunction::from_particles(b));
}
double w2_1d(const GridDensity& a, const ParticleMeasure& b) {
  return w2_1d(QuantileFunction::from_grid(a), QuantileFunction::from_particles(b));
}
double w2_1d(const ParticleMeasure& a, const GridDensity& b) {
  return w2_1d(QuantileFunction::from_particles(a), QuantileFunction::from_grid(b));
}

namespace {

// Hungarian algorithm with potentials, O(n^3); returns the minimal total cost.
double assignment_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
  return total;
}

}  // namespace

double w2_exact_small(const ParticleMeasure& a, const ParticleMeasure& b) {
  const int n = a.size();
  if (n != b.size()) throw std::invalid_argument("w2_exact_small: sizes must match");
  if (n > 64) throw std::invalid_argument("w2_exact_small: size cap 64 exceeded");
  const double wa = a.weights.minCoeff(), wb = b.weights.minCoeff();
  if (std::abs(wa - 1.0 / n) > 1e-12 || std::abs(wb - 1.0 / n) > 1e-12 ||
      std::abs(a.weights.maxCoeff() - 1.0 / n) > 1e-12 ||
      std::abs(b.weights.maxCoeff() - 1.0 / n) > 1e-12)
    throw std::invalid_argument("w2_exact_small: equal weights required");
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = (a.points.row(i) - b.points.row(j)).squaredNorm();
  return std::sqrt(std::max(assignment_cost(cost) / n, 0.0));
}

double mmd2(const Quadrature& a, const Quadrature& b, const FeatureBank& bank) {
  if (a.points.cols() != b.points.cols())
    throw std::invalid_argument("mmd2: dimension mismatch");
  const Eigen::VectorXd ea = bank.feature_matrix(a.points).transpose() * a.masses;
  const Eigen::VectorXd eb = bank.feature_matrix(b.points).transpose() * b.masses;
  return 0.5 * (ea - eb).squaredNorm() / static_cast<double>(bank.size());
}

double mmd2(const GridDensity& a, const GridDensity& b, const FeatureBank& bank) {
  return mmd2(quadrature_of(a), quadrature_of(b), bank);
}
double mmd2(const ParticleMeasure& a, const ParticleMeasure& b, const FeatureBank& bank) {
  return mmd2(quadrature_of(a), quadrature_of(b), bank);
}

}  // namespace distlab
