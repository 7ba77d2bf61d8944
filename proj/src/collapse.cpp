#include "distlab/collapse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace distlab {

Case1State case1_closed_form(double a0, double c, double t) {
  if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("case1: c in [0,1)");
  const double root = std::sqrt(1.0 - c * c);
  const double decay = std::exp(-0.5 * c * t);
  const double phase = 0.5 * root * t;
  Case1State s;
  s.a = 1.0 + (a0 - 1.0) * decay * (std::cos(phase) + c / root * std::sin(phase));
  s.b = (a0 - 1.0) / root * decay * std::sin(phase);
  return s;
}

Case1State case1_closed_form_rate(double a0, double c, double t) {
  const double root = std::sqrt(1.0 - c * c);
  const double decay = std::exp(-0.5 * c * t);
  const double phase = 0.5 * root * t;
  const double cosp = std::cos(phase), sinp = std::sin(phase);
  Case1State r;
  // d/dt of the closed form; collapses to -(a0-1)/(2 root) decay sin and the
  // matching cosine combination for b.
  r.a = (a0 - 1.0) * decay *
        (-0.5 * c * (cosp + c / root * sinp) + (-0.5 * root * sinp + 0.5 * c * cosp));
  r.b = (a0 - 1.0) / root * decay * (-0.5 * c * sinp + 0.5 * root * cosp);
  return r;
}

double case1_collapse_threshold(double c) {
  const double root = std::sqrt(1.0 - c * c);
  return 1.0 + std::exp(c * M_PI / root);
}

CollapseOutcome detect_collapse_case1(double a0, double c, double horizon) {
  if (!(a0 > 0.0)) throw std::invalid_argument("case1: a0 > 0");
  const double step = 1e-3;
  CollapseOutcome out;
  for (double t = 0.0; t <= horizon; t += step) {
    if (case1_closed_form(a0, c, t).a <= 0.0) {
      out.collapsed = true;
      out.t_collapse = t;
      return out;
    }
  }
  return out;
}

double case2_energy(double a, double b) {
  return 0.5 * b * b + 0.25 * (a * a - 1.0) - 0.5 * std::log(a);
}

std::optional<std::int64_t> Case2Result::first_step_below(double threshold) const {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] < threshold) return static_cast<std::int64_t>(k);
  return std::nullopt;
}

Case2Result case2_discrete(double a0, double b0, double c, double gamma,
                           std::int64_t max_steps) {
  if (!(a0 > 0.0)) throw std::invalid_argument("case2: a0 > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("case2: gamma > 0");
  Case2Result r;
  r.a.reserve(static_cast<std::size_t>(std::min<std::int64_t>(max_steps + 1, 1 << 21)));
  double a = a0, b = b0;
  for (std::int64_t k = 0; k <= max_steps; ++k) {
    r.a.push_back(a);
    r.b.push_back(b);
    r.energy.push_back(case2_energy(a, b));
    r.steps_run = k;
    if (a <= 1e-12) {  // mode collapse by numerical underflow
      r.collapsed = true;
      break;
    }
    if (k == max_steps) break;
    const double a_next = a - gamma * a * b / 3.0;
    const double b_next = b + gamma * ((a * a - 1.0) / 6.0 - c * b);
    a = a_next;
    b = b_next;
  }
  return r;
}

Rates case2_modified_ode(double a, double b, double c, double gamma) {
  if (!(a > 0.0)) throw std::invalid_argument("case2_modified_ode: a > 0");
  Rates r;
  r.da = -a * b / 3.0 +
         gamma * (-a * b * b / 18.0 + a * (a * a - 1.0) / 36.0 - c * a * b / 6.0);
  r.db = (a * a - 1.0) / 6.0 - c * b +
         gamma * (a * a * b / 18.0 + c * (a * a - 1.0) / 12.0 - c * c * b / 2.0);
  return r;
}

double case2_energy_rate(double a, double b, double c, double gamma) {
  return -c * b * b + gamma * ((a * a + 1.0) * b * b / 36.0 +
                               (a * a - 1.0) * (a * a - 1.0) / 72.0 - c * c * b * b / 2.0);
}

Case1State case2_modified_rk4_step(double a, double b, double c, double gamma) {
  const auto f = [&](double x, double y) { return case2_modified_ode(x, y, c, gamma); };
  const double h = gamma;
  const Rates k1 = f(a, b);
  const Rates k2 = f(a + 0.5 * h * k1.da, b + 0.5 * h * k1.db);
  const Rates k3 = f(a + 0.5 * h * k2.da, b + 0.5 * h * k2.db);
  const Rates k4 = f(a + h * k3.da, b + h * k3.db);
  Case1State out;
  out.a = a + h / 6.0 * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da);
  out.b = b + h / 6.0 * (k1.db + 2.0 * k2.db + 2.0 * k3.db + k4.db);
  return out;
}

Transport1DState make_transport_state(int nodes, const std::function<double(double)>& g0,
                                      GridDensity target) {
  if (target.dim != 1) throw std::invalid_argument("landscape target must be 1-D");
  Transport1DState s;
  s.g.resize(nodes);
  for (int i = 0; i < nodes; ++i) s.g[i] = g0((i + 0.5) / nodes);
  s.target = std::move(target);
  return s;
}

Eigen::VectorXd matched_block_means(const Transport1DState& state) {
  const int n = static_cast<int>(state.g.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return state.g[i] < state.g[j]; });

  const QuantileFunction target_q = QuantileFunction::from_grid(state.target);
  Eigen::VectorXd m(n);
  int start = 0;
  while (start < n) {
    // atoms: node-value clusters within 1e-9 share one quantile block
    int end = start + 1;
    while (end < n && state.g[order[end]] - state.g[order[start]] <= 1e-9) ++end;
    const double value =
        target_q.block_mean(static_cast<double>(start) / n, static_cast<double>(end) / n);
    for (int k = start; k < end; ++k) m[order[k]] = value;
    start = end;
  }
  return m;
}

Transport1DState landscape_state_at(const Transport1DState& init, double t) {
  const Eigen::VectorXd m0 = matched_block_means(init);
  Transport1DState out;
  out.g = std::exp(-t) * init.g + (1.0 - std::exp(-t)) * m0;
  if (!out.g.allFinite()) throw std::runtime_error("landscape: non-finite generator");
  out.target = init.target;
  return out;
}

ParticleMeasure pushforward_particles(const Transport1DState& state) {
  Eigen::MatrixXd pts(state.g.size(), 1);
  pts.col(0) = state.g;
  return equal_weight_particles(std::move(pts));
}

TrajectoryLog landscape_flow(const Transport1DState& init, double dt, double total_time) {
  if (!init.g.allFinite()) throw std::runtime_error("landscape: non-finite generator");
  const Eigen::VectorXd m0 = matched_block_means(init);
  TrajectoryLog log({"t", "w2"});
  const int steps = static_cast<int>(std::llround(total_time / dt));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    Transport1DState state;
    state.g = std::exp(-t) * init.g + (1.0 - std::exp(-t)) * m0;
    state.target = init.target;
    const double w2 = w2_1d(init.target, pushforward_particles(state));
    log.append(std::array<double, 2>{t, w2});
  }
  return log;
}

StationaryClass classify_stationary(const Transport1DState& state) {
  const Eigen::VectorXd m = matched_block_means(state);
  const int n = static_cast<int>(state.g.size());
  const double residual = std::sqrt((m - state.g).squaredNorm() / n);
  if (residual > 1e-9) return StationaryClass::not_stationary;

  std::vector<double> sorted(state.g.data(), state.g.data() + n);
  std::sort(sorted.begin(), sorted.end());
  int run = 1;
  std::size_t anchor = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - sorted[anchor] <= 1e-9) {
      if (++run >= 2) return StationaryClass::generalized_saddle;
    } else {
      anchor = i;
      run = 1;
    }
  }
  return StationaryClass::global_min;
}

}  // namespace distlab
