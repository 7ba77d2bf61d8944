// Bias-potential density model: P_V = e^{-V} base / Z with V a random
// feature function, trained by gradient flow on  Int V dP* + ln Int e^{-V} dbase.
#pragma once

#include <optional>
#include <variant>

#include "distlab/metrics.hpp"
#include "distlab/rfm.hpp"
#include "distlab/trajectory.hpp"

namespace distlab {

using BpTarget = std::variant<GridDensity, ParticleMeasure>;

struct BoltzmannState {
  RfmFunction potential;  // d -> 1
  GridDensity base;
  GridDensity density;  // cached P_V
};

// Normalized e^{-V} base, overflow-safe via max subtraction.
GridDensity density_of(const RfmFunction& potential, const GridDensity& base);
GridDensity density_from_values(const Eigen::VectorXd& potential_values, const GridDensity& base);

double bp_loss(const RfmFunction& potential, const BpTarget& target, const GridDensity& base);

// Density of the functional gradient of the loss, x -> P*(x) - P_V(x) on the
// grid; consumed by gradient_step with support = base. Grid targets only.
Eigen::VectorXd bp_grad_field(const RfmFunction& potential, const GridDensity& target,
                              const GridDensity& base);

struct BpTrainConfig {
  double dt = 0.05;
  double total_time = 100.0;
  double log_every = 1.0;
  // Population grid density used as the test reference for KL; for grid
  // targets it defaults to the target itself.
  std::optional<GridDensity> reference;
};

struct BpRegularization {
  enum class Mode { none, ivanov, tikhonov };
  Mode mode = Mode::none;
  double radius = 0.0;    // Ivanov: parameter-norm cap R
  double lambda = 0.0;    // Tikhonov: strength of (lambda/sqrt(n)) |a|
};

struct BpRunResult {
  TrajectoryLog log;  // columns: t, loss, kl, param_norm
  RfmFunction potential;
  bool diverged = false;
};

// Gradient flow from a = 0; logs t, bp_loss, KL(reference || P_t) and the
// parameter norm at the logging cadence. Aborts with partial log on
// non-finite loss.
BpRunResult train_bp(const BpTarget& target, const GridDensity& base, const FeatureBank& bank,
                     const BpTrainConfig& config);

BpRunResult train_bp_regularized(const ParticleMeasure& target, const GridDensity& base,
                                 const FeatureBank& bank, const BpRegularization& reg,
                                 const BpTrainConfig& config);

// Planted potential of the given parameter norm, exactly in the sampled
// feature space: coefficients follow the top centered-kernel eigenfunction
// over the base, the largest-variance potential at that norm.
RfmFunction plant_potential(const FeatureBank& bank, const GridDensity& base,
                            double param_norm);

}  // namespace distlab
