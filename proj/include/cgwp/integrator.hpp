#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgwp/constraints.hpp"
#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/tdvp.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

struct IntegratorConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  double dt_init = 1e-3;
  double dt_min = 1e-12;
  double dt_max = 1.0;
  /// Absolute tolerance on Im gamma - bound when localizing an activation.
  double tol_event = 1e-10;
  double cond_max = kDefaultCondMax;
  double t_end = 1.0;
  double record_stride = 0.1;
  std::vector<double> checkpoint_times;
  std::size_t m_max = kDefaultMaxActive;
  /// Release threshold on df/dt at the unconstrained minimum.
  double tol_rel = 0.0;
  /// Integrate width factors (B, C) instead of A directly.
  bool use_width_factors = true;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  /// Last accepted step size chosen by the controller (not shortened to hit
  /// an output time).
  double dt_used = 0.0;
  std::size_t active_count = 0;
  double cond_estimate = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  cplx autocorrelation{};
  std::vector<double> gamma_imag;
  std::string event;  ///< empty, or e.g. "activate amplitude_lower gwp=3"
};

/// One accepted step.
struct StepLog {
  double t;   ///< time at the end of the step
  double dt;  ///< size of the step
  std::size_t active_count;
  bool shortened;  ///< cut short to reach an output time or an activation event
};

struct Transition {
  double t;
  bool activated;
  Constraint constraint;
};

struct Trajectory {
  std::vector<StepRecord> records;
  std::vector<StepLog> steps;
  std::vector<Transition> transitions;
  std::vector<std::pair<double, WavePacket>> checkpoints;
  std::optional<WavePacket> final_state;
  double t = 0.0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
};

/// Everything one right-hand-side evaluation produces.
struct DerivativeResult {
  ParameterDerivatives derivatives;
  CoefficientSet coeffs;
  double cond_estimate = 0.0;
  ConstraintRows rows;
  RVec lambda;
  RVec fdot_unconstrained;
};

/// assemble -> (constrained) solve -> coefficients_to_derivatives. When
/// `factors` is given the result also carries dB/dt and dC/dt.
DerivativeResult derivative(const WavePacket& wp, const std::vector<WidthFactors>* factors,
                            const PolynomialPotential& V, const ActiveSet& active,
                            double cond_max = kDefaultCondMax);

/// Adaptive Dormand-Prince 5(4) propagation of the packet parameters with
/// constraint switching. Fills `out` progressively, so a caller that catches
/// StepSizeUnderflow / IllConditioned / InvariantBroken still sees the
/// trajectory up to the failure.
void propagate(const WavePacket& wp0, const PolynomialPotential& V, const std::vector<ConstraintSpec>& specs,
               const IntegratorConfig& config, Trajectory& out);

Trajectory propagate(const WavePacket& wp0, const PolynomialPotential& V, const std::vector<ConstraintSpec>& specs,
                     const IntegratorConfig& config);

/// 2 pi / omega with omega^2 the smallest Hessian eigenvalue at the
/// potential minimum (unit mass). Throws NoMinimum when there is none.
double classical_period(const PolynomialPotential& V);

}  // namespace cgwp
