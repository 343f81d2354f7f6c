#include "cgwp/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cgwp/errors.hpp"
#include "cgwp/observables.hpp"

namespace cgwp {

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0 && atol > 0.0 && tol_event > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max))
    throw ConfigError("step sizes must satisfy 0 < dt_min <= dt_init <= dt_max");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (!(record_stride > 0.0)) throw ConfigError("record_stride must be positive");
  if (!(cond_max > 1.0)) throw ConfigError("cond_max must exceed 1");
  if (tol_rel < 0.0) throw ConfigError("tol_rel must be non-negative");
}

DerivativeResult derivative(const WavePacket& wp, const std::vector<WidthFactors>* factors,
                            const PolynomialPotential& V, const ActiveSet& active, double cond_max) {
  const MomentSystem sys = assemble_system(wp, V);
  // Frozen widths pin whole coefficients, so they are eliminated before
  // factoring rather than carried through the Lagrange block.
  PinnedSplit split = split_pinned(constraint_rows(wp, active), active);
  const FactoredSystem fs(sys, split.pinned, cond_max);
  DerivativeResult out;
  out.rows = std::move(split.rows);
  ConstrainedSolution sol = solve_constrained(fs, out.rows);
  out.cond_estimate = fs.cond_estimate();
  out.derivatives = coefficients_to_derivatives(wp, sol.coeffs);
  if (factors) {
    const auto wf = width_factor_derivatives(sol.coeffs, *factors);
    for (std::size_t k = 0; k < wf.size(); ++k) {
      out.derivatives[k].C_dot = wf[k].first;
      out.derivatives[k].B_dot = wf[k].second;
    }
  }
  out.coeffs = std::move(sol.coeffs);
  out.lambda = std::move(sol.lambda);
  out.fdot_unconstrained = std::move(sol.fdot_unconstrained);
  return out;
}

namespace {

using Index = Eigen::Index;

// Flat real state vector. Per packet: [B, C] or [A] as (Re, Im) column-major
// blocks, then p, q, Re gamma, Im gamma.
struct Layout {
  std::size_t n_gwp;
  std::size_t dim;
  bool factors;

  Index mat() const { return static_cast<Index>(2 * dim * dim); }
  Index block() const { return (factors ? 2 * mat() : mat()) + static_cast<Index>(2 * dim + 2); }
  Index size() const { return block() * static_cast<Index>(n_gwp); }
};

void put_matrix(RVec& y, Index off, const CMat& M) {
  const Index n = M.size();
  for (Index i = 0; i < n; ++i) {
    y[off + i] = M.data()[i].real();
    y[off + n + i] = M.data()[i].imag();
  }
}

CMat get_matrix(const RVec& y, Index off, std::size_t dim) {
  const auto D = static_cast<Index>(dim);
  CMat M(D, D);
  const Index n = D * D;
  for (Index i = 0; i < n; ++i) M.data()[i] = cplx(y[off + i], y[off + n + i]);
  return M;
}

RVec pack(const WavePacket& wp, const Layout& L) {
  RVec y(L.size());
  const auto D = static_cast<Index>(L.dim);
  for (std::size_t k = 0; k < L.n_gwp; ++k) {
    const auto& g = wp[k];
    Index off = static_cast<Index>(k) * L.block();
    if (L.factors) {
      const auto wf = WidthFactors::from_width(g.A());
      put_matrix(y, off, wf.B);
      put_matrix(y, off + L.mat(), wf.C);
      off += 2 * L.mat();
    } else {
      put_matrix(y, off, g.A());
      off += L.mat();
    }
    y.segment(off, D) = g.p();
    y.segment(off + D, D) = g.q();
    y[off + 2 * D] = g.gamma().real();
    y[off + 2 * D + 1] = g.gamma().imag();
  }
  return y;
}

RVec pack_derivative(const ParameterDerivatives& d, const Layout& L) {
  RVec y(L.size());
  const auto D = static_cast<Index>(L.dim);
  for (std::size_t k = 0; k < L.n_gwp; ++k) {
    Index off = static_cast<Index>(k) * L.block();
    if (L.factors) {
      put_matrix(y, off, *d[k].B_dot);
      put_matrix(y, off + L.mat(), *d[k].C_dot);
      off += 2 * L.mat();
    } else {
      put_matrix(y, off, d[k].A_dot);
      off += L.mat();
    }
    y.segment(off, D) = d[k].p_dot;
    y.segment(off + D, D) = d[k].q_dot;
    y[off + 2 * D] = d[k].gamma_dot.real();
    y[off + 2 * D + 1] = d[k].gamma_dot.imag();
  }
  return y;
}

struct BadPacket {
  std::size_t gwp;
  std::string what;
};

struct Unpacked {
  std::vector<GaussianParams> gwps;
  std::vector<WidthFactors> factors;
};

// Throws BadPacket when a packet violates its invariants.
Unpacked unpack(const RVec& y, const Layout& L) {
  Unpacked u;
  const auto D = static_cast<Index>(L.dim);
  for (std::size_t k = 0; k < L.n_gwp; ++k) {
    Index off = static_cast<Index>(k) * L.block();
    try {
      CMat A;
      if (L.factors) {
        WidthFactors wf{get_matrix(y, off, L.dim), get_matrix(y, off + L.mat(), L.dim)};
        A = symmetrized(wf.width());
        u.factors.push_back(std::move(wf));
        off += 2 * L.mat();
      } else {
        A = symmetrized(get_matrix(y, off, L.dim));
        off += L.mat();
      }
      u.gwps.emplace_back(std::move(A), y.segment(off, D), y.segment(off + D, D),
                          cplx(y[off + 2 * D], y[off + 2 * D + 1]));
    } catch (const InvalidParameters& e) {
      throw BadPacket{k, e.what()};
    }
  }
  return u;
}

Index gamma_imag_slot(const Layout& L, std::size_t k) {
  return static_cast<Index>(k) * L.block() + L.block() - 1;
}

struct Evaluation {
  RVec dy;
  DerivativeResult info;
};

class Rhs {
 public:
  Rhs(const PolynomialPotential& V, const Layout& L, double cond_max, std::size_t& counter)
      : V_(V), L_(L), cond_max_(cond_max), counter_(counter) {}

  Evaluation operator()(const RVec& y, const ActiveSet& active) const {
    ++counter_;
    Unpacked u = unpack(y, L_);
    const WavePacket wp(std::move(u.gwps));
    Evaluation e;
    e.info = derivative(wp, L_.factors ? &u.factors : nullptr, V_, active, cond_max_);
    e.dy = pack_derivative(e.info.derivatives, L_);
    return e;
  }

 private:
  const PolynomialPotential& V_;
  const Layout& L_;
  double cond_max_;
  std::size_t& counter_;
};

// Dormand-Prince 5(4).
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr std::array<double, 7> kE{71.0 / 57600,      0.0, -71.0 / 16695, 71.0 / 1920,
                                   -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

struct StepAttempt {
  bool ok = false;
  RVec y1;
  double err = std::numeric_limits<double>::infinity();
};

// One DP5 step from (y, k1) with size h. Failures in stage evaluations
// (invalid intermediate packets, singular systems) mark the attempt as
// failed instead of aborting; the caller shrinks the step.
StepAttempt dp_step(const Rhs& f, const RVec& y, const RVec& k1, double h, const ActiveSet& active,
                    const IntegratorConfig& cfg, bool with_error) {
  std::array<RVec, 7> k;
  k[0] = k1;
  StepAttempt out;
  try {
    for (int s = 1; s < 6; ++s) {
      RVec ys = y;
      for (int j = 0; j < s; ++j)
        if (kA[s][j] != 0.0) ys += h * kA[s][j] * k[static_cast<std::size_t>(j)];
      k[static_cast<std::size_t>(s)] = f(ys, active).dy;
    }
    out.y1 = y;
    for (int j = 0; j < 6; ++j)
      if (kA[6][j] != 0.0) out.y1 += h * kA[6][j] * k[static_cast<std::size_t>(j)];
    if (!out.y1.allFinite()) return out;
    if (with_error) {
      k[6] = f(out.y1, active).dy;
      RVec e = RVec::Zero(y.size());
      for (std::size_t j = 0; j < 7; ++j)
        if (kE[j] != 0.0) e += h * kE[j] * k[j];
      const RVec scale = cfg.atol + cfg.rtol * y.cwiseAbs().cwiseMax(out.y1.cwiseAbs()).array();
      out.err = std::sqrt((e.array() / scale.array()).square().mean());
    } else {
      out.err = 0.0;
    }
    out.ok = std::isfinite(out.err);
  } catch (const BadPacket&) {
    out.ok = false;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

std::string describe(const Constraint& c, bool activated) {
  return std::string(activated ? "activate " : "release ") + to_string(c.kind) + " gwp=" + std::to_string(c.gwp);
}

}  // namespace

void propagate(const WavePacket& wp0, const PolynomialPotential& V, const std::vector<ConstraintSpec>& specs,
               const IntegratorConfig& cfg, Trajectory& out) {
  cfg.validate();
  if (V.dim() != wp0.dim()) throw InvalidParameters("potential and wave packet dimensions differ");
  const Layout L{wp0.size(), wp0.dim(), cfg.use_width_factors};
  const std::vector<Constraint> constraints = expand(specs, wp0.size());
  const Rhs f(V, L, cfg.cond_max, out.rhs_evaluations);

  ActiveSet active(cfg.m_max);
  double t = 0.0;
  RVec y = pack(wp0, L);

  auto current_packet = [&](const RVec& state) {
    try {
      return WavePacket(unpack(state, L).gwps);
    } catch (const BadPacket& b) {
      throw InvariantBroken(t, b.gwp, b.what);
    }
  };
  auto evaluate_base = [&]() {
    try {
      return f(y, active);
    } catch (IllConditioned& e) {
      e.set_time(t);
      throw;
    } catch (const BadPacket& b) {
      throw InvariantBroken(t, b.gwp, b.what);
    }
  };

  std::vector<std::size_t> checkpoints;  // indices into sorted times
  std::vector<double> checkpoint_times = cfg.checkpoint_times;
  std::sort(checkpoint_times.begin(), checkpoint_times.end());
  std::size_t next_checkpoint = 0;
  while (next_checkpoint < checkpoint_times.size() && checkpoint_times[next_checkpoint] < 0.0) ++next_checkpoint;
  std::size_t record_index = 0;

  double dt_used = cfg.dt_init;
  double cond = 0.0;
  std::string pending_event;

  auto record = [&](const WavePacket& wp) {
    StepRecord r;
    r.t = t;
    r.dt_used = dt_used;
    r.active_count = active.size();
    r.cond_estimate = cond;
    r.norm = norm(wp);
    r.energy = energy(wp, V);
    r.autocorrelation = autocorrelation(wp0, wp);
    for (const auto& g : wp) r.gamma_imag.push_back(g.gamma().imag());
    r.event = pending_event;
    pending_event.clear();
    out.records.push_back(std::move(r));
  };
  auto note = [&](const Constraint& c, bool activated) {
    out.transitions.push_back({t, activated, c});
    if (!pending_event.empty()) pending_event += "; ";
    pending_event += describe(c, activated);
  };

  // Deactivation first, then activation of anything sitting on its bound.
  // Entries activated at the current time are kept for at least one step and
  // entries released now are not re-activated before the next step.
  std::vector<Constraint> released_now;
  auto boundary_checks = [&](Evaluation& base) {
    released_now.clear();
    auto releasable = deactivation_check(base.info.rows, base.info.fdot_unconstrained, active, cfg.tol_rel);
    std::sort(releasable.rbegin(), releasable.rend());
    bool changed = false;
    for (std::size_t entry : releasable) {
      if (active.entries()[entry].since == t) continue;
      const Constraint c = active.entries()[entry].constraint;
      active.release(entry);
      released_now.push_back(c);
      note(c, false);
      changed = true;
    }
    const WavePacket wp = current_packet(y);
    for (const Constraint& c : activation_check(wp, constraints, active, 0.0)) {
      if (std::find(released_now.begin(), released_now.end(), c) != released_now.end()) continue;
      active.activate(c, t);
      note(c, true);
      changed = true;
    }
    if (changed) base = evaluate_base();
    cond = base.info.cond_estimate;
    return changed;
  };

  Evaluation base = evaluate_base();
  boundary_checks(base);
  record(current_packet(y));
  if (next_checkpoint < checkpoint_times.size() && checkpoint_times[next_checkpoint] == 0.0) {
    out.checkpoints.emplace_back(t, current_packet(y));
    ++next_checkpoint;
  }

  double h = cfg.dt_init;
  const double t_eps = 1e-13 * std::max(1.0, cfg.t_end);
  while (t < cfg.t_end - t_eps) {
    const double next_record = static_cast<double>(record_index + 1) * cfg.record_stride;
    double t_stop = std::min(cfg.t_end, next_record);
    if (next_checkpoint < checkpoint_times.size()) t_stop = std::min(t_stop, checkpoint_times[next_checkpoint]);

    h = std::min(h, cfg.dt_max);
    double h_try = h;
    bool shortened = false;
    if (t + h_try >= t_stop - t_eps) {
      shortened = (t_stop - t) < h_try;
      h_try = t_stop - t;
    }

    StepAttempt step = dp_step(f, y, base.dy, h_try, active, cfg, true);
    if (!step.ok || step.err > 1.0) {
      ++out.rejected_steps;
      const double fac = step.ok ? std::max(0.2, 0.9 * std::pow(step.err, -0.2)) : 0.25;
      h = h_try * fac;
      if (h < cfg.dt_min) throw StepSizeUnderflow(t, h);
      continue;
    }

    double h_next = h_try * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(step.err, 1e-10), -0.2)));
    if (shortened) h_next = std::max(h_next, h);
    double h_taken = h_try;
    bool landed = (t + h_try >= t_stop - t_eps);

    // Activation events inside the step.
    const WavePacket wp_end = current_packet(step.y1);
    std::vector<Constraint> crossing;
    for (const Constraint& c : constraints) {
      if (c.permanent() || active.contains(c)) continue;
      if (std::find(released_now.begin(), released_now.end(), c) != released_now.end()) continue;
      if (c.margin(wp_end) <= 0.0) crossing.push_back(c);
    }
    std::vector<Constraint> triggered;
    if (!crossing.empty()) {
      const WavePacket wp_start = current_packet(y);
      auto margin_after = [&](const Constraint& c, double s) {
        const StepAttempt a = dp_step(f, y, base.dy, s, active, cfg, false);
        if (!a.ok) throw StepSizeUnderflow(t, s);
        return c.margin(current_packet(a.y1));
      };
      double s_star = h_try;
      bool at_start = false;
      for (const Constraint& c : crossing) {
        double a = 0.0, fa = c.margin(wp_start);
        double b = h_try, fb = c.margin(wp_end);
        if (fa <= 0.0) {
          at_start = true;
          triggered.push_back(c);
          continue;
        }
        // Illinois variant of regula falsi on the re-integrated step.
        double s = b;
        int side = 0;
        for (int it = 0; it < 200 && std::abs(fb) > cfg.tol_event; ++it) {
          s = (a * fb - b * fa) / (fb - fa);
          if (!(s > a && s < b)) s = 0.5 * (a + b);
          const double fs = margin_after(c, s);
          if (std::abs(fs) <= cfg.tol_event) {
            b = s;
            fb = fs;
            break;
          }
          if (fs > 0.0) {
            a = s;
            fa = fs;
            if (side == -1) fb *= 0.5;
            side = -1;
          } else {
            b = s;
            fb = fs;
            if (side == 1) fa *= 0.5;
            side = 1;
          }
          if (b - a < 1e-15 * std::max(1.0, t)) break;
        }
        s = b;
        if (s < s_star - 1e-15) {
          s_star = s;
        }
      }
      if (at_start) {
        // Reached the bound exactly at a step boundary: switch on now and redo.
        for (const Constraint& c : triggered) {
          active.activate(c, t);
          note(c, true);
        }
        base = evaluate_base();
        cond = base.info.cond_estimate;
        record(current_packet(y));
        continue;
      }
      if (s_star < h_try) {
        const StepAttempt a = dp_step(f, y, base.dy, s_star, active, cfg, false);
        if (!a.ok) throw StepSizeUnderflow(t, s_star);
        step.y1 = a.y1;
        h_taken = s_star;
        shortened = true;
        landed = false;
      }
      const WavePacket wp_event = current_packet(step.y1);
      for (const Constraint& c : crossing) {
        if (c.margin(wp_event) <= cfg.tol_event) {
          triggered.push_back(c);
          step.y1[gamma_imag_slot(L, c.gwp)] = c.bound;
        }
      }
      h_next = std::max(h_next, h);
    }

    // Accept: advance, then renormalize the width factors and symmetrize A.
    t = landed ? t_stop : t + h_taken;
    y = pack(current_packet(step.y1), L);
    if (!shortened) dt_used = h_taken;
    out.steps.push_back({t, h_taken, active.size(), shortened});
    out.t = t;

    for (const Constraint& c : triggered) {
      active.activate(c, t);
      note(c, true);
    }
    base = evaluate_base();
    boundary_checks(base);

    const WavePacket wp = current_packet(y);
    const bool on_record = landed && std::abs(t - next_record) <= t_eps;
    if (on_record) ++record_index;
    if (on_record || !pending_event.empty()) record(wp);
    while (next_checkpoint < checkpoint_times.size() && checkpoint_times[next_checkpoint] <= t + t_eps) {
      out.checkpoints.emplace_back(t, wp);
      ++next_checkpoint;
    }
    // Step size cannot grow past what the controller allowed for the last
    // regular step when the previous one was cut short.
    h = h_next;
  }
  out.final_state = current_packet(y);
}

Trajectory propagate(const WavePacket& wp0, const PolynomialPotential& V, const std::vector<ConstraintSpec>& specs,
                     const IntegratorConfig& config) {
  Trajectory out;
  propagate(wp0, V, specs, config, out);
  return out;
}

double classical_period(const PolynomialPotential& V) {
  const auto D = static_cast<Index>(V.dim());
  RVec x = RVec::Zero(D);
  for (int it = 0; it < 100; ++it) {
    const RVec g = V.gradient(x);
    if (g.norm() < 1e-13) break;
    const RMat H = V.hessian(x);
    Eigen::LDLT<RMat> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(ldlt.rcond() > 1e-14))
      throw NoMinimum("potential has no interior minimum reachable by Newton iteration");
    x -= ldlt.solve(g);
    if (!x.allFinite() || x.norm() > 1e8) throw NoMinimum("Newton iteration diverged");
  }
  if (V.gradient(x).norm() > 1e-8) throw NoMinimum("Newton iteration did not converge to a stationary point");
  Eigen::SelfAdjointEigenSolver<RMat> es(V.hessian(x), Eigen::EigenvaluesOnly);
  const double lowest = es.eigenvalues().minCoeff();
  if (!(lowest > 0.0)) throw NoMinimum("stationary point is not a minimum");
  return 2.0 * std::numbers::pi / std::sqrt(lowest);
}

}  // namespace cgwp
