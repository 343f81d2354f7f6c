// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "../support.hpp"
#include "cgwp/constraints.hpp"
#include "cgwp/errors.hpp"
#include "cgwp/grid.hpp"
#include "cgwp/initial.hpp"
#include "cgwp/integrator.hpp"
#include "cgwp/moments.hpp"
#include "cgwp/observables.hpp"
#include "cgwp/scenario.hpp"
#include "cgwp/tdvp.hpp"

using namespace cgwp;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Largest tolerated |C_constrained - C_exact| / ||chi(0)||^2 for the 20-GWP
// comparison. The bundled reference (256^2 over [-8, 8]^2, t_cl/2000) agrees
// with a 512^2 grid over [-12, 12]^2 to 3e-8 and with half the time step to
// 4e-5, and the constrained run measured 5.5e-3.
constexpr double kEps20 = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path config_path(const char* name) { return fs::path(CGWP_SOURCE_DIR) / "configs" / name; }

// ---------------------------------------------------------------------------
// 1. moments against adaptive quadrature

struct Quad {
  cplx value;
  double scale;  // integral of |f|
};

// Integrates the complex integrand directly: the stopping rule is relative
// to the estimate, and a real or imaginary part that cancels to zero on its
// own would never meet it.
template <class F>
Quad adaptive(F f, double a, double b) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double l1 = 0.0, err = 0.0;
  const cplx v = GK::integrate(f, a, b, 10, 1e-10, &err, &l1);
  return {v, l1};
}

Outcome moments_vs_quadrature() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> deg(0, 8);
  double worst = 0.0;
  std::size_t checks = 0;
  for (int pair = 0; pair < 100; ++pair) {
    const Eigen::Index D = pair < 50 ? 1 : 2;
    const auto gl = testing::random_gwp(rng, D), gk = testing::random_gwp(rng, D);
    const double lo = -14.0, hi = 14.0;
    std::vector<MultiIndex> alphas;
    if (D == 1) {
      for (int n = 0; n <= 8; ++n) alphas.push_back({n});
    } else {
      alphas.push_back({8, 0});
      alphas.push_back({0, 8});
      for (int k = 0; k < 3; ++k) {
        const int a = deg(rng);
        std::uniform_int_distribution<int> rest(0, 8 - a);
        alphas.push_back({a, rest(rng)});
      }
    }
    for (const auto& a : alphas) {
      Quad q;
      if (D == 1) {
        q = adaptive(
            [&](double x) {
              RVec v(1);
              v << x;
              return std::conj(gl(v)) * std::pow(x, a[0]) * gk(v);
            },
            lo, hi);
      } else {
        // nested: the outer integrand is itself an adaptive integral over y,
        // memoized so both outer passes share their abscissae
        std::map<double, Quad> memo;
        auto inner = [&](double x) -> const Quad& {
          auto it = memo.find(x);
          if (it == memo.end()) {
            it = memo.emplace(x, adaptive(
                                     [&](double y) {
                                       RVec v(2);
                                       v << x, y;
                                       return std::conj(gl(v)) * std::pow(x, a[0]) * std::pow(y, a[1]) * gk(v);
                                     },
                                     lo, hi))
                     .first;
          }
          return it->second;
        };
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        double err = 0.0;
        const cplx value = GK::integrate([&](double x) { return inner(x).value; }, lo, hi, 10, 1e-10, &err);
        const double scale = GK::integrate([&](double x) { return inner(x).scale; }, lo, hi, 10, 1e-10, &err);
        q = {value, scale};
      }
      const double rel = std::abs(pair_moment(gl, gk, a) - q.value) / q.scale;
      worst = std::max(worst, rel);
      ++checks;
    }
  }
  return {worst <= 1e-8, std::to_string(checks) + " moments, worst relative error " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 2. harmonic coherent state

Outcome harmonic_coherent_state() {
  const std::vector<double> w{1.0, 1.0};
  const auto V = build_harmonic(w);
  const CMat A0 = CMat::Identity(2, 2) * cplx(0, 0.5);
  const WavePacket wp({GaussianParams(A0, RVec::Zero(2), RVec::Zero(2), 0.0)});
  IntegratorConfig c;
  c.rtol = 1e-10;
  c.atol = 1e-12;
  c.dt_max = 0.1;
  c.t_end = 10 * 2 * kPi;
  c.record_stride = 2 * kPi / 40;
  c.checkpoint_times.clear();
  for (int i = 1; i <= 40; ++i) c.checkpoint_times.push_back(i * c.t_end / 40);
  const auto tr = propagate(wp, V, {}, c);
  double dev_param = 0.0, dev_phase = 0.0;
  for (const auto& [t, state] : tr.checkpoints) {
    const auto& g = state[0];
    dev_param = std::max({dev_param, (g.A() - A0).norm(), g.p().norm(), g.q().norm()});
  }
  const double n2 = norm(wp) * norm(wp);
  for (const auto& r : tr.records) dev_phase = std::max(dev_phase, std::abs(r.autocorrelation / n2 - std::exp(cplx(0, -r.t))));
  return {dev_param <= 1e-7 && dev_phase <= 1e-6 && tr.t >= c.t_end * (1 - 1e-12),
          "max |dA|,|dp|,|dq| " + fmt("%.2e", dev_param) + ", max |C/C0 - exp(-iE0 t)| " + fmt("%.2e", dev_phase)};
}

// ---------------------------------------------------------------------------
// 3. KKT suite

Outcome kkt_suite() {
  std::mt19937_64 rng(1003);
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  std::size_t states = 0, decisions = 0, disagreements = 0, releases = 0;
  double worst_feas = 0.0, worst_gap = 0.0;
  while (states < 120) {
    const std::size_t n = 2 + states % 3;
    const auto wp = testing::random_packet(rng, n, 2, 1.5);
    const auto sys = assemble_system(wp, V);
    std::unique_ptr<FactoredSystem> fs;
    try {
      fs = std::make_unique<FactoredSystem>(sys);
    } catch (const IllConditioned&) {
      continue;
    }
    ActiveSet active;
    const std::size_t m = 1 + states % 3;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = i % n;
      const bool upper = (states + i) % 2 == 1;
      if (i == 2)
        active.activate({ConstraintKind::FrozenWidth, 0.0, (k + 1) % n}, 0.0);
      else if (upper)
        active.activate({ConstraintKind::AmplitudeUpper, wp[k].gamma().imag(), k}, 0.0);
      else
        active.activate({ConstraintKind::AmplitudeLower, wp[k].gamma().imag(), k}, 0.0);
    }
    const auto rows = constraint_rows(wp, active);
    const auto sol = solve_constrained(*fs, rows);
    worst_feas = std::max(worst_feas, (rows.U_bar * sol.v_bar + rows.d_bar).cwiseAbs().maxCoeff());
    const CoefficientSet v_abs = CoefficientSet::from_real(fs->unconstrained(), n, 2);
    worst_gap = std::min(worst_gap, residual_gap(sys, sol.coeffs, v_abs));

    // Oracle: a second, independent unconstrained solve on the complex system,
    // with the constraint rates read off the parameter derivatives.
    const CVec v_indep = sys.K.colPivHouseholderQr().solve(sys.r);
    const auto d_indep = coefficients_to_derivatives(wp, CoefficientSet::from_flat(v_indep, n, 2));
    const auto released = deactivation_check(rows, sol.fdot_unconstrained, active);
    for (std::size_t e = 0; e < active.size(); ++e) {
      const Constraint& c = active.entries()[e].constraint;
      bool oracle = false;
      const double rate = d_indep[c.gwp].gamma_dot.imag();
      if (c.kind == ConstraintKind::AmplitudeLower) oracle = rate > 0.0;
      if (c.kind == ConstraintKind::AmplitudeUpper) oracle = rate < 0.0;
      const bool decided = std::find(released.begin(), released.end(), e) != released.end();
      disagreements += decided != oracle;
      releases += decided;
      ++decisions;
    }
    ++states;
  }
  return {worst_feas <= 1e-10 && worst_gap >= -1e-12 && disagreements == 0,
          std::to_string(states) + " states, " + std::to_string(decisions) + " decisions (" +
              std::to_string(releases) + " releases), " + std::to_string(disagreements) +
              " disagreements, max feasibility residual " + fmt("%.2e", worst_feas) + ", min gap " +
              fmt("%.2e", worst_gap)};
}

// ---------------------------------------------------------------------------
// 4 and 5. eight-packet regularization

struct EightPacketRuns {
  Trajectory con, free;
  std::string con_error, free_error, free_kind;
  double t_end = 0.0, gamma_min = 0.0;
};

const EightPacketRuns& eight_packet_runs() {
  static EightPacketRuns runs = [] {
    EightPacketRuns r;
    const auto cfg = load_scenario(config_path("kepler_8gwp.ini"));
    const auto free_cfg = load_scenario(config_path("kepler_8gwp_free.ini"));
    r.t_end = cfg.integrator.t_end;
    r.gamma_min = *cfg.constraints.gamma_min;
    try {
      propagate(cfg.build_initial(), cfg.build_potential(), cfg.constraint_specs(), cfg.integrator, r.con);
    } catch (const Error& e) {
      r.con_error = std::string(e.kind()) + ": " + e.what();
    }
    try {
      propagate(free_cfg.build_initial(), free_cfg.build_potential(), free_cfg.constraint_specs(),
                free_cfg.integrator, r.free);
    } catch (const Error& e) {
      r.free_kind = e.kind();
      r.free_error = e.what();
    }
    return r;
  }();
  return runs;
}

Outcome regularization_effect() {
  const auto& r = eight_packet_runs();
  const bool con_done = r.con_error.empty() && r.con.t >= r.t_end * (1 - 1e-12);
  const bool free_aborted = r.free_kind == "StepSizeUnderflow" || r.free_kind == "IllConditioned";
  // step-size ratio at matching times
  double best_ratio = 0.0, at = 0.0;
  std::size_t j = 0;
  for (const auto& s : r.free.steps) {
    if (s.shortened) continue;
    while (j < r.con.steps.size() && r.con.steps[j].t < s.t) ++j;
    if (j == r.con.steps.size()) break;
    // the constrained step covering s.t; skip steps cut short for output
    std::size_t k = j;
    while (k < r.con.steps.size() && r.con.steps[k].shortened) ++k;
    if (k == r.con.steps.size()) break;
    const double ratio = r.con.steps[k].dt / s.dt;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      at = s.t;
    }
  }
  double min_con = 1e300, min_free = 1e300;
  for (const auto& s : r.con.steps)
    if (!s.shortened) min_con = std::min(min_con, s.dt);
  for (const auto& s : r.free.steps)
    if (!s.shortened) min_free = std::min(min_free, s.dt);
  std::ostringstream d;
  d << "constrained " << (con_done ? "completed" : "failed (" + r.con_error + ")") << " t=" << fmt("%.3f", r.con.t / (2 * kPi))
    << " t_cl, min dt " << fmt("%.2e", min_con) << "; unconstrained "
    << (r.free_kind.empty() ? "completed" : "aborted with " + r.free_kind) << " at t=" << fmt("%.3f", r.free.t / (2 * kPi))
    << " t_cl, min dt " << fmt("%.2e", min_free) << "; largest dt ratio " << fmt("%.1e", best_ratio) << " at t="
    << fmt("%.3f", at / (2 * kPi)) << " t_cl";
  return {con_done && (free_aborted || best_ratio >= 100.0), d.str()};
}

Outcome constraint_clamping() {
  const auto& r = eight_packet_runs();
  const double gmin = r.gamma_min;
  double lowest = 1e300;
  std::size_t episodes = 0;
  const std::size_t n = r.con.records.empty() ? 0 : r.con.records.front().gamma_imag.size();
  for (std::size_t k = 0; k < n; ++k) {
    bool clamped = false;
    std::size_t clamped_records = 0;
    for (const auto& rec : r.con.records) {
      const double g = rec.gamma_imag[k];
      lowest = std::min(lowest, g);
      if (std::abs(g - gmin) <= 1e-6) {
        clamped = true;
        ++clamped_records;
      } else if (clamped && g > gmin + 1e-6) {
        if (clamped_records >= 2) ++episodes;  // stuck over an interval, then detached
        clamped = false;
        clamped_records = 0;
      }
    }
  }
  return {r.con_error.empty() && lowest >= gmin - 1e-8 && episodes >= 1,
          "lowest Im gamma " + fmt("%.10f", lowest) + ", " + std::to_string(episodes) +
              " clamp-and-detach episodes"};
}

// ---------------------------------------------------------------------------
// 6. twenty packets against the split-operator reference

Outcome twenty_packet_accuracy() {
  const auto cfg = load_scenario(config_path("kepler_20gwp_compare.ini"));
  const fs::path out = fs::temp_directory_path() / "cgwp_acceptance_compare";
  DeviationSummary s;
  const RunStatus st = run_compare(cfg, {out, false}, &s);
  const double n2 = std::pow(norm(cfg.build_initial()), 2);
  const double t_end = cfg.integrator.t_end;

  // normalized deviations
  double max_con = 0.0, t_max = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i)
    if (s.constrained[i] / n2 > max_con) {
      max_con = s.constrained[i] / n2;
      t_max = s.t[i];
    }
  const bool covered = !s.t.empty() && s.t.back() >= t_end * (1 - 1e-9);

  // ordering beyond the first time both deviations exceed 1e-3; a frozen run
  // that has already stopped counts as exceeding it
  std::size_t start = s.t.size();
  for (std::size_t i = 0; i < s.t.size(); ++i)
    if (s.constrained[i] / n2 > 1e-3 && (std::isnan(s.frozen[i]) || s.frozen[i] / n2 > 1e-3)) {
      start = i;
      break;
    }
  double late_con = 0.0, late_frz = 0.0;
  bool frozen_lost = false;  // frozen run stopped before the window ended
  for (std::size_t i = start; i < s.t.size(); ++i) {
    late_con = std::max(late_con, s.constrained[i] / n2);
    if (std::isnan(s.frozen[i]))
      frozen_lost = true;
    else
      late_frz = std::max(late_frz, s.frozen[i] / n2);
  }
  const bool ordered = start < s.t.size() && (frozen_lost || late_frz > late_con);
  std::ostringstream d;
  d << "max |dC| constrained " << fmt("%.3e", max_con) << " at t=" << fmt("%.3f", t_max / (2 * kPi))
    << " t_cl (eps20 " << kEps20 << "); beyond t=" << fmt("%.3f", start < s.t.size() ? s.t[start] / (2 * kPi) : -1.0)
    << " t_cl frozen max " << fmt("%.3e", late_frz) << (frozen_lost ? " (frozen run stopped early)" : "")
    << " vs constrained " << fmt("%.3e", late_con) << "; status " << st.line();
  fs::remove_all(out);
  return {st.ok() && covered && max_con <= kEps20 && ordered, d.str()};
}

// ---------------------------------------------------------------------------
// 7. conservation

Outcome conservation() {
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  RVec q1(2), q2(2), p1(2), p2(2);
  q1 << 0.8, 0.3;
  q2 << -0.6, -0.5;
  p1 << 0.2, -0.4;
  p2 << -0.3, 0.5;
  const CMat A = CMat::Identity(2, 2) * cplx(0, 0.5);
  const WavePacket wp({GaussianParams(A, p1, q1, 0.0), GaussianParams(A, p2, q2, cplx(0.0, 0.3))});
  IntegratorConfig c;
  c.t_end = 5 * 2 * kPi;
  c.record_stride = 2 * kPi / 20;
  c.dt_max = 0.05;
  const auto tr = propagate(wp, V, {}, c);
  const double n0 = tr.records.front().norm, e0 = tr.records.front().energy;
  double dn = 0.0, de = 0.0;
  for (const auto& r : tr.records) {
    dn = std::max(dn, std::abs(r.norm - n0) / n0);
    de = std::max(de, std::abs(r.energy - e0) / std::abs(e0));
  }
  return {dn <= 1e-5 && de <= 1e-5 && tr.t >= c.t_end * (1 - 1e-12),
          "relative drift: norm " + fmt("%.2e", dn) + ", energy " + fmt("%.2e", de)};
}

// ---------------------------------------------------------------------------
// 8. cross-form identity

Outcome cross_form() {
  std::mt19937_64 rng(1008);
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  double worst = 0.0;
  int states = 0;
  while (states < 100) {
    const auto wp = testing::random_packet(rng, 1 + states % 4, 2, 1.5);
    CoefficientSet v;
    try {
      v = solve_unconstrained(assemble_system(wp, V));
    } catch (const IllConditioned&) {
      continue;
    }
    const auto a = coefficients_to_derivatives(wp, v), b = coefficients_to_derivatives_real(wp, v);
    for (std::size_t k = 0; k < wp.size(); ++k) {
      const double scale = 1.0 + a[k].A_dot.norm() + a[k].p_dot.norm() + a[k].q_dot.norm() + std::abs(a[k].gamma_dot);
      const double diff = (a[k].A_dot - b[k].A_dot).norm() + (a[k].p_dot - b[k].p_dot).norm() +
                          (a[k].q_dot - b[k].q_dot).norm() + std::abs(a[k].gamma_dot - b[k].gamma_dot);
      worst = std::max(worst, diff / scale);
    }
    ++states;
  }

  // B,C factors against direct A on a squeezed, displaced oscillator state
  const std::vector<double> w{1.0, 1.0};
  CMat A = CMat::Zero(2, 2);
  A(0, 0) = cplx(0.2, 1.1);
  A(1, 1) = cplx(-0.1, 0.3);
  A(0, 1) = A(1, 0) = cplx(0.05, 0.1);
  RVec p(2), q(2);
  p << 0.4, -0.2;
  q << 1.0, 0.5;
  const WavePacket wp({GaussianParams(A, p, q, 0.0)});
  IntegratorConfig c;
  c.t_end = 2 * 2 * kPi;
  c.record_stride = 2 * kPi / 20;
  c.rtol = 1e-10;
  c.atol = 1e-12;
  c.dt_max = 0.1;
  for (int i = 1; i <= 40; ++i) c.checkpoint_times.push_back(i * c.t_end / 40);
  const auto fa = propagate(wp, build_harmonic(w), {}, c);
  c.use_width_factors = false;
  const auto fb = propagate(wp, build_harmonic(w), {}, c);
  double dev = 0.0;
  for (std::size_t i = 0; i < std::min(fa.checkpoints.size(), fb.checkpoints.size()); ++i)
    dev = std::max(dev, (fa.checkpoints[i].second[0].A() - fb.checkpoints[i].second[0].A()).norm());
  for (std::size_t i = 0; i < std::min(fa.records.size(), fb.records.size()); ++i)
    dev = std::max(dev, std::abs(fa.records[i].autocorrelation - fb.records[i].autocorrelation));
  const bool same_length = fa.checkpoints.size() == 40 && fb.checkpoints.size() == 40;
  return {worst <= 1e-12 && dev <= 1e-6 && same_length,
          "complex vs real map worst relative difference " + fmt("%.2e", worst) +
              " on 100 states; (B,C) vs direct A max deviation " + fmt("%.2e", dev)};
}

// ---------------------------------------------------------------------------
// 9. dimension bookkeeping

Outcome dimension_bookkeeping() {
  LatticeSpec spec;
  spec.n_gwp = 20;
  spec.spacing = 1.2;
  spec.center = RVec::Zero(2);
  spec.A0 = CMat::Identity(2, 2) * cplx(0, 1.0);
  const auto wp = grid_packet(spec);
  const auto sys = assemble_system(wp, build_diamagnetic_kepler(0.5, 0.2));
  const auto n = sys.real_size();
  const bool ok = n == 240 && sys.K_bar().rows() == 240 && sys.r_bar().size() == 240 && sys.n_coefficients() == 120;
  return {ok, "N=20, D=2: real system size " + std::to_string(n) + ", K_bar " + std::to_string(sys.K_bar().rows()) +
                  "x" + std::to_string(sys.K_bar().cols())};
}

// ---------------------------------------------------------------------------
// 10. spectrum sanity

Outcome spectrum_sanity() {
  const std::vector<double> w{1.0};
  CMat A(1, 1);
  A(0, 0) = cplx(0, 0.5);
  RVec p(1), q(1);
  p << 0.0;
  q << 2.0;
  const WavePacket wp({GaussianParams(A, p, q, 0.0)});
  IntegratorConfig c;
  c.t_end = 40 * 2 * kPi;
  c.record_stride = 0.1;
  c.dt_max = 0.1;
  const auto tr = propagate(wp, build_harmonic(w), {}, c);
  TimeSeries s;
  for (const auto& r : tr.records) {
    s.times.push_back(r.t);
    s.values.push_back(r.autocorrelation);
  }
  const auto sp = spectrum(s);
  double worst_spacing = 0.0, worst_level = 0.0;
  for (std::size_t i = 0; i < sp.peaks.size(); ++i) {
    worst_level = std::max(worst_level, std::abs(sp.peaks[i] - (std::round(sp.peaks[i] - 0.5) + 0.5)));
    if (i > 0) worst_spacing = std::max(worst_spacing, std::abs(sp.peaks[i] - sp.peaks[i - 1] - 1.0));
  }
  const bool ok = sp.peaks.size() >= 4 && worst_spacing <= sp.bin_width && worst_level <= sp.bin_width;
  return {ok, std::to_string(sp.peaks.size()) + " peaks, worst spacing error " + fmt("%.2e", worst_spacing) +
                  ", bin width " + fmt("%.2e", sp.bin_width)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"moments agree with adaptive quadrature", moments_vs_quadrature},
      {"harmonic coherent state", harmonic_coherent_state},
      {"KKT suite", kkt_suite},
      {"8-GWP regularization effect", regularization_effect},
      {"constraint clamping", constraint_clamping},
      {"20-GWP accuracy against split operator", twenty_packet_accuracy},
      {"conservation", conservation},
      {"cross-form identity", cross_form},
      {"dimension bookkeeping", dimension_bookkeeping},
      {"spectrum sanity", spectrum_sanity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s -- %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
