#include "cgwp/constraints.hpp"

#include <algorithm>

#include <Eigen/QR>

#include "cgwp/errors.hpp"
#include "cgwp/polynomial.hpp"

namespace cgwp {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

}  // namespace

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::AmplitudeLower:
      return "amplitude_lower";
    case ConstraintKind::AmplitudeUpper:
      return "amplitude_upper";
    case ConstraintKind::FrozenWidth:
      return "frozen_width";
  }
  return "unknown";
}

std::size_t Constraint::row_count(std::size_t dim) const noexcept {
  switch (kind) {
    case ConstraintKind::AmplitudeLower:
    case ConstraintKind::AmplitudeUpper:
      return 1;
    case ConstraintKind::FrozenWidth:
      return dim * (dim + 1);
  }
  return 0;
}

double Constraint::margin(const WavePacket& wp) const {
  const double gi = wp[gwp].gamma().imag();
  switch (kind) {
    case ConstraintKind::AmplitudeLower:
      return gi - bound;
    case ConstraintKind::AmplitudeUpper:
      return bound - gi;
    case ConstraintKind::FrozenWidth:
      break;
  }
  return 0.0;
}

std::vector<Constraint> expand(const std::vector<ConstraintSpec>& specs, std::size_t n_gwp) {
  std::vector<Constraint> out;
  for (const auto& s : specs) {
    if (s.target && *s.target >= n_gwp) throw InvalidParameters("constraint targets a missing GWP");
    const std::size_t first = s.target.value_or(0);
    const std::size_t last = s.target ? *s.target + 1 : n_gwp;
    for (std::size_t k = first; k < last; ++k) {
      const Constraint c{s.kind, s.bound, k};
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
  }
  for (const auto& lo : out) {
    if (lo.kind != ConstraintKind::AmplitudeLower) continue;
    for (const auto& hi : out)
      if (hi.kind == ConstraintKind::AmplitudeUpper && hi.gwp == lo.gwp && !(lo.bound < hi.bound))
        throw InvalidParameters("gamma_min must be below gamma_max");
  }
  return out;
}

void ActiveSet::activate(const Constraint& c, double t) {
  if (contains(c)) return;
  if (!c.permanent() && transient_count() + 1 > m_max_)
    throw TooManyActiveConstraints("more than " + std::to_string(m_max_) + " simultaneously active constraints");
  entries_.push_back({c, t});
}

void ActiveSet::release(std::size_t entry) {
  if (entry >= entries_.size()) throw InvalidParameters("no such active constraint");
  if (entries_[entry].constraint.permanent()) throw InvalidParameters("permanent constraints cannot be released");
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(entry));
}

bool ActiveSet::contains(const Constraint& c) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const ActiveEntry& e) { return e.constraint == c; });
}

std::size_t ActiveSet::transient_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const ActiveEntry& e) { return !e.constraint.permanent(); }));
}

ConstraintRows constraint_rows(const WavePacket& wp, const ActiveSet& active) {
  const std::size_t D = wp.dim();
  const std::size_t nb = quadratic_basis_size(D);
  const std::size_t nc = wp.size() * nb;
  std::size_t m = 0;
  for (const auto& e : active.entries()) {
    if (e.constraint.gwp >= wp.size()) throw InvalidParameters("active constraint references a missing GWP");
    m += e.constraint.row_count(D);
  }

  ConstraintRows rows{RMat::Zero(idx(m), idx(2 * nc)), RVec::Zero(idx(m)), {}};
  rows.owner.reserve(m);
  const auto basis = quadratic_basis(D);
  Index row = 0;
  for (std::size_t entry = 0; entry < active.size(); ++entry) {
    const Constraint& c = active.entries()[entry].constraint;
    const GaussianParams& g = wp[c.gwp];
    const Index re_base = idx(c.gwp * nb);
    const Index im_base = idx(nc + c.gwp * nb);
    switch (c.kind) {
      case ConstraintKind::AmplitudeLower:
      case ConstraintKind::AmplitudeUpper: {
        // d Im(gamma)/dt = -Im poly_k(q_k) + tr Re A_k
        for (std::size_t a = 0; a < nb; ++a) {
          double mono = 1.0;
          for (std::size_t i = 0; i < D; ++i) mono *= std::pow(g.q()[idx(i)], basis[a][i]);
          rows.U_bar(row, im_base + idx(a)) = -mono;
        }
        rows.d_bar[row] = g.A_real().trace();
        rows.owner.push_back(entry);
        ++row;
        break;
      }
      case ConstraintKind::FrozenWidth: {
        // dA_r/dt = -V2_r/2 - 2(A_r^2 - A_i^2), dA_i/dt = -V2_i/2 - 2(A_r A_i + A_i A_r)
        const RMat Ar = g.A_real();
        const RMat Ai = g.A_imag();
        const RMat quad_r = -2.0 * (Ar * Ar - Ai * Ai);
        const RMat quad_i = -2.0 * (Ar * Ai + Ai * Ar);
        for (int part = 0; part < 2; ++part) {
          const Index base = part == 0 ? re_base : im_base;
          const RMat& offset = part == 0 ? quad_r : quad_i;
          Index slot = idx(1 + D);
          for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t j = i; j < D; ++j, ++slot, ++row) {
              rows.U_bar(row, base + slot) = (i == j) ? -1.0 : -0.5;
              rows.d_bar[row] = offset(idx(i), idx(j));
              rows.owner.push_back(entry);
            }
          }
        }
        break;
      }
    }
  }

  if (m > 0) {
    Eigen::ColPivHouseholderQR<RMat> qr(rows.U_bar.transpose());
    qr.setThreshold(1e-12);
    if (static_cast<std::size_t>(qr.rank()) < m)
      throw RankDeficientConstraints("active constraint rows are linearly dependent");
  }
  return rows;
}

PinnedSplit split_pinned(const ConstraintRows& rows, const ActiveSet& active) {
  PinnedSplit out;
  std::vector<Index> keep;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!active.entries()[rows.owner[r]].constraint.permanent()) {
      keep.push_back(idx(r));
      continue;
    }
    Index col = 0;
    const double u = rows.U_bar.row(idx(r)).cwiseAbs().maxCoeff(&col);
    const double s = rows.U_bar(idx(r), col);
    if (!(u > 0.0) || rows.U_bar.row(idx(r)).cwiseAbs().sum() != u)
      throw InvalidParameters("permanent constraint row does not pin a single coefficient");
    out.pinned.push_back({static_cast<std::size_t>(col), -rows.d_bar[idx(r)] / s});
  }
  out.rows.U_bar = rows.U_bar(keep, Eigen::all);
  out.rows.d_bar = rows.d_bar(keep);
  for (Index r : keep) out.rows.owner.push_back(rows.owner[static_cast<std::size_t>(r)]);
  return out;
}

ConstrainedSolution solve_constrained(const FactoredSystem& fs, const ConstraintRows& rows) {
  const MomentSystem& sys = fs.system();
  const RVec& w = fs.unconstrained();
  if (rows.size() == 0) {
    return {CoefficientSet::from_real(w, sys.n_gwp, sys.dim), w, RVec(), RVec()};
  }
  if (rows.U_bar.cols() != w.size()) throw InvalidParameters("constraint rows do not match the system");

  const RMat Y = fs.solve(RMat(rows.U_bar.transpose()));
  const RMat S = rows.U_bar * Y;
  const RVec fdot = rows.U_bar * w + rows.d_bar;

  Eigen::LDLT<RMat> small(S);
  if (small.info() != Eigen::Success || !(small.rcond() > 1e-14))
    throw SingularConstraintSystem("constraint Schur complement is singular");
  const RVec lambda = small.solve(fdot);
  const RVec v_bar = w - Y * lambda;
  return {CoefficientSet::from_real(v_bar, sys.n_gwp, sys.dim), v_bar, lambda, fdot};
}

ConstrainedSolution solve_constrained(const MomentSystem& sys, const WavePacket& wp, ActiveSet& active,
                                      double cond_max) {
  const FactoredSystem fs(sys, cond_max);
  const ConstraintRows rows = constraint_rows(wp, active);
  ConstrainedSolution sol = solve_constrained(fs, rows);
  active.lambda = sol.lambda;
  return sol;
}

std::vector<Constraint> activation_check(const WavePacket& wp, const std::vector<Constraint>& candidates,
                                         const ActiveSet& active, double tol_act) {
  std::vector<Constraint> out;
  for (const auto& c : candidates) {
    if (active.contains(c)) continue;
    if (c.permanent() || c.margin(wp) <= tol_act) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> deactivation_check(const ConstraintRows& rows, const RVec& fdot_unconstrained,
                                            const ActiveSet& active, double tol_rel) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t entry = rows.owner[r];
    const Constraint& c = active.entries()[entry].constraint;
    const double fdot = fdot_unconstrained[idx(r)];
    const bool release = (c.kind == ConstraintKind::AmplitudeLower && fdot > tol_rel) ||
                         (c.kind == ConstraintKind::AmplitudeUpper && fdot < -tol_rel);
    if (release) out.push_back(entry);
  }
  return out;
}

}  // namespace cgwp
