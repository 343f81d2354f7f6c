#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cgwp/gaussian.hpp"
#include "cgwp/tdvp.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

/// Constraint families. Each kind knows its own row count, row entries and
/// switching rule (see constraint_rows); new kinds such as overlap caps plug
/// in by adding a case there.
enum class ConstraintKind {
  AmplitudeLower,  ///< Im gamma_k >= bound
  AmplitudeUpper,  ///< Im gamma_k <= bound
  FrozenWidth,     ///< dA_k/dt = 0, never released
};

const char* to_string(ConstraintKind kind);

/// Declarative constraint, possibly applying to every packet.
struct ConstraintSpec {
  ConstraintKind kind;
  double bound = 0.0;
  std::optional<std::size_t> target;  ///< packet index; nullopt means all packets

  bool permanent() const noexcept { return kind == ConstraintKind::FrozenWidth; }

  static ConstraintSpec amplitude_lower(double gamma_min, std::optional<std::size_t> target = std::nullopt) {
    return {ConstraintKind::AmplitudeLower, gamma_min, target};
  }
  static ConstraintSpec amplitude_upper(double gamma_max, std::optional<std::size_t> target = std::nullopt) {
    return {ConstraintKind::AmplitudeUpper, gamma_max, target};
  }
  static ConstraintSpec frozen_width(std::optional<std::size_t> target = std::nullopt) {
    return {ConstraintKind::FrozenWidth, 0.0, target};
  }
};

/// A constraint bound to one packet.
struct Constraint {
  ConstraintKind kind;
  double bound;
  std::size_t gwp;

  bool permanent() const noexcept { return kind == ConstraintKind::FrozenWidth; }
  std::size_t row_count(std::size_t dim) const noexcept;
  /// Signed distance from the bound, positive inside the admissible region.
  /// Only meaningful for amplitude constraints.
  double margin(const WavePacket& wp) const;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Binds every spec to concrete packets. Throws InvalidParameters for bad
/// targets or when a lower amplitude bound is not below an upper one.
std::vector<Constraint> expand(const std::vector<ConstraintSpec>& specs, std::size_t n_gwp);

struct ActiveEntry {
  Constraint constraint;
  double since;
};

inline constexpr std::size_t kDefaultMaxActive = 16;

/// Runtime activation state of one propagation run.
class ActiveSet {
 public:
  /// `m_max` caps the number of simultaneously active releasable constraints;
  /// permanent constraints do not count against it.
  explicit ActiveSet(std::size_t m_max = kDefaultMaxActive) : m_max_(m_max) {}

  /// Throws TooManyActiveConstraints when the cap would be exceeded.
  void activate(const Constraint& c, double t);
  void release(std::size_t entry);
  bool contains(const Constraint& c) const;

  const std::vector<ActiveEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t transient_count() const noexcept;
  std::size_t m_max() const noexcept { return m_max_; }

  /// Multipliers of the latest constrained solve.
  RVec lambda;

 private:
  std::size_t m_max_;
  std::vector<ActiveEntry> entries_;
};

/// Linear constraint rows U_bar v_bar + d_bar = 0 on the real coefficient
/// vector v_bar = (Re v; Im v).
struct ConstraintRows {
  RMat U_bar;
  RVec d_bar;
  std::vector<std::size_t> owner;  ///< active-set entry of each row

  std::size_t size() const noexcept { return static_cast<std::size_t>(d_bar.size()); }
};

/// Builds the rows of every active constraint. Throws
/// RankDeficientConstraints when the rows are linearly dependent.
ConstraintRows constraint_rows(const WavePacket& wp, const ActiveSet& active);

/// Rows of permanent constraints each fix one coefficient outright. This
/// turns them into pinned values and returns the remaining rows, so the
/// fixed directions can be eliminated instead of carried as multipliers.
struct PinnedSplit {
  std::vector<PinnedCoefficient> pinned;
  ConstraintRows rows;
};
PinnedSplit split_pinned(const ConstraintRows& rows, const ActiveSet& active);

struct ConstrainedSolution {
  CoefficientSet coeffs;
  RVec v_bar;
  RVec lambda;
  /// df/dt evaluated at the unconstrained minimum, U_bar K_bar^{-1} r_bar + d_bar.
  RVec fdot_unconstrained;
};

/// Lagrange block solve with a single factorization of K_bar:
/// Y = K_bar^{-1} U_bar^T, (U_bar Y) lambda = U_bar w + d_bar, v_bar = w - Y lambda.
/// Throws SingularConstraintSystem when U_bar Y is singular.
ConstrainedSolution solve_constrained(const FactoredSystem& fs, const ConstraintRows& rows);

/// Convenience overload that factors `sys`, builds the rows for `wp` and
/// stores the multipliers in `active.lambda`.
ConstrainedSolution solve_constrained(const MomentSystem& sys, const WavePacket& wp, ActiveSet& active,
                                      double cond_max = kDefaultCondMax);

/// Candidates that have reached their bound (within `tol_act`) and are not
/// yet active. Permanent constraints are always reported until active.
std::vector<Constraint> activation_check(const WavePacket& wp, const std::vector<Constraint>& candidates,
                                         const ActiveSet& active, double tol_act = 0.0);

/// Active-set entries whose unconstrained rate points back into the
/// admissible region: lower bounds with df/dt > tol_rel, upper bounds with
/// df/dt < -tol_rel. Permanent constraints are never released.
std::vector<std::size_t> deactivation_check(const ConstraintRows& rows, const RVec& fdot_unconstrained,
                                            const ActiveSet& active, double tol_rel = 0.0);

}  // namespace cgwp
