#pragma once

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cgwp {

namespace detail {
inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace detail

/// Base of every library error. `kind()` is a stable identifier used in the
/// CLI's machine-readable diagnostic line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
};

#define CGWP_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    using Error::Error;                                           \
    const char* kind() const noexcept override { return #Name; }  \
  };

CGWP_DEFINE_ERROR(InvalidParameters)
CGWP_DEFINE_ERROR(NonIntegrable)
CGWP_DEFINE_ERROR(DegreeUnsupported)
CGWP_DEFINE_ERROR(SingularConstraintSystem)
CGWP_DEFINE_ERROR(RankDeficientConstraints)
CGWP_DEFINE_ERROR(TooManyActiveConstraints)
CGWP_DEFINE_ERROR(NoMinimum)
CGWP_DEFINE_ERROR(GridLeak)
CGWP_DEFINE_ERROR(ConfigError)

#undef CGWP_DEFINE_ERROR

/// Raised when the variational matrix is too close to singular to be solved
/// reliably. Carries enough diagnostics to see which packets are responsible.
class IllConditioned : public Error {
 public:
  struct Overlap {
    std::size_t l, k;
    double value;  ///< |<g_l|g_k>| / (||g_l|| ||g_k||)
  };

  IllConditioned(double cond, std::vector<std::pair<std::size_t, double>> extreme_gamma_i,
                 std::vector<Overlap> largest_overlaps)
      : Error("variational matrix ill-conditioned (cond estimate " + detail::fmt(cond) + ")"),
        cond_(cond),
        extreme_gamma_i_(std::move(extreme_gamma_i)),
        largest_overlaps_(std::move(largest_overlaps)) {}

  const char* kind() const noexcept override { return "IllConditioned"; }
  double cond() const noexcept { return cond_; }
  const std::vector<std::pair<std::size_t, double>>& extreme_gamma_i() const noexcept {
    return extreme_gamma_i_;
  }
  const std::vector<Overlap>& largest_overlaps() const noexcept { return largest_overlaps_; }

  std::optional<double> time() const noexcept { return time_; }
  void set_time(double t) noexcept { time_ = t; }

 private:
  double cond_;
  std::vector<std::pair<std::size_t, double>> extreme_gamma_i_;
  std::vector<Overlap> largest_overlaps_;
  std::optional<double> time_;
};

class StepSizeUnderflow : public Error {
 public:
  StepSizeUnderflow(double t, double dt)
      : Error("step size " + detail::fmt(dt) + " fell below dt_min at t=" + detail::fmt(t)),
        t_(t),
        dt_(dt) {}
  const char* kind() const noexcept override { return "StepSizeUnderflow"; }
  double time() const noexcept { return t_; }
  double dt() const noexcept { return dt_; }

 private:
  double t_, dt_;
};

class InvariantBroken : public Error {
 public:
  InvariantBroken(double t, std::size_t gwp, const std::string& what)
      : Error("invariant broken for GWP " + std::to_string(gwp) + " at t=" + detail::fmt(t) +
              ": " + what),
        t_(t),
        gwp_(gwp) {}
  const char* kind() const noexcept override { return "InvariantBroken"; }
  double time() const noexcept { return t_; }
  std::size_t gwp() const noexcept { return gwp_; }

 private:
  double t_;
  std::size_t gwp_;
};

}  // namespace cgwp
