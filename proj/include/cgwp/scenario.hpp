#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cgwp/constraints.hpp"
#include "cgwp/gaussian.hpp"
#include "cgwp/grid.hpp"
#include "cgwp/initial.hpp"
#include "cgwp/integrator.hpp"
#include "cgwp/observables.hpp"
#include "cgwp/polynomial.hpp"

namespace cgwp {

enum class PotentialKind { DiamagneticKepler, Harmonic, Custom };
enum class InitialKind { Lattice, Explicit, Random };
enum class TimeUnit { Absolute, ClassicalPeriod };

struct PotentialConfig {
  PotentialKind kind = PotentialKind::DiamagneticKepler;
  double alpha = 0.5;
  double beta = 0.2;
  std::vector<double> omega;  ///< harmonic, one per axis
  std::size_t dim = 2;        ///< custom
  std::string terms;          ///< custom, "e1,e2:c; ..."
};

struct InitialConfig {
  InitialKind kind = InitialKind::Lattice;
  std::size_t n_gwp = 1;
  double spacing = 1.0;
  std::vector<double> center;
  /// A0 = i * width * identity.
  double width = 0.5;
  Normalization normalization = Normalization::Total;
  std::filesystem::path file;  ///< explicit: checkpoint-format packet list
};

struct ConstraintConfig {
  std::optional<double> gamma_min;
  std::optional<double> gamma_max;
  bool frozen_width = false;
};

struct ReferenceConfig {
  Grid2D grid;
  /// Split-operator steps per classical period (dt = t_cl / steps_per_period).
  std::size_t steps_per_period = 2000;
  /// Explicit time step; overrides steps_per_period (needed when the
  /// potential has no minimum).
  std::optional<double> dt;
  double leak_tol = kDefaultLeakTol;
};

struct CompareConfig {
  /// Also run the frozen-width variant (same amplitude bounds, widths fixed).
  bool frozen = true;
};

/// Everything one invocation needs. Times in [integrator] are given in
/// `time_unit` and converted on load; the resolved absolute values are what
/// the effective config echo shows.
struct ScenarioConfig {
  PotentialConfig potential;
  InitialConfig initial;
  ConstraintConfig constraints;
  IntegratorConfig integrator;
  TimeUnit time_unit = TimeUnit::Absolute;
  ReferenceConfig reference;
  CompareConfig compare;
  std::uint64_t seed = 0;
  std::filesystem::path source;

  PolynomialPotential build_potential() const;
  WavePacket build_initial() const;
  std::vector<ConstraintSpec> constraint_specs() const;
  /// Absolute length of one time unit.
  double time_scale() const;
  /// Split-operator time step.
  double reference_dt() const;
};

/// Parses an INI file. Unknown sections or keys and missing required keys
/// throw ConfigError.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir = ".");

/// Writes every resolved setting, including the ones left at defaults.
void write_effective_config(const ScenarioConfig& cfg, std::ostream& out);

/// Versioned plain-text packet state:
///   # cgwp-checkpoint v1
///   t <t>
///   dim <D>
///   n_gwp <N>
///   then one line per packet: Re A (row major), Im A (row major), p, q,
///   Re gamma, Im gamma, all printed with 17 significant digits.
void write_checkpoint(std::ostream& out, double t, const WavePacket& wp);
std::pair<double, WavePacket> read_checkpoint(std::istream& in);

/// timeseries.csv for a GWP run.
void write_timeseries(std::ostream& out, const std::vector<StepRecord>& records);
/// timeseries.csv for a grid run (same columns; active_count 0, cond 0).
void write_timeseries(std::ostream& out, const std::vector<ReferenceRecord>& records, double dt);
void write_gamma(std::ostream& out, const std::vector<StepRecord>& records);
TimeSeries read_timeseries(std::istream& in);

struct RunOptions {
  std::filesystem::path out_dir;
  bool serial = false;
};

/// Outcome of a CLI-level run: zero on success, otherwise the error kind and
/// a one-line diagnostic.
struct RunStatus {
  int exit_code = 0;
  std::string error_kind;
  std::string message;
  bool ok() const noexcept { return exit_code == 0; }
  std::string line() const;
};

/// Propagates and writes timeseries.csv, gamma.csv, checkpoints/ and
/// effective_config.ini into the output directory. Partial output is written
/// before an error is reported.
RunStatus run_propagate(const ScenarioConfig& cfg, const RunOptions& opts, Trajectory* trajectory = nullptr);

/// Split-operator reference; records every integrator.record_stride.
RunStatus run_reference(const ScenarioConfig& cfg, const RunOptions& opts,
                        std::vector<ReferenceRecord>* records = nullptr);

struct DeviationSummary {
  double max_constrained = 0.0;
  double t_max_constrained = 0.0;
  double max_frozen = 0.0;
  double t_max_frozen = 0.0;
  std::vector<double> t;
  std::vector<double> constrained;
  std::vector<double> frozen;  ///< empty when disabled; NaN where the frozen run has no record
};

/// Pointwise |C_method(t) - C_exact(t)| on the shared record times.
DeviationSummary deviations(const std::vector<StepRecord>& constrained, const std::vector<StepRecord>* frozen,
                            const std::vector<ReferenceRecord>& exact);

/// Runs the constrained GWP, frozen-width GWP and split-operator propagations
/// (concurrently unless serial) and writes deviation.csv and summary.txt.
RunStatus run_compare(const ScenarioConfig& cfg, const RunOptions& opts, DeviationSummary* summary = nullptr);

/// Reads a timeseries.csv and writes spectrum.csv and peaks.csv.
RunStatus run_spectrum(const std::filesystem::path& input, const SpectrumOptions& options,
                       const std::filesystem::path& out_dir);

}  // namespace cgwp
