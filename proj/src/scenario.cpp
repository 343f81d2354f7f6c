#include "cgwp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cgwp/errors.hpp"

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace cgwp {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"potential", {"kind", "alpha", "beta", "omega", "dim", "terms"}},
      {"initial", {"kind", "n_gwp", "spacing", "center", "width", "normalization", "file", "dim"}},
      {"constraints", {"gamma_min", "gamma_max", "frozen_width"}},
      {"integrator",
       {"time_unit", "rtol", "atol", "dt_init", "dt_min", "dt_max", "tol_event", "cond_max", "t_end", "record_stride",
        "checkpoint_times", "m_max", "tol_rel", "width_factors"}},
      {"reference", {"n", "L", "steps_per_period", "dt", "leak_tol"}},
      {"compare", {"frozen"}},
      {"run", {"seed"}},
  };
  return keys;
}

std::string lower(std::string s) {
  boost::algorithm::to_lower(s);
  boost::algorithm::trim(s);
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + text + "' is not a finite number");
  }
}

std::size_t to_size(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v < 0.0 || v != std::floor(v)) throw ConfigError("key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(text);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError("key '" + key + "' must be a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<std::string> parts;
  const std::string trimmed = boost::algorithm::trim_copy(text);
  if (trimmed.empty()) return {};
  boost::algorithm::split(parts, trimmed, boost::algorithm::is_any_of(", \t"), boost::algorithm::token_compress_on);
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(key, p));
  return out;
}

/// Optional numeric key where "none" means unset.
std::optional<double> to_optional(const std::string& key, const std::string& text) {
  if (lower(text) == "none" || lower(text).empty()) return std::nullopt;
  return to_double(key, text);
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (!tree_) return std::nullopt;
    const auto v = tree_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return boost::algorithm::trim_copy(*v);
  }
  std::string required(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw ConfigError("missing required key [" + name_ + "] " + key);
    return *v;
  }
  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  void number(const std::string& key, double& target) const {
    if (auto v = raw(key)) target = to_double(qualified(key), *v);
  }
  void count(const std::string& key, std::size_t& target) const {
    if (auto v = raw(key)) target = to_size(qualified(key), *v);
  }
  void flag(const std::string& key, bool& target) const {
    if (auto v = raw(key)) target = to_bool(qualified(key), *v);
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

PolynomialPotential parse_terms(std::size_t dim, const std::string& text) {
  PolynomialPotential V(dim);
  std::vector<std::string> terms;
  boost::algorithm::split(terms, text, boost::algorithm::is_any_of(";"));
  for (auto term : terms) {
    boost::algorithm::trim(term);
    if (term.empty()) continue;
    const auto colon = term.find(':');
    if (colon == std::string::npos) throw ConfigError("potential term '" + term + "' lacks ':'");
    const auto exps = to_list("potential.terms", term.substr(0, colon));
    if (exps.size() != dim) throw ConfigError("potential term '" + term + "' has the wrong number of exponents");
    MultiIndex alpha;
    for (double e : exps) {
      if (e < 0.0 || e != std::floor(e)) throw ConfigError("potential exponents must be non-negative integers");
      alpha.push_back(static_cast<int>(e));
    }
    V.add_term(alpha, to_double("potential.terms", boost::algorithm::trim_copy(term.substr(colon + 1))));
  }
  return V;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

void write_csv_number(std::ostream& out, double v) { out << std::setprecision(17) << v; }

RunStatus status_from(const Error& e) {
  return {e.kind() == std::string("ConfigError") ? 2 : 3, e.kind(), e.what()};
}

RunStatus status_from_std(const std::exception& e) { return {4, "InternalError", e.what()}; }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::size_t steps_for(double span, double dt, const char* what) {
  const double n = span / dt;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6 * std::max(1.0, r))
    throw ConfigError(std::string(what) + " is not an integer multiple of the reference time step");
  return static_cast<std::size_t>(r);
}

}  // namespace

PolynomialPotential ScenarioConfig::build_potential() const {
  switch (potential.kind) {
    case PotentialKind::DiamagneticKepler:
      return build_diamagnetic_kepler(potential.alpha, potential.beta);
    case PotentialKind::Harmonic:
      if (potential.omega.empty()) throw ConfigError("harmonic potential needs omega");
      return build_harmonic(potential.omega);
    case PotentialKind::Custom:
      return parse_terms(potential.dim, potential.terms);
  }
  throw ConfigError("unknown potential kind");
}

WavePacket ScenarioConfig::build_initial() const {
  const std::size_t D = build_potential().dim();
  switch (initial.kind) {
    case InitialKind::Lattice: {
      LatticeSpec spec;
      spec.n_gwp = initial.n_gwp;
      spec.spacing = initial.spacing;
      spec.center = initial.center.empty() ? RVec::Zero(static_cast<Eigen::Index>(D))
                                           : RVec(Eigen::Map<const RVec>(initial.center.data(),
                                                                         static_cast<Eigen::Index>(initial.center.size())));
      if (static_cast<std::size_t>(spec.center.size()) != D) throw ConfigError("initial.center has the wrong length");
      spec.A0 = CMat::Identity(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D)) * cplx(0.0, initial.width);
      spec.normalization = initial.normalization;
      return grid_packet(spec);
    }
    case InitialKind::Explicit: {
      std::ifstream in(initial.file);
      if (!in) throw ConfigError("cannot open initial.file " + initial.file.string());
      WavePacket wp = read_checkpoint(in).second;
      if (wp.dim() != D) throw ConfigError("initial.file dimension does not match the potential");
      return wp;
    }
    case InitialKind::Random: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const auto d = static_cast<Eigen::Index>(D);
      std::vector<GaussianParams> gwps;
      for (std::size_t k = 0; k < initial.n_gwp; ++k) {
        CMat A(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
          for (Eigen::Index j = 0; j <= i; ++j) {
            const cplx a(0.2 * u(rng), (i == j ? initial.width * (1.0 + 0.3 * u(rng)) : 0.05 * u(rng)));
            A(i, j) = A(j, i) = a;
          }
        RVec p(d), q(d);
        for (Eigen::Index i = 0; i < d; ++i) {
          p[i] = 0.5 * u(rng);
          q[i] = initial.spacing * u(rng);
        }
        gwps.emplace_back(A, p, q, cplx(u(rng), unit_norm_gamma_imag(A)));
      }
      return WavePacket(std::move(gwps));
    }
  }
  throw ConfigError("unknown initial kind");
}

std::vector<ConstraintSpec> ScenarioConfig::constraint_specs() const {
  std::vector<ConstraintSpec> specs;
  if (constraints.gamma_min) specs.push_back(ConstraintSpec::amplitude_lower(*constraints.gamma_min));
  if (constraints.gamma_max) specs.push_back(ConstraintSpec::amplitude_upper(*constraints.gamma_max));
  if (constraints.frozen_width) specs.push_back(ConstraintSpec::frozen_width());
  return specs;
}

double ScenarioConfig::time_scale() const {
  return time_unit == TimeUnit::Absolute ? 1.0 : classical_period(build_potential());
}

double ScenarioConfig::reference_dt() const {
  if (reference.dt) return *reference.dt;
  if (reference.steps_per_period == 0) throw ConfigError("reference.steps_per_period must be positive");
  return classical_period(build_potential()) / static_cast<double>(reference.steps_per_period);
}

ScenarioConfig parse_scenario(std::istream& in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("unparseable config: ") + e.what());
  }
  for (const auto& [name, section] : tree) {
    const auto it = known_keys().find(name);
    if (it == known_keys().end()) throw ConfigError("unknown section [" + name + "]");
    for (const auto& [key, value] : section)
      if (!it->second.count(key)) throw ConfigError("unknown key [" + name + "] " + key);
  }
  auto section = [&](const std::string& name) {
    return Section(tree.get_child_optional(name) ? &tree.get_child(name) : nullptr, name);
  };

  ScenarioConfig cfg;

  const Section pot = section("potential");
  const std::string pkind = lower(pot.required("kind"));
  if (pkind == "diamagnetic_kepler") {
    cfg.potential.kind = PotentialKind::DiamagneticKepler;
    pot.number("alpha", cfg.potential.alpha);
    pot.number("beta", cfg.potential.beta);
  } else if (pkind == "harmonic") {
    cfg.potential.kind = PotentialKind::Harmonic;
    cfg.potential.omega = to_list("potential.omega", pot.required("omega"));
  } else if (pkind == "custom") {
    cfg.potential.kind = PotentialKind::Custom;
    pot.count("dim", cfg.potential.dim);
    cfg.potential.terms = pot.raw("terms").value_or("");
  } else {
    throw ConfigError("unknown potential kind '" + pkind + "'");
  }

  const Section ini = section("initial");
  const std::string ikind = lower(ini.required("kind"));
  if (ikind == "lattice")
    cfg.initial.kind = InitialKind::Lattice;
  else if (ikind == "explicit")
    cfg.initial.kind = InitialKind::Explicit;
  else if (ikind == "random")
    cfg.initial.kind = InitialKind::Random;
  else
    throw ConfigError("unknown initial kind '" + ikind + "'");
  ini.count("n_gwp", cfg.initial.n_gwp);
  ini.number("spacing", cfg.initial.spacing);
  ini.number("width", cfg.initial.width);
  if (auto c = ini.raw("center")) cfg.initial.center = to_list("initial.center", *c);
  if (auto n = ini.raw("normalization")) {
    const std::string v = lower(*n);
    if (v == "total")
      cfg.initial.normalization = Normalization::Total;
    else if (v == "individual")
      cfg.initial.normalization = Normalization::Individual;
    else
      throw ConfigError("initial.normalization must be total or individual");
  }
  if (cfg.initial.kind == InitialKind::Explicit) {
    fs::path f = ini.required("file");
    if (f.is_relative()) f = base_dir / f;
    if (!fs::exists(f)) throw ConfigError("initial.file " + f.string() + " does not exist");
    cfg.initial.file = f;
  }
  if (cfg.initial.n_gwp == 0) throw ConfigError("initial.n_gwp must be at least 1");
  if (!(cfg.initial.width > 0.0)) throw ConfigError("initial.width must be positive");

  const Section con = section("constraints");
  if (auto v = con.raw("gamma_min")) cfg.constraints.gamma_min = to_optional("constraints.gamma_min", *v);
  if (auto v = con.raw("gamma_max")) cfg.constraints.gamma_max = to_optional("constraints.gamma_max", *v);
  if (cfg.constraints.gamma_min && cfg.constraints.gamma_max &&
      !(*cfg.constraints.gamma_min < *cfg.constraints.gamma_max))
    throw ConfigError("constraints.gamma_min must be below constraints.gamma_max");
  con.flag("frozen_width", cfg.constraints.frozen_width);

  if (auto seed = section("run").raw("seed")) cfg.seed = to_size("run.seed", *seed);

  const Section itg = section("integrator");
  if (auto u = itg.raw("time_unit")) {
    const std::string v = lower(*u);
    if (v == "absolute")
      cfg.time_unit = TimeUnit::Absolute;
    else if (v == "classical_period")
      cfg.time_unit = TimeUnit::ClassicalPeriod;
    else
      throw ConfigError("integrator.time_unit must be absolute or classical_period");
  }
  IntegratorConfig& ic = cfg.integrator;
  itg.number("rtol", ic.rtol);
  itg.number("atol", ic.atol);
  itg.number("tol_event", ic.tol_event);
  itg.number("cond_max", ic.cond_max);
  itg.number("tol_rel", ic.tol_rel);
  itg.count("m_max", ic.m_max);
  itg.flag("width_factors", ic.use_width_factors);
  ic.t_end = to_double("integrator.t_end", itg.required("t_end"));
  ic.record_stride = to_double("integrator.record_stride", itg.required("record_stride"));
  itg.number("dt_init", ic.dt_init);
  itg.number("dt_min", ic.dt_min);
  itg.number("dt_max", ic.dt_max);
  if (auto v = itg.raw("checkpoint_times")) ic.checkpoint_times = to_list("integrator.checkpoint_times", *v);

  // Every time-like integrator setting is expressed in time_unit.
  const double scale = cfg.time_scale();
  ic.t_end *= scale;
  ic.record_stride *= scale;
  ic.dt_init *= scale;
  ic.dt_min *= scale;
  ic.dt_max *= scale;
  for (double& t : ic.checkpoint_times) t *= scale;
  cfg.time_unit = TimeUnit::Absolute;
  ic.validate();

  const Section ref = section("reference");
  ref.count("n", cfg.reference.grid.n_mu);
  cfg.reference.grid.n_nu = cfg.reference.grid.n_mu;
  ref.number("L", cfg.reference.grid.L_mu);
  cfg.reference.grid.L_nu = cfg.reference.grid.L_mu;
  ref.count("steps_per_period", cfg.reference.steps_per_period);
  if (auto v = ref.raw("dt")) cfg.reference.dt = to_optional("reference.dt", *v);
  ref.number("leak_tol", cfg.reference.leak_tol);
  try {
    cfg.reference.grid.validate();
  } catch (const InvalidParameters& e) {
    throw ConfigError(std::string("reference grid: ") + e.what());
  }

  section("compare").flag("frozen", cfg.compare.frozen);

  // Surface construction problems (bad terms, mismatched dimensions) now.
  try {
    (void)cfg.build_initial();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid initial state: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  ScenarioConfig cfg = parse_scenario(in, path.parent_path());
  cfg.source = path;
  return cfg;
}

void write_effective_config(const ScenarioConfig& cfg, std::ostream& out) {
  out << std::setprecision(17);
  out << "# effective configuration; all times absolute\n";
  out << "[potential]\n";
  switch (cfg.potential.kind) {
    case PotentialKind::DiamagneticKepler:
      out << "kind = diamagnetic_kepler\nalpha = " << cfg.potential.alpha << "\nbeta = " << cfg.potential.beta << "\n";
      break;
    case PotentialKind::Harmonic:
      out << "kind = harmonic\nomega = " << join(cfg.potential.omega) << "\n";
      break;
    case PotentialKind::Custom:
      out << "kind = custom\ndim = " << cfg.potential.dim << "\nterms = " << cfg.potential.terms << "\n";
      break;
  }
  out << "\n[initial]\n";
  const char* kinds[] = {"lattice", "explicit", "random"};
  out << "kind = " << kinds[static_cast<int>(cfg.initial.kind)] << "\n";
  out << "n_gwp = " << cfg.initial.n_gwp << "\nspacing = " << cfg.initial.spacing << "\nwidth = " << cfg.initial.width
      << "\n";
  if (!cfg.initial.center.empty()) out << "center = " << join(cfg.initial.center) << "\n";
  out << "normalization = " << (cfg.initial.normalization == Normalization::Total ? "total" : "individual") << "\n";
  if (cfg.initial.kind == InitialKind::Explicit) out << "file = " << fs::absolute(cfg.initial.file).string() << "\n";

  out << "\n[constraints]\n";
  out << "gamma_min = ";
  if (cfg.constraints.gamma_min) out << *cfg.constraints.gamma_min; else out << "none";
  out << "\ngamma_max = ";
  if (cfg.constraints.gamma_max) out << *cfg.constraints.gamma_max; else out << "none";
  out << "\nfrozen_width = " << (cfg.constraints.frozen_width ? "true" : "false") << "\n";

  const IntegratorConfig& ic = cfg.integrator;
  out << "\n[integrator]\ntime_unit = absolute\n";
  out << "rtol = " << ic.rtol << "\natol = " << ic.atol << "\ndt_init = " << ic.dt_init << "\ndt_min = " << ic.dt_min
      << "\ndt_max = " << ic.dt_max << "\ntol_event = " << ic.tol_event << "\ncond_max = " << ic.cond_max
      << "\nt_end = " << ic.t_end << "\nrecord_stride = " << ic.record_stride
      << "\ncheckpoint_times = " << join(ic.checkpoint_times) << "\nm_max = " << ic.m_max << "\ntol_rel = " << ic.tol_rel
      << "\nwidth_factors = " << (ic.use_width_factors ? "true" : "false") << "\n";

  out << "\n[reference]\nn = " << cfg.reference.grid.n_mu << "\nL = " << cfg.reference.grid.L_mu
      << "\nsteps_per_period = " << cfg.reference.steps_per_period << "\ndt = ";
  if (cfg.reference.dt) out << *cfg.reference.dt; else out << "none";
  out << "\nleak_tol = " << cfg.reference.leak_tol << "\n";

  out << "\n[compare]\nfrozen = " << (cfg.compare.frozen ? "true" : "false") << "\n";
  out << "\n[run]\nseed = " << cfg.seed << "\n";
}

void write_checkpoint(std::ostream& out, double t, const WavePacket& wp) {
  const auto D = static_cast<Eigen::Index>(wp.dim());
  out << "# cgwp-checkpoint v1\n";
  out << "# per packet: ReA(row major) ImA(row major) p q Re(gamma) Im(gamma)\n";
  out << std::setprecision(17);
  out << "t " << t << "\ndim " << wp.dim() << "\nn_gwp " << wp.size() << "\n";
  for (const auto& g : wp) {
    bool first = true;
    auto put = [&](double v) {
      out << (first ? "" : " ") << v;
      first = false;
    };
    for (Eigen::Index i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < D; ++j) put(g.A()(i, j).real());
    for (Eigen::Index i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < D; ++j) put(g.A()(i, j).imag());
    for (Eigen::Index i = 0; i < D; ++i) put(g.p()[i]);
    for (Eigen::Index i = 0; i < D; ++i) put(g.q()[i]);
    put(g.gamma().real());
    put(g.gamma().imag());
    out << "\n";
  }
}

std::pair<double, WavePacket> read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || boost::algorithm::trim_copy(line) != "# cgwp-checkpoint v1")
    throw ConfigError("checkpoint: missing or unsupported version header");
  auto next = [&]() {
    while (std::getline(in, line)) {
      boost::algorithm::trim(line);
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  auto field = [&](const char* name) {
    if (!next()) throw ConfigError(std::string("checkpoint: missing ") + name);
    std::istringstream is(line);
    std::string key;
    double v = 0.0;
    if (!(is >> key >> v) || key != name) throw ConfigError(std::string("checkpoint: expected ") + name);
    return v;
  };
  const double t = field("t");
  const double dim = field("dim");
  const double n = field("n_gwp");
  if (dim < 1 || n < 1) throw ConfigError("checkpoint: bad sizes");
  const auto D = static_cast<Eigen::Index>(dim);
  std::vector<GaussianParams> gwps;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    if (!next()) throw ConfigError("checkpoint: missing packet line");
    std::vector<double> v = to_list("checkpoint", line);
    if (static_cast<Eigen::Index>(v.size()) != 2 * D * D + 2 * D + 2)
      throw ConfigError("checkpoint: packet line has the wrong number of fields");
    CMat A(D, D);
    std::size_t m = 0;
    for (Eigen::Index i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < D; ++j) A(i, j) = v[m++];
    for (Eigen::Index i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < D; ++j) A(i, j) += cplx(0.0, v[m++]);
    RVec p(D), q(D);
    for (Eigen::Index i = 0; i < D; ++i) p[i] = v[m++];
    for (Eigen::Index i = 0; i < D; ++i) q[i] = v[m++];
    const cplx gamma(v[m], v[m + 1]);
    try {
      gwps.emplace_back(A, p, q, gamma);
    } catch (const InvalidParameters& e) {
      throw ConfigError(std::string("checkpoint: ") + e.what());
    }
  }
  return {t, WavePacket(std::move(gwps))};
}

void write_timeseries(std::ostream& out, const std::vector<StepRecord>& records) {
  out << "t,re_C,im_C,norm,energy,dt_used,active_count,cond_estimate\n";
  for (const auto& r : records) {
    for (double v : {r.t, r.autocorrelation.real(), r.autocorrelation.imag(), r.norm, r.energy, r.dt_used}) {
      write_csv_number(out, v);
      out << ",";
    }
    out << r.active_count << ",";
    write_csv_number(out, r.cond_estimate);
    out << "\n";
  }
}

void write_timeseries(std::ostream& out, const std::vector<ReferenceRecord>& records, double dt) {
  out << "t,re_C,im_C,norm,energy,dt_used,active_count,cond_estimate\n";
  for (const auto& r : records) {
    for (double v : {r.t, r.autocorrelation.real(), r.autocorrelation.imag(), r.norm, r.energy, dt}) {
      write_csv_number(out, v);
      out << ",";
    }
    out << "0,0\n";
  }
}

void write_gamma(std::ostream& out, const std::vector<StepRecord>& records) {
  out << "t";
  const std::size_t n = records.empty() ? 0 : records.front().gamma_imag.size();
  for (std::size_t k = 0; k < n; ++k) out << ",gamma_i_" << k;
  out << "\n";
  for (const auto& r : records) {
    write_csv_number(out, r.t);
    for (double g : r.gamma_imag) {
      out << ",";
      write_csv_number(out, g);
    }
    out << "\n";
  }
}

TimeSeries read_timeseries(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("timeseries: empty input");
  std::vector<std::string> header;
  boost::algorithm::split(header, line, boost::algorithm::is_any_of(","));
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("timeseries: missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ct = column("t"), cre = column("re_C"), cim = column("im_C");
  TimeSeries ts;
  ts.label = "C";
  while (std::getline(in, line)) {
    if (boost::algorithm::trim_copy(line).empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
    if (f.size() < header.size()) throw ConfigError("timeseries: short row");
    const double t = to_double("t", f[ct]);
    // Event rows can repeat a time stamp; keep the first sample.
    if (!ts.times.empty() && !(t > ts.times.back())) continue;
    ts.times.push_back(t);
    ts.values.emplace_back(to_double("re_C", f[cre]), to_double("im_C", f[cim]));
  }
  return ts;
}

std::string RunStatus::line() const {
  if (ok()) return "ok";
  std::string msg = message;
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::string escaped;
  for (char c : msg) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c;
  }
  return "error kind=" + error_kind + " exit=" + std::to_string(exit_code) + " message=\"" + escaped + "\"";
}

RunStatus run_propagate(const ScenarioConfig& cfg, const RunOptions& opts, Trajectory* trajectory) {
  Trajectory local;
  Trajectory& tr = trajectory ? *trajectory : local;
  RunStatus status;
  try {
    prepare_dir(opts.out_dir);
    {
      auto out = open_out(opts.out_dir / "effective_config.ini");
      write_effective_config(cfg, out);
    }
    const auto V = cfg.build_potential();
    const auto wp0 = cfg.build_initial();
    try {
      propagate(wp0, V, cfg.constraint_specs(), cfg.integrator, tr);
    } catch (const Error& e) {
      status = status_from(e);
    }
    {
      auto out = open_out(opts.out_dir / "timeseries.csv");
      write_timeseries(out, tr.records);
    }
    {
      auto out = open_out(opts.out_dir / "gamma.csv");
      write_gamma(out, tr.records);
    }
    if (!tr.checkpoints.empty()) {
      prepare_dir(opts.out_dir / "checkpoints");
      for (std::size_t i = 0; i < tr.checkpoints.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint_%03zu.txt", i);
        auto out = open_out(opts.out_dir / "checkpoints" / name);
        write_checkpoint(out, tr.checkpoints[i].first, tr.checkpoints[i].second);
      }
    }
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    return status_from_std(e);
  }
  return status;
}

RunStatus run_reference(const ScenarioConfig& cfg, const RunOptions& opts, std::vector<ReferenceRecord>* records) {
  std::vector<ReferenceRecord> local;
  auto& recs = records ? *records : local;
  RunStatus status;
  double dt = 0.0;
  try {
    prepare_dir(opts.out_dir);
    {
      auto out = open_out(opts.out_dir / "effective_config.ini");
      write_effective_config(cfg, out);
    }
    const auto V = cfg.build_potential();
    const auto wp0 = cfg.build_initial();
    dt = cfg.reference_dt();
    const std::size_t n_steps = steps_for(cfg.integrator.t_end, dt, "integrator.t_end");
    const std::size_t every = steps_for(cfg.integrator.record_stride, dt, "integrator.record_stride");
    try {
      reference_run(wp0, V, cfg.reference.grid, dt, n_steps, every, recs, cfg.reference.leak_tol);
    } catch (const Error& e) {
      status = status_from(e);
    }
    auto out = open_out(opts.out_dir / "timeseries.csv");
    write_timeseries(out, recs, dt);
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    return status_from_std(e);
  }
  return status;
}

DeviationSummary deviations(const std::vector<StepRecord>& constrained, const std::vector<StepRecord>* frozen,
                            const std::vector<ReferenceRecord>& exact) {
  DeviationSummary s;
  auto lookup = [](const std::vector<StepRecord>& recs, double t, std::size_t& cursor) -> const StepRecord* {
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    while (cursor < recs.size() && recs[cursor].t < t - tol) ++cursor;
    if (cursor < recs.size() && std::abs(recs[cursor].t - t) <= tol) return &recs[cursor];
    return nullptr;
  };
  std::size_t ic = 0, iff = 0;
  for (const auto& ref : exact) {
    const StepRecord* c = lookup(constrained, ref.t, ic);
    if (!c) continue;
    // A frozen run that stopped early leaves NaN gaps instead of truncating the constrained series.
    const StepRecord* f = frozen ? lookup(*frozen, ref.t, iff) : nullptr;
    s.t.push_back(ref.t);
    const double dc = std::abs(c->autocorrelation - ref.autocorrelation);
    s.constrained.push_back(dc);
    if (dc > s.max_constrained) {
      s.max_constrained = dc;
      s.t_max_constrained = ref.t;
    }
    if (frozen && !f) s.frozen.push_back(std::numeric_limits<double>::quiet_NaN());
    if (f) {
      const double df = std::abs(f->autocorrelation - ref.autocorrelation);
      s.frozen.push_back(df);
      if (df > s.max_frozen) {
        s.max_frozen = df;
        s.t_max_frozen = ref.t;
      }
    }
  }
  return s;
}

RunStatus run_compare(const ScenarioConfig& cfg, const RunOptions& opts, DeviationSummary* summary) {
  try {
    prepare_dir(opts.out_dir);
    {
      auto out = open_out(opts.out_dir / "effective_config.ini");
      write_effective_config(cfg, out);
    }
    ScenarioConfig con = cfg;
    con.constraints.frozen_width = false;
    ScenarioConfig frz = cfg;
    frz.constraints.frozen_width = true;

    Trajectory tc, tf;
    std::vector<ReferenceRecord> ref;
    RunStatus sc, sf, sr;
    const auto policy = opts.serial ? std::launch::deferred : std::launch::async;
    auto fc = std::async(policy, [&] { return run_propagate(con, {opts.out_dir / "constrained", true}, &tc); });
    std::future<RunStatus> ff;
    if (cfg.compare.frozen)
      ff = std::async(policy, [&] { return run_propagate(frz, {opts.out_dir / "frozen", true}, &tf); });
    auto fr = std::async(policy, [&] { return run_reference(cfg, {opts.out_dir / "reference", true}, &ref); });
    sc = fc.get();
    if (cfg.compare.frozen) sf = ff.get();
    sr = fr.get();

    DeviationSummary s = deviations(tc.records, cfg.compare.frozen ? &tf.records : nullptr, ref);
    {
      auto out = open_out(opts.out_dir / "deviation.csv");
      out << "t,dev_constrained" << (cfg.compare.frozen ? ",dev_frozen" : "") << "\n";
      for (std::size_t i = 0; i < s.t.size(); ++i) {
        write_csv_number(out, s.t[i]);
        out << ",";
        write_csv_number(out, s.constrained[i]);
        if (cfg.compare.frozen) {
          out << ",";
          write_csv_number(out, s.frozen[i]);
        }
        out << "\n";
      }
    }
    {
      auto out = open_out(opts.out_dir / "summary.txt");
      out << std::setprecision(10);
      out << "samples " << s.t.size() << "\n";
      out << "max_dev_constrained " << s.max_constrained << " at_t " << s.t_max_constrained << "\n";
      if (cfg.compare.frozen) out << "max_dev_frozen " << s.max_frozen << " at_t " << s.t_max_frozen << "\n";
      out << "constrained_status " << sc.line() << "\n";
      if (cfg.compare.frozen) out << "frozen_status " << sf.line() << "\n";
      out << "reference_status " << sr.line() << "\n";
    }
    if (summary) *summary = std::move(s);
    for (const RunStatus* st : {&sr, &sc, &sf})
      if (!st->ok()) return *st;
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    return status_from_std(e);
  }
  return {};
}

RunStatus run_spectrum(const fs::path& input, const SpectrumOptions& options, const fs::path& out_dir) {
  try {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open " + input.string());
    const TimeSeries ts = read_timeseries(in);
    const Spectrum sp = spectrum(ts, options);
    prepare_dir(out_dir);
    {
      auto out = open_out(out_dir / "spectrum.csv");
      out << "E,power\n";
      for (std::size_t i = 0; i < sp.frequency.size(); ++i) {
        write_csv_number(out, sp.frequency[i]);
        out << ",";
        write_csv_number(out, sp.power[i]);
        out << "\n";
      }
    }
    auto out = open_out(out_dir / "peaks.csv");
    out << "E\n";
    for (double e : sp.peaks) {
      write_csv_number(out, e);
      out << "\n";
    }
    out << std::setprecision(17) << "# bin_width " << sp.bin_width << "\n# resampling_error " << sp.resampling_error
        << "\n";
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    return status_from_std(e);
  }
  return {};
}

}  // namespace cgwp
