#include "nvmag/runner.hpp"

#include "nvmag/analysis.hpp"
#include "nvmag/fit.hpp"
#include "nvmag/kinetics.hpp"
#include "nvmag/lockin.hpp"
#include "nvmag/odmr.hpp"
#include "nvmag/parallel.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/svg.hpp"
#include "nvmag/units.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace nvmag::runner {

namespace {

struct ModeName {
  Mode mode;
  const char* name;
};
constexpr ModeName mode_table[] = {{Mode::simulate_odmr, "simulate-odmr"},
                                   {Mode::simulate_ramsey, "simulate-ramsey"},
                                   {Mode::simulate_repolarization, "simulate-repolarization"},
                                   {Mode::optimize, "optimize"},
                                   {Mode::analyze, "analyze"},
                                   {Mode::calibrate, "calibrate"},
                                   {Mode::gradiometer, "gradiometer"}};

enum class Kind { number, integer, boolean, text, path, list, choice };

struct Field {
  std::string key;
  const char* def;  // nullptr: required
  Kind kind;
  double lo = -INFINITY;
  double hi = INFINITY;
  std::vector<std::string> choices{};
};

const double inf = INFINITY;

std::vector<Field> kinetics_fields(bool rabi_required) {
  return {
      {"kinetics.gamma_p_hz", "26000", Kind::number, 0, inf},
      {"kinetics.t1_s", "0.006", Kind::number, 1e-9, inf},
      {"kinetics.t2_star_s", "8.5e-06", Kind::number, 1e-12, inf},
      {"kinetics.r47_hz", "7900000", Kind::number, 0, inf},
      {"kinetics.detuning_hz", "0", Kind::number, -1e9, 1e9},
      {"kinetics.rabi_hz", rabi_required ? nullptr : "0", Kind::number, 0, 1e9},
  };
}

std::vector<Field> schema(Mode m) {
  std::vector<Field> f{{"run.seed", "1", Kind::integer, 0, 9.0e15}};
  auto add = [&](std::vector<Field> more) { f.insert(f.end(), more.begin(), more.end()); };
  switch (m) {
    case Mode::simulate_odmr:
      add(kinetics_fields(true));
      add({{"odmr.freq_min_hz", nullptr, Kind::number, -1e9, 1e9},
           {"odmr.freq_max_hz", nullptr, Kind::number, -1e9, 1e9},
           {"odmr.points", nullptr, Kind::integer, 3, 100000},
           {"modulation.kind", "none", Kind::choice, 0, 0, {"none", "fm", "pm"}},
           {"modulation.f_m_hz", "9000", Kind::number, 1e-3, 1e8},
           {"modulation.f_d_hz", "18000", Kind::number, 0, 1e9}});
      break;
    case Mode::simulate_ramsey:
      add(kinetics_fields(true));
      add({{"ramsey.tau_m_s", nullptr, Kind::number, 0, 1},
           {"ramsey.t_seq_s", nullptr, Kind::number, 1e-9, 10},
           {"ramsey.detuning_min_hz", nullptr, Kind::number, -1e9, 1e9},
           {"ramsey.detuning_max_hz", nullptr, Kind::number, -1e9, 1e9},
           {"ramsey.points", nullptr, Kind::integer, 2, 100000}});
      break;
    case Mode::simulate_repolarization:
      add(kinetics_fields(false));
      add({{"repolarization.duration_s", nullptr, Kind::number, 1e-9, 10},
           {"repolarization.samples", "501", Kind::integer, 3, 1000000}});
      break;
    case Mode::optimize:
      add(kinetics_fields(false));
      add({{"optimize.s_min", nullptr, Kind::number, 1e-12, 1},
           {"optimize.s_max", nullptr, Kind::number, 1e-12, 1},
           {"optimize.s_points", nullptr, Kind::integer, 1, 10000},
           {"optimize.s_spacing", "log", Kind::choice, 0, 0, {"log", "linear"}},
           {"optimize.rabi_min_hz", nullptr, Kind::number, 1e-6, 1e9},
           {"optimize.rabi_max_hz", nullptr, Kind::number, 1e-6, 1e9},
           {"optimize.rabi_points", nullptr, Kind::integer, 1, 10000},
           {"optimize.gamma_p_sat_hz", "740000000", Kind::number, 1e-6, inf},
           {"optimize.addressed_fraction", "0.08333333333333333", Kind::number, 1e-9, 1},
           {"optimize.photon_rate_ref_hz", "4.6e+15", Kind::number, 1e-6, inf},
           {"optimize.s_ref", "0.0003", Kind::number, 1e-12, 1},
           {"optimize.p_f", "0.77", Kind::number, 1e-6, 10},
           {"optimize.measurement_time_s", "1", Kind::number, 1e-9, inf},
           {"optimize.volume_mm3", "0.125", Kind::number, 1e-12, inf}});
      break;
    case Mode::analyze:
      add({{"analysis.input", nullptr, Kind::path},
           {"analysis.scalar_factor_v_per_t", "0", Kind::number, 0, inf},
           {"analysis.band_lo_hz", nullptr, Kind::number, 0, inf},
           {"analysis.band_hi_hz", nullptr, Kind::number, 0, inf},
           {"analysis.detrend", "true", Kind::boolean},
           {"analysis.window", "rectangular", Kind::choice, 0, 0, {"rectangular", "hann"}},
           {"analysis.carrier_hz", "0", Kind::number, 0, inf},
           {"analysis.tones_hz", "", Kind::list, 0, inf},
           {"analysis.cutoff_hz", "49", Kind::number, 1e-9, inf},
           {"analysis.filter_order", "4", Kind::integer, 1, 16}});
      break;
    case Mode::calibrate:
      add({{"calibrate.carrier_hz", nullptr, Kind::number, 1e-6, inf},
           {"calibrate.tones_hz", nullptr, Kind::list, 0, inf},
           {"calibrate.input", "", Kind::path},
           {"calibrate.cutoff_hz", "49", Kind::number, 1e-9, inf},
           {"calibrate.filter_order", "4", Kind::integer, 1, 16},
           {"calibrate.detrend", "true", Kind::boolean},
           {"calibrate.save_trace", "false", Kind::boolean},
           {"calibrate.sample_rate_hz", "900", Kind::number, 1e-6, inf},
           {"calibrate.samples", "65536", Kind::integer, 16, 1e8},
           {"calibrate.tone_amplitude_t", "1.5e-10", Kind::number, 0, inf},
           {"calibrate.noise_sigma_t", "1e-10", Kind::number, 0, inf},
           {"calibrate.ramp_slope_t_per_s", "0", Kind::number, -inf, inf}});
      break;
    case Mode::gradiometer:
      add({{"gradiometer.source", nullptr, Kind::choice, 0, 0, {"file", "synthetic"}},
           {"gradiometer.input1", "", Kind::path},
           {"gradiometer.input2", "", Kind::path},
           {"gradiometer.sample_rate_hz", "900", Kind::number, 1e-6, inf},
           {"gradiometer.samples", "65536", Kind::integer, 16, 1e8},
           {"gradiometer.common_hz", "50", Kind::number, 0, inf},
           {"gradiometer.common_amplitude_t", "1e-09", Kind::number, 0, inf},
           {"gradiometer.differential_hz", "7", Kind::number, 0, inf},
           {"gradiometer.differential_amplitude_t", "1e-10", Kind::number, 0, inf},
           {"gradiometer.noise_sigma_t", "1e-11", Kind::number, 0, inf}});
      break;
  }
  return f;
}

std::string fmt_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool parse_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  return r.ec == std::errc() && r.ptr == e && b != e;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Returns canonical text or an error message.
std::optional<std::string> canonical(const Field& f, const std::string& raw, const std::filesystem::path& base,
                                     std::string& err) {
  const std::string s = trim(raw);
  auto range = [&](double v) {
    if (!(v >= f.lo && v <= f.hi)) {
      err = f.key + ": value " + s + " outside [" + fmt_number(f.lo) + ", " + fmt_number(f.hi) + "]";
      return false;
    }
    return true;
  };
  switch (f.kind) {
    case Kind::number: {
      double v;
      if (!parse_double(s, v) || !std::isfinite(v)) {
        err = f.key + ": expected a number, got '" + s + "'";
        return std::nullopt;
      }
      if (!range(v)) return std::nullopt;
      return fmt_number(v);
    }
    case Kind::integer: {
      double v;
      if (!parse_double(s, v) || v != std::floor(v)) {
        err = f.key + ": expected an integer, got '" + s + "'";
        return std::nullopt;
      }
      if (!range(v)) return std::nullopt;
      return std::to_string(static_cast<long long>(v));
    }
    case Kind::boolean:
      if (s == "true" || s == "1" || s == "yes") return "true";
      if (s == "false" || s == "0" || s == "no") return "false";
      err = f.key + ": expected true/false, got '" + s + "'";
      return std::nullopt;
    case Kind::text: return s;
    case Kind::path: {
      if (s.empty()) return s;
      std::filesystem::path p(s);
      if (p.is_relative() && !base.empty()) p = base / p;
      return std::filesystem::absolute(p).lexically_normal().string();
    }
    case Kind::list: {
      if (s.empty() && f.def && std::string(f.def).empty()) return s;
      std::vector<std::string> parts;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        double v;
        item = trim(item);
        if (!parse_double(item, v) || !std::isfinite(v)) {
          err = f.key + ": expected comma-separated numbers, got '" + s + "'";
          return std::nullopt;
        }
        if (!range(v)) return std::nullopt;
        parts.push_back(fmt_number(v));
      }
      if (parts.empty()) {
        err = f.key + ": empty list";
        return std::nullopt;
      }
      std::string out;
      for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
      return out;
    }
    case Kind::choice:
      if (std::find(f.choices.begin(), f.choices.end(), s) != f.choices.end()) return s;
      {
        std::string opts;
        for (const auto& c : f.choices) opts += (opts.empty() ? "" : "|") + c;
        err = f.key + ": expected one of " + opts + ", got '" + s + "'";
      }
      return std::nullopt;
  }
  return std::nullopt;
}

void cross_checks(const ExperimentConfig& c, std::vector<std::string>& problems) {
  auto less = [&](const char* a, const char* b) {
    if (c.values.count(a) && c.values.count(b) && !(c.number(a) < c.number(b)))
      problems.push_back(std::string(a) + " must be < " + b);
  };
  switch (c.mode) {
    case Mode::simulate_odmr:
      less("odmr.freq_min_hz", "odmr.freq_max_hz");
      if (c.values.count("kinetics.rabi_hz") && !(c.number("kinetics.rabi_hz") > 0))
        problems.push_back("kinetics.rabi_hz must be > 0 for ODMR spectra");
      break;
    case Mode::simulate_ramsey:
      less("ramsey.detuning_min_hz", "ramsey.detuning_max_hz");
      less("ramsey.tau_m_s", "ramsey.t_seq_s");
      if (c.values.count("kinetics.rabi_hz") && !(c.number("kinetics.rabi_hz") > 0))
        problems.push_back("kinetics.rabi_hz must be > 0 for Ramsey pulses");
      break;
    case Mode::optimize:
      if (c.values.count("optimize.s_min") && c.values.count("optimize.s_max") &&
          c.number("optimize.s_min") > c.number("optimize.s_max"))
        problems.push_back("optimize.s_min must be <= optimize.s_max");
      if (c.values.count("optimize.rabi_min_hz") && c.values.count("optimize.rabi_max_hz") &&
          c.number("optimize.rabi_min_hz") > c.number("optimize.rabi_max_hz"))
        problems.push_back("optimize.rabi_min_hz must be <= optimize.rabi_max_hz");
      break;
    case Mode::analyze:
      if (c.values.count("analysis.tones_hz") && !c.text("analysis.tones_hz").empty() &&
          !(c.number("analysis.carrier_hz") > 0))
        problems.push_back("analysis.carrier_hz: required when analysis.tones_hz is set");
      if (c.values.count("analysis.band_lo_hz") && c.values.count("analysis.band_hi_hz") &&
          c.number("analysis.band_lo_hz") > c.number("analysis.band_hi_hz"))
        problems.push_back("analysis.band_lo_hz must be <= analysis.band_hi_hz");
      break;
    case Mode::calibrate:
      if (c.values.count("calibrate.carrier_hz") && c.values.count("calibrate.cutoff_hz") &&
          !(c.number("calibrate.cutoff_hz") < c.number("calibrate.carrier_hz")))
        problems.push_back("calibrate.cutoff_hz must be below calibrate.carrier_hz");
      break;
    case Mode::gradiometer:
      if (c.values.count("gradiometer.source") && c.text("gradiometer.source") == "file") {
        if (c.text("gradiometer.input1").empty()) problems.push_back("gradiometer.input1: missing (source = file)");
        if (c.text("gradiometer.input2").empty()) problems.push_back("gradiometer.input2: missing (source = file)");
      }
      break;
    case Mode::simulate_repolarization: break;
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::optional<Mode> parse_mode(const std::string& name) {
  for (const auto& m : mode_table)
    if (name == m.name) return m.mode;
  return std::nullopt;
}

std::string mode_name(Mode m) {
  for (const auto& e : mode_table)
    if (e.mode == m) return e.name;
  return "unknown";
}

std::vector<std::string> mode_names() {
  std::vector<std::string> v;
  for (const auto& m : mode_table) v.push_back(m.name);
  return v;
}

namespace {
std::string join_problems(const std::vector<std::string>& p) {
  std::string s = "invalid configuration:";
  for (const auto& x : p) s += "\n  " + x;
  return s;
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> p) : Error(join_problems(p)), problems(std::move(p)) {}

double ExperimentConfig::number(const std::string& key) const {
  double v = 0.0;
  parse_double(text(key), v);
  return v;
}

long ExperimentConfig::integer(const std::string& key) const { return std::stol(text(key)); }

bool ExperimentConfig::flag(const std::string& key) const { return text(key) == "true"; }

const std::string& ExperimentConfig::text(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw Error("config key not resolved: " + key);
  return it->second;
}

std::vector<double> ExperimentConfig::list(const std::string& key) const {
  std::vector<double> out;
  if (text(key).empty()) return out;
  std::stringstream ss(text(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    parse_double(item, v);
    out.push_back(v);
  }
  return out;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "; nvmag " << mode_name(mode) << " resolved configuration\n";
  std::string section;
  for (const auto& [k, v] : values) {
    const auto dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    out << k.substr(dot + 1) << " = " << v << '\n';
  }
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(mode_name(mode) + "\n" + serialize()); }

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

std::vector<std::string> ExperimentConfig::header_lines() const {
  std::vector<std::string> h{"nvmag " + std::string(version) + " mode=" + mode_name(mode) +
                             " config_hash=" + hash_hex()};
  for (const auto& [k, v] : values) h.push_back("config " + k + " = " + v);
  return h;
}

ExperimentConfig resolve_config(Mode mode, const std::string& ini_text, std::optional<std::uint64_t> seed,
                                const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::vector<std::string> problems;
  try {
    std::istringstream in(ini_text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError({std::string("config syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
  }
  std::map<std::string, std::string> given;
  for (const auto& [sec, sub] : tree) {
    if (sub.empty()) {
      problems.push_back(sec + ": keys must live inside a [section]");
      continue;
    }
    for (const auto& [key, val] : sub) given[sec + "." + key] = val.data();
  }
  const auto fields = schema(mode);
  std::set<std::string> known;
  ExperimentConfig c;
  c.mode = mode;
  for (const Field& f : fields) {
    known.insert(f.key);
    std::string raw;
    if (const auto it = given.find(f.key); it != given.end()) raw = it->second;
    else if (f.def) raw = f.def;
    else {
      problems.push_back(f.key + ": missing required field");
      continue;
    }
    std::string err;
    if (auto v = canonical(f, raw, base_dir, err)) c.values[f.key] = *v;
    else problems.push_back(err);
  }
  for (const auto& [k, v] : given)
    if (!known.count(k)) problems.push_back(k + ": unknown field for mode " + mode_name(mode));
  if (seed) c.values["run.seed"] = std::to_string(*seed);
  if (problems.empty()) cross_checks(c, problems);
  if (!problems.empty()) throw ValidationError(problems);
  c.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  return c;
}

ExperimentConfig load_config(Mode mode, const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"config file not readable: " + path.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return resolve_config(mode, ss.str(), seed, std::filesystem::absolute(path).parent_path());
}

Report emit_report(const Results& results, const ExperimentConfig* config) {
  Report r;
  r.json = nlohmann::json::object();
  r.json["status"] = results.status;
  if (!results.mode.empty()) {
    r.json["mode"] = results.mode;
    r.json["version"] = version;
    if (config) {
      r.json["config_hash"] = config->hash_hex();
      r.json["seed"] = config->seed;
      nlohmann::json cfg = nlohmann::json::object();
      for (const auto& [k, v] : config->values) cfg[k] = v;
      r.json["config"] = cfg;
    }
    r.json["results"] = results.data;
    if (!results.artifacts.empty()) r.json["artifacts"] = results.artifacts;
  }
  std::ostringstream t;
  t << "nvmag " << version;
  if (!results.mode.empty()) t << " " << results.mode;
  t << ": " << results.status << '\n';
  if (config) t << "config hash " << config->hash_hex() << ", seed " << config->seed << '\n';
  for (const auto& line : results.summary) t << "  " << line << '\n';
  r.text = t.str();
  return r;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

kinetics::KineticsParams kinetics_from(const ExperimentConfig& c) {
  kinetics::KineticsParams p;
  p.gamma_p = c.number("kinetics.gamma_p_hz");
  p.gamma_1 = 1.0 / c.number("kinetics.t1_s");
  p.gamma_2_star = 1.0 / c.number("kinetics.t2_star_s");
  p.r_47 = c.number("kinetics.r47_hz");
  p.omega_r = hz_to_rad_s(c.number("kinetics.rabi_hz"));
  p.delta = hz_to_rad_s(c.number("kinetics.detuning_hz"));
  return p;
}

std::vector<double> grid(double lo, double hi, long n, bool log) {
  std::vector<double> g(n);
  for (long k = 0; k < n; ++k) {
    const double u = n > 1 ? static_cast<double>(k) / (n - 1) : 0.0;
    g[k] = log ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u;
  }
  return g;
}

void write_two_column(const std::filesystem::path& path, const std::vector<std::string>& header, const std::string& cols,
                      const std::vector<double>& a, const std::vector<double>& b) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& h : header) std::fprintf(f, "# %s\n", h.c_str());
  std::fprintf(f, "%s\n", cols.c_str());
  for (std::size_t k = 0; k < a.size(); ++k) std::fprintf(f, "%.17g,%.17g\n", a[k], b[k]);
  std::fclose(f);
}

struct Context {
  const ExperimentConfig& cfg;
  std::filesystem::path dir;
  std::string stem;
  Results& res;

  std::filesystem::path file(const std::string& suffix) {
    const std::string name = stem + suffix;
    res.artifacts.push_back(name);
    return dir / name;
  }
};

void run_simulate_odmr(Context& ctx) {
  const auto& c = ctx.cfg;
  const kinetics::KineticsParams p = kinetics_from(c);
  const auto g = odmr::linear_grid(c.number("odmr.freq_min_hz"), c.number("odmr.freq_max_hz"), c.integer("odmr.points"));
  const odmr::OdmrSpectrum s = odmr::cw_spectrum(p, g);
  const odmr::ScalarFactor sf = odmr::scalar_factor(s);
  const double formula = odmr::cw_linewidth(p.gamma_1, p.gamma_2_star, p.gamma_p, p.omega_r);
  s.write_csv(ctx.file(".csv"), c.header_lines());
  std::vector<svg::Series> series{{"cw", s.freqs, s.signal}};

  auto& d = ctx.res.data;
  d["contrast"] = s.contrast;
  d["fwhm_hz"] = s.fwhm_hz;
  d["hwhm_hz"] = s.hwhm_hz();
  d["center_hz"] = s.center_hz;
  d["formula_half_width_hz"] = formula;
  d["pulsed_linewidth_hz"] = odmr::pulsed_odmr_linewidth(1.0 / p.gamma_2_star);
  d["scalar_factor_per_t"] = sf.per_tesla;
  if (sf.flat) d["warning"] = sf.warning;
  ctx.res.summary.push_back("contrast " + fmt("%.4g", 100 * s.contrast) + " %, fitted HWHM " +
                            fmt("%.4g", s.hwhm_hz() / 1e3) + " kHz (formula " + fmt("%.4g", formula / 1e3) + " kHz)");

  const std::string kind = c.text("modulation.kind");
  if (kind != "none") {
    const double fm = c.number("modulation.f_m_hz"), fd = c.number("modulation.f_d_hz");
    const mw::MWModulation mod =
        kind == "fm" ? mw::MWModulation::fm(0.0, fm, fd) : mw::MWModulation::pm(0.0, fm, fd / fm);
    const odmr::OdmrSpectrum l = odmr::lockin_odmr_spectrum(p, mod, g);
    const odmr::OdmrSpectrum st = odmr::static_difference(p, fd, g);
    l.write_csv(ctx.file("-lockin.csv"), c.header_lines());
    const auto peak = [](const odmr::OdmrSpectrum& x) {
      double m = 0.0;
      for (double v : x.signal) m = std::max(m, std::abs(v));
      return m;
    };
    const double penalty = peak(st) / peak(l);
    d["lockin"] = {{"scalar_factor_per_t", odmr::scalar_factor(l).per_tesla},
                   {"zero_crossing_hz", l.center_hz},
                   {"carson_bandwidth_hz", mw::carson_bandwidth(mod)},
                   {"detection_phase_rad", l.lockin_phase},
                   {"modulation_penalty_simulated", penalty},
                   {"modulation_penalty_reference", 9.45}};
    ctx.res.summary.push_back("lock-in zero crossing " + fmt("%.4g", l.center_hz) + " Hz, modulation penalty " +
                              fmt("%.3g", penalty) + " (reference 9.45)");
    series.push_back({"lock-in", l.freqs, l.signal});
  }
  svg::line_plot(ctx.file(".svg"), {"ODMR spectrum", "detuning (Hz)", "signal (model units)"}, series);
}

void run_simulate_ramsey(Context& ctx) {
  const auto& c = ctx.cfg;
  const kinetics::KineticsParams p = kinetics_from(c);
  const auto sch = lockin::ce_ramsey_schedule(p.omega_r, c.number("ramsey.tau_m_s"), c.number("ramsey.t_seq_s"));
  const auto lcfg = lockin::ce_ramsey_lockin(sch);
  const auto det = grid(c.number("ramsey.detuning_min_hz"), c.number("ramsey.detuning_max_hz"),
                        c.integer("ramsey.points"), false);
  std::vector<double> x(det.size()), y(det.size());
  parallel_for(det.size(), [&](std::size_t k) {
    const auto o = lockin::simulate_ce_ramsey_output(p, sch, det[k], lcfg);
    x[k] = o.in_phase;
    y[k] = o.quadrature;
  });
  {
    std::FILE* f = std::fopen(ctx.file(".csv").string().c_str(), "w");
    if (!f) throw Error("cannot write Ramsey CSV");
    for (const auto& h : c.header_lines()) std::fprintf(f, "# %s\n", h.c_str());
    std::fprintf(f, "detuning_hz,in_phase,quadrature\n");
    for (std::size_t k = 0; k < det.size(); ++k) std::fprintf(f, "%.17g,%.17g,%.17g\n", det[k], x[k], y[k]);
    std::fclose(f);
  }
  double slope = 0.0;
  for (std::size_t k = 1; k + 1 < det.size(); ++k)
    slope = std::max(slope, std::abs((x[k + 1] - x[k - 1]) / (det[k + 1] - det[k - 1])));
  auto& d = ctx.res.data;
  d["tau_r_s"] = sch.tau_r;
  d["demod_frequency_hz"] = sch.demod_frequency();
  d["scalar_factor_per_t"] = slope * gamma_nv;
  ctx.res.summary.push_back("tau_r " + fmt("%.6g", sch.tau_r * 1e6) + " us, demodulation " +
                            fmt("%.6g", sch.demod_frequency()) + " Hz, max fringe slope x gamma " +
                            fmt("%.4g", slope * gamma_nv) + " /T");
  svg::line_plot(ctx.file(".svg"), {"CE-Ramsey fringe", "detuning (Hz)", "lock-in output"},
                 {{"in-phase", det, x}, {"quadrature", det, y}});
}

void run_repolarization(Context& ctx) {
  const auto& c = ctx.cfg;
  const kinetics::KineticsParams p = kinetics_from(c);
  const double dur = c.number("repolarization.duration_s");
  const TimeTrace tr = kinetics::simulate_repolarization(p, dur, c.integer("repolarization.samples"));
  std::vector<double> t(tr.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = tr.time(k);
  write_two_column(ctx.file(".csv"), c.header_lines(), "time_s,fluorescence", t, tr.samples);
  std::vector<double> tt(t.begin() + 1, t.end()), yy(tr.samples.begin() + 1, tr.samples.end());
  const fit::Exponential f = fit::exponential(tt, yy);
  auto& d = ctx.res.data;
  d["time_constant_s"] = f.tau;
  d["final_fluorescence"] = tr.samples.back();
  d["initial_fluorescence"] = tr.samples.front();
  ctx.res.summary.push_back("recovery time constant " + fmt("%.4g", f.tau * 1e6) + " us");
  svg::line_plot(ctx.file(".svg"), {"Repolarization", "time (s)", "fluorescence (model units)"}, {{"", t, tr.samples}});
}

void run_optimize(Context& ctx) {
  const auto& c = ctx.cfg;
  sensitivity::CwModel m;
  m.base = kinetics_from(c);
  m.gamma_p_sat = c.number("optimize.gamma_p_sat_hz");
  m.addressed_fraction = c.number("optimize.addressed_fraction");
  m.photon_rate_ref = c.number("optimize.photon_rate_ref_hz");
  m.s_ref = c.number("optimize.s_ref");
  m.p_f = c.number("optimize.p_f");
  m.measurement_time = c.number("optimize.measurement_time_s");
  const bool log = c.text("optimize.s_spacing") == "log";
  const auto sg = grid(c.number("optimize.s_min"), c.number("optimize.s_max"), c.integer("optimize.s_points"), log);
  auto og = grid(c.number("optimize.rabi_min_hz"), c.number("optimize.rabi_max_hz"), c.integer("optimize.rabi_points"),
                 false);
  for (double& o : og) o = hz_to_rad_s(o);
  const double t1 = c.number("kinetics.t1_s"), t2 = c.number("kinetics.t2_star_s");
  const auto r = sensitivity::optimize_cw(t1, t2, sg, og, m);
  r.write_csv(ctx.file(".csv"), c.header_lines());

  const auto& b = r.best;
  const double eta = b.delta_b * std::sqrt(m.measurement_time);
  const auto rep = sensitivity::make_report(eta, b.contrast, b.linewidth, b.photon_rate, m.measurement_time,
                                            c.number("optimize.volume_mm3"));
  auto& d = ctx.res.data;
  d["optimum"] = {{"s", b.s}, {"rabi_hz", rad_s_to_hz(b.omega_r)}, {"gamma_p_hz", b.gamma_p}};
  d["sensitivity"] = {{"delta_b", rep.delta_b},     {"eta", rep.eta},
                      {"eta_v", rep.eta_v},         {"contrast", rep.contrast},
                      {"linewidth_hz", rep.linewidth}, {"photon_rate_hz", rep.photon_rate},
                      {"measurement_time_s", rep.measurement_time},
                      {"hyperfine_factor", rep.hyperfine}, {"dr_factor", rep.dr},
                      {"enhanced_eta", rep.enhanced_eta()}};
  d["model"] = {{"gamma_p_sat_hz", m.gamma_p_sat},
                {"addressed_fraction", m.addressed_fraction},
                {"note", "gamma_p_sat and addressed_fraction are fitted model parameters"}};
  d["grid"] = {{"s_points", r.n_s}, {"rabi_points", r.n_omega}};
  ctx.res.summary.push_back("optimum s = " + fmt("%.3g", b.s) + ", Omega_R/2pi = " +
                            fmt("%.4g", rad_s_to_hz(b.omega_r) / 1e3) + " kHz");
  ctx.res.summary.push_back("delta B = " + fmt("%.4g", rep.delta_b * 1e12) + " pT at " +
                            fmt("%.3g", m.measurement_time) + " s, eta = " + fmt("%.4g", rep.eta * 1e12) +
                            " pT/sqrt(Hz), enhanced " + fmt("%.4g", rep.enhanced_eta() * 1e12) + " pT/sqrt(Hz)");

  std::vector<double> ox, oy;
  for (const auto& pt : r.map)
    if (pt.s == b.s) {
      ox.push_back(rad_s_to_hz(pt.omega_r));
      oy.push_back(pt.delta_b);
    }
  svg::line_plot(ctx.file(".svg"), {"Shot-noise delta B at optimum s", "Rabi frequency (Hz)", "delta B (T)", false, true},
                 {{"", ox, oy}});
}

void run_analyze(Context& ctx) {
  const auto& c = ctx.cfg;
  TimeTrace tr = load_trace(c.text("analysis.input"));
  auto& d = ctx.res.data;
  if (c.flag("analysis.detrend")) {
    const auto dt = analysis::detrend_linear(tr);
    d["detrend"] = {{"slope_per_s", dt.slope}, {"intercept", dt.intercept}};
    tr = dt.residual;
  }
  const double sfv = c.number("analysis.scalar_factor_v_per_t");
  const auto win = c.text("analysis.window") == "hann" ? analysis::Window::hann : analysis::Window::rectangular;
  const auto spec = analysis::noise_spectrum(tr, sfv > 0 ? std::optional<double>(sfv) : std::nullopt, win);
  spec.write_csv(ctx.file(".csv"), c.header_lines());
  const auto fl = analysis::min_detectable_field(spec, c.number("analysis.band_lo_hz"), c.number("analysis.band_hi_hz"));
  const std::string u = unit_suffix(spec.unit);
  d["floor"] = fl.floor;
  d["eta"] = fl.eta;
  d["band_hz"] = {fl.f_lo, fl.f_hi};
  d["bins"] = fl.bins;
  d["measurement_time_s"] = spec.measurement_time;
  d["resolution_hz"] = spec.resolution;
  d["unit"] = u.empty() ? "arbitrary" : (u == "t" ? "tesla" : "volt");
  ctx.res.summary.push_back("resolution " + fmt("%.4g", spec.resolution * 1e3) + " mHz over " +
                            fmt("%.4g", spec.measurement_time) + " s");
  const std::string sym = spec.unit == Unit::tesla ? " T" : spec.unit == Unit::volt ? " V" : "";
  ctx.res.summary.push_back("floor " + fmt("%.4g", fl.floor) + sym + ", 1-Hz normalized " + fmt("%.4g", fl.eta) + sym +
                            "/sqrt(Hz) in band " + fmt("%.4g", fl.f_lo) + "-" + fmt("%.4g", fl.f_hi) + " Hz");
  const auto tones = c.list("analysis.tones_hz");
  if (!tones.empty()) {
    auto lcfg = analysis::calibration_lockin(c.number("analysis.carrier_hz"));
    lcfg.cutoff = c.number("analysis.cutoff_hz");
    lcfg.filter_order = static_cast<int>(c.integer("analysis.filter_order"));
    TimeTrace in = tr;
    if (sfv > 0 && in.unit == Unit::volt) {
      for (double& v : in.samples) v = analysis::volts_to_tesla(v, sfv);
      in.unit = Unit::tesla;
    }
    const auto rec = analysis::recover_calibration_tones(in, c.number("analysis.carrier_hz"), tones, lcfg);
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t k = 0; k < rec.freqs.size(); ++k) {
      arr.push_back({{"freq_hz", rec.freqs[k]}, {"amplitude", rec.amplitudes[k]}});
      ctx.res.summary.push_back("tone " + fmt("%g", rec.freqs[k]) + " Hz: " + fmt("%.4g", rec.amplitudes[k]) + " " +
                                (in.unit == Unit::tesla ? "T" : in.unit == Unit::volt ? "V" : "(arb.)"));
    }
    d["tones"] = arr;
  }
  svg::line_plot(ctx.file(".svg"), {"Noise spectrum", "frequency (Hz)", "amplitude", false, true},
                 {{"", std::vector<double>(spec.freqs.begin() + 1, spec.freqs.end()),
                   std::vector<double>(spec.amplitude.begin() + 1, spec.amplitude.end())}});
}

void run_calibrate(Context& ctx) {
  const auto& c = ctx.cfg;
  TimeTrace tr;
  auto& d = ctx.res.data;
  const std::string input = c.text("calibrate.input");
  if (input.empty()) {
    analysis::CalibrationSynth s;
    s.sample_rate = c.number("calibrate.sample_rate_hz");
    s.samples = static_cast<std::size_t>(c.integer("calibrate.samples"));
    s.carrier = c.number("calibrate.carrier_hz");
    s.tone_freqs = c.list("calibrate.tones_hz");
    s.tone_amplitude = c.number("calibrate.tone_amplitude_t");
    s.noise_sigma = c.number("calibrate.noise_sigma_t");
    s.ramp_slope = c.number("calibrate.ramp_slope_t_per_s");
    tr = analysis::synthetic_calibration_trace(s, ctx.cfg.seed);
    d["source"] = "synthetic";
    if (c.flag("calibrate.save_trace")) save_trace(tr, ctx.file("-trace.csv"), c.header_lines());
  } else {
    tr = load_trace(input);
    d["source"] = input;
  }
  if (c.flag("calibrate.detrend")) {
    const auto dt = analysis::detrend_linear(tr);
    d["detrend"] = {{"slope_per_s", dt.slope}, {"residual_slope_per_s", analysis::detrend_linear(dt.residual).slope}};
    tr = dt.residual;
  }
  auto lcfg = analysis::calibration_lockin(c.number("calibrate.carrier_hz"));
  lcfg.cutoff = c.number("calibrate.cutoff_hz");
  lcfg.filter_order = static_cast<int>(c.integer("calibrate.filter_order"));
  const auto rec = analysis::recover_calibration_tones(tr, c.number("calibrate.carrier_hz"), c.list("calibrate.tones_hz"), lcfg);
  rec.baseband.write_csv(ctx.file(".csv"), c.header_lines());
  nlohmann::json tones = nlohmann::json::array();
  for (std::size_t k = 0; k < rec.freqs.size(); ++k) {
    tones.push_back({{"freq_hz", rec.freqs[k]}, {"amplitude", rec.amplitudes[k]}});
    ctx.res.summary.push_back("tone " + fmt("%g", rec.freqs[k]) + " Hz: " + fmt("%.4g", rec.amplitudes[k] * 1e12) +
                              " pT");
  }
  d["tones"] = tones;
  d["resolution_hz"] = rec.baseband.resolution;
  d["measurement_time_s"] = rec.baseband.measurement_time;
  svg::line_plot(ctx.file(".svg"), {"Demodulated baseband spectrum", "frequency (Hz)", "amplitude (T)", false, true},
                 {{"", std::vector<double>(rec.baseband.freqs.begin() + 1, rec.baseband.freqs.end()),
                   std::vector<double>(rec.baseband.amplitude.begin() + 1, rec.baseband.amplitude.end())}});
}

void run_gradiometer(Context& ctx) {
  const auto& c = ctx.cfg;
  TimeTrace a, b;
  auto& d = ctx.res.data;
  const bool synthetic = c.text("gradiometer.source") == "synthetic";
  if (synthetic) {
    analysis::GaussianNoise noise(c.seed);
    const double fs = c.number("gradiometer.sample_rate_hz");
    const std::size_t n = static_cast<std::size_t>(c.integer("gradiometer.samples"));
    const double fc = c.number("gradiometer.common_hz"), ac = c.number("gradiometer.common_amplitude_t");
    const double fd = c.number("gradiometer.differential_hz"), ad = c.number("gradiometer.differential_amplitude_t");
    const double sig = c.number("gradiometer.noise_sigma_t");
    a.sample_rate = b.sample_rate = fs;
    a.unit = b.unit = Unit::tesla;
    a.samples.resize(n);
    b.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = k / fs;
      const double cm = ac * std::sin(two_pi * fc * t), dm = 0.5 * ad * std::sin(two_pi * fd * t);
      a.samples[k] = cm + dm + sig * noise();
      b.samples[k] = cm - dm + sig * noise();
    }
    const TimeTrace diff = analysis::gradiometer_difference(a, b);
    const double sup = 20.0 * std::log10(std::max(analysis::tone_amplitude(diff, fc), 1e-300) /
                                         analysis::tone_amplitude(a, fc));
    d["common_mode_suppression_db"] = sup;
    d["differential_amplitude"] = analysis::tone_amplitude(diff, fd);
    ctx.res.summary.push_back("common-mode suppression " + fmt("%.1f", sup) + " dB");
  } else {
    a = load_trace(c.text("gradiometer.input1"));
    b = load_trace(c.text("gradiometer.input2"));
  }
  const TimeTrace diff = analysis::gradiometer_difference(a, b);
  auto rms = [](const TimeTrace& t) {
    const auto r = analysis::detrend_linear(t).residual;
    double s = 0.0;
    for (double v : r.samples) s += v * v;
    return std::sqrt(s / r.size());
  };
  d["rms_ch1"] = rms(a);
  d["rms_ch2"] = rms(b);
  d["rms_difference"] = rms(diff);
  ctx.res.summary.push_back("rms ch1 " + fmt("%.4g", rms(a)) + ", ch2 " + fmt("%.4g", rms(b)) + ", difference " +
                            fmt("%.4g", rms(diff)));
  save_trace(diff, ctx.file(".csv"), c.header_lines());
}

}  // namespace

Results run(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Results res;
  res.mode = mode_name(config.mode);
  Context ctx{config, out_dir, res.mode, res};
  switch (config.mode) {
    case Mode::simulate_odmr: run_simulate_odmr(ctx); break;
    case Mode::simulate_ramsey: run_simulate_ramsey(ctx); break;
    case Mode::simulate_repolarization: run_repolarization(ctx); break;
    case Mode::optimize: run_optimize(ctx); break;
    case Mode::analyze: run_analyze(ctx); break;
    case Mode::calibrate: run_calibrate(ctx); break;
    case Mode::gradiometer: run_gradiometer(ctx); break;
  }
  {
    std::ofstream ini(ctx.file(".resolved.ini"));
    ini << config.serialize();
  }
  const auto json_path = ctx.file(".json");
  const auto txt_path = ctx.file(".txt");
  const Report rep = emit_report(res, &config);
  std::ofstream(json_path) << rep.json.dump(2) << '\n';
  std::ofstream(txt_path) << rep.text;
  return res;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"nvmag: NV-ensemble magnetometry simulation and analysis"};
  std::string mode;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_value = 0;
  app.add_option("mode", mode, "mode")->required()->check(CLI::IsMember(mode_names()));
  app.add_option("--config", config_path, "key-value configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed_value, "seed for synthetic noise (overrides [run] seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    std::optional<std::uint64_t> seed;
    if (seed_opt->count()) seed = seed_value;
    const ExperimentConfig cfg = load_config(*parse_mode(mode), config_path, seed);
    const Results res = run(cfg, out_dir);
    std::cout << emit_report(res, &cfg).text;
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "nvmag: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nvmag " << mode << ": " << e.what() << '\n';
    return 2;
  }
}

}  // namespace nvmag::runner
