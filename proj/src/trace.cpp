#include "nvmag/trace.hpp"

#include "nvmag/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>

namespace nvmag {

std::string unit_suffix(Unit u) {
  switch (u) {
    case Unit::volt: return "v";
    case Unit::tesla: return "t";
    case Unit::arbitrary: break;
  }
  return "";
}

void TimeTrace::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InvalidArgument("trace sample_rate must be > 0");
  if (samples.size() < 2) throw InvalidArgument("trace needs at least 2 samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw InvalidArgument("trace contains a non-finite sample");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, std::size_t line, const std::string& path) {
  s = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ParseError(path + ":" + std::to_string(line) + ": malformed number '" + std::string(s) + "'");
  return v;
}

}  // namespace

TimeTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  const std::string name = path.string();
  TimeTrace tr;
  std::vector<double> times;
  std::vector<std::size_t> lines;
  double declared_rate = 0.0;
  bool header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      constexpr std::string_view key = "# sample_rate_hz=";
      if (s.substr(0, key.size()) == key) declared_rate = parse_number(s.substr(key.size()), lineno, name);
      continue;
    }
    const auto comma = s.find(',');
    if (comma == std::string_view::npos || s.find(',', comma + 1) != std::string_view::npos)
      throw ParseError(name + ":" + std::to_string(lineno) + ": expected two comma-separated columns");
    const std::string_view a = trim(s.substr(0, comma)), b = trim(s.substr(comma + 1));
    if (!header) {
      if (a != "time_s") throw ParseError(name + ":" + std::to_string(lineno) + ": header must start with time_s");
      if (b == "value_v") tr.unit = Unit::volt;
      else if (b == "value_t") tr.unit = Unit::tesla;
      else if (b == "value") tr.unit = Unit::arbitrary;
      else throw ParseError(name + ":" + std::to_string(lineno) + ": value column must be value_v, value_t or value");
      header = true;
      continue;
    }
    times.push_back(parse_number(a, lineno, name));
    lines.push_back(lineno);
    tr.samples.push_back(parse_number(b, lineno, name));
  }
  if (!header) throw ParseError(name + ": missing header");
  if (times.size() < 2) throw ParseError(name + ": need at least 2 data rows");
  const double step = (times.back() - times.front()) / (times.size() - 1);
  if (!(step > 0.0)) throw ParseError(name + ": timestamps must increase");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs((times[k] - times[k - 1]) - step) > 1e-6 * step)
      throw ParseError(name + ":" + std::to_string(lines[k]) + ": non-uniform sample spacing (beyond 1 ppm)");
  }
  tr.start_time = times.front();
  tr.sample_rate = 1.0 / step;
  if (declared_rate > 0.0 && std::abs(declared_rate * step - 1.0) < 1e-9) tr.sample_rate = declared_rate;
  return tr;
}

void save_trace(const TimeTrace& trace, const std::filesystem::path& path,
                const std::vector<std::string>& header_comments) {
  trace.validate();
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& c : header_comments) std::fprintf(f, "# %s\n", c.c_str());
  std::fprintf(f, "# sample_rate_hz=%.17g\n", trace.sample_rate);
  const std::string suffix = unit_suffix(trace.unit);
  std::fprintf(f, "time_s,value%s%s\n", suffix.empty() ? "" : "_", suffix.c_str());
  for (std::size_t k = 0; k < trace.size(); ++k) std::fprintf(f, "%.17g,%.17g\n", trace.time(k), trace.samples[k]);
  std::fclose(f);
}

}  // namespace nvmag
