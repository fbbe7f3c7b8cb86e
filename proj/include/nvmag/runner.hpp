#pragma once

#include "nvmag/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nvmag::runner {

inline constexpr const char* version = "0.1.0";

enum class Mode { simulate_odmr, simulate_ramsey, simulate_repolarization, optimize, analyze, calibrate, gradiometer };

std::optional<Mode> parse_mode(const std::string& name);
std::string mode_name(Mode m);
std::vector<std::string> mode_names();

struct ValidationError : Error {
  std::vector<std::string> problems;
  explicit ValidationError(std::vector<std::string> p);
};

// Resolved configuration: every field of the mode's schema, canonical text values.
struct ExperimentConfig {
  Mode mode = Mode::optimize;
  std::map<std::string, std::string> values;  // "section.key" -> value
  std::uint64_t seed = 1;

  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  std::string serialize() const;  // INI text, reloadable
  std::uint64_t hash() const;     // FNV-1a 64 of serialize()
  std::string hash_hex() const;
  std::vector<std::string> header_lines() const;
};

// Parse key-value text and resolve against the mode schema; throws ValidationError listing every problem.
ExperimentConfig resolve_config(Mode mode, const std::string& ini_text, std::optional<std::uint64_t> seed = {},
                                const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(Mode mode, const std::filesystem::path& path, std::optional<std::uint64_t> seed = {});

struct Results {
  std::string mode;  // empty for a bare status report
  std::string status = "ok";
  nlohmann::json data = nlohmann::json::object();
  std::vector<std::string> summary;
  std::vector<std::string> artifacts;
};

struct Report {
  nlohmann::json json;
  std::string text;
};

Report emit_report(const Results& results, const ExperimentConfig* config = nullptr);

// Runs the mode, writes artifacts into out_dir, returns the results (report files included).
Results run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// CLI entry: 0 success, 1 validation, 2 runtime.
int main_entry(int argc, char** argv);

}  // namespace nvmag::runner
