#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace nvmag {

enum class Unit { arbitrary, volt, tesla };

std::string unit_suffix(Unit u);  // "", "v", "t"

struct TimeTrace {
  std::vector<double> samples;
  double sample_rate = 1.0;  // Hz
  double start_time = 0.0;   // s
  Unit unit = Unit::arbitrary;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t k) const { return start_time + static_cast<double>(k) / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  // sample_rate > 0, length >= 2, finite samples
  void validate() const;
};

// CSV `time_s,value_v|value_t|value`; timestamps must be uniform within 1 ppm of the step.
TimeTrace load_trace(const std::filesystem::path& path);
void save_trace(const TimeTrace& trace, const std::filesystem::path& path,
                const std::vector<std::string>& header_comments = {});

}  // namespace nvmag
