#pragma once

#include <stdexcept>
#include <string>

namespace nvmag {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error { using Error::Error; };
struct InvalidState : Error { using Error::Error; };
struct StiffnessError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
struct SingularityError : Error { using Error::Error; };
struct Unsupported : Error { using Error::Error; };
struct InfeasibleSchedule : Error { using Error::Error; };
struct AliasingError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace nvmag
