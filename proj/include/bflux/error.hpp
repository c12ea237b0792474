#pragma once

#include <stdexcept>
#include <string>

namespace bflux {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidClamp : Error { using Error::Error; };
struct NewtonFailed : Error {
  NewtonFailed(const std::string& what, double at) : Error(what), time(at) {}
  double time;
};
struct BlownUp : Error { using Error::Error; };
struct Inconclusive : Error { using Error::Error; };
struct ScheduleNotCauchy : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct NotSettled : Error { using Error::Error; };
struct InsufficientSamples : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace bflux
