#pragma once

#include <stdexcept>
#include <string>

namespace sdgm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied settings (config files, pattern descriptors, priors).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value reached a quantity that must stay finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace sdgm
