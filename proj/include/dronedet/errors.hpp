#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace dronedet {

namespace detail {

template <class... Ts>
std::string cat(Ts&&... parts) {
  std::ostringstream os;
  (os << ... << std::forward<Ts>(parts));
  return os.str();
}

}  // namespace detail

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension / shape contract violations. The message names the offending
// dimension so callers can report it verbatim.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter values (counts, probabilities, thresholds, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// File-format and filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

template <class... Ts>
[[noreturn]] void throw_shape(Ts&&... parts) {
  throw ShapeError(detail::cat(std::forward<Ts>(parts)...));
}

template <class... Ts>
[[noreturn]] void throw_value(Ts&&... parts) {
  throw ValueError(detail::cat(std::forward<Ts>(parts)...));
}

template <class... Ts>
[[noreturn]] void throw_io(Ts&&... parts) {
  throw IoError(detail::cat(std::forward<Ts>(parts)...));
}

}  // namespace dronedet
