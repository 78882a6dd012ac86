#ifndef ASYNCSEP_ERRORS_HPP
#define ASYNCSEP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace asyncsep {

// Bad input: malformed configs, mismatched shapes, unreadable files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite data or a factorization that should not have failed.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace asyncsep

#endif  // ASYNCSEP_ERRORS_HPP
