#pragma once

#include <stdexcept>
#include <string>

namespace mcbound {

/// Input rejected by a precondition or range check. The message names the
/// offending field and the violated constraint.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A mathematically degenerate configuration (zero overlap, residual kernel
/// undefined, reducible chain, quadrature failure, ...).
class Degenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] inline void reject(const std::string& what) { throw InvalidInput(what); }
inline void require(bool ok, const std::string& what) {
  if (!ok) reject(what);
}
}  // namespace detail

}  // namespace mcbound
