#pragma once

#include <stdexcept>
#include <string>

namespace cqr {

enum class ErrorKind {
  Domain,       // invalid numeric argument (non-finite, empty, out of range)
  Config,       // inconsistent request (missing pilot, dimension mismatch)
  Numerical,    // factorization or solver breakdown
  Parse,        // malformed input file or document
  Convergence,  // a required stage did not converge
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace cqr
