#ifndef TWOPHASE_ERROR_HPP_
#define TWOPHASE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace twophase {

// Malformed or inconsistent input: bad rows, calendar mismatches, invalid
// parameters. The CLI maps this to exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistical precondition was not met (too few tail samples, every r-bin
// below min_samples, degenerate histogram). The CLI maps this to exit status 3.
class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace twophase

#endif  // TWOPHASE_ERROR_HPP_
