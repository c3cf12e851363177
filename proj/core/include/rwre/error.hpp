#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rwre {

enum class ErrorKind {
  config,          // invalid model or experiment parameters
  degenerate_site, // zero transition probability where a positive one is required
  decomposition,   // coin decomposition impossible at a visited site
  budget,          // step budget exhausted before the event of interest
  input_mismatch,  // inconsistent inputs (e.g. coins missing for path steps)
  domain,          // function evaluated outside its domain
  solver,          // linear solver failure or non-convergence
  truncation,      // slab truncation too small (mass deficit above threshold)
  beta_too_large,  // coin ratio exceeded 1
  precondition,    // documented precondition violated
  sample_size,     // not enough samples for a statistic
  model_violation, // structural assumption of the model failed
  io,              // file format or filesystem problem
  usage,           // command-line usage
};

std::string_view to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace rwre
