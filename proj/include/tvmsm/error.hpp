#pragma once

#include <stdexcept>
#include <string>

namespace tvmsm {

enum class Errc {
  invalid_data,
  config,
  io,
  no_mle,
  separation,
  rank_deficient,
  non_convergence,
  no_contrast,
  infeasible_subset,
  insufficient_feasible,
  bootstrap_unstable,
};

const char* to_string(Errc code) noexcept;

// Every failure raised by the library carries the module it came from so the
// CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        code_(code),
        module_(std::move(module)),
        message_(message) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string module_;
  std::string message_;
};

}  // namespace tvmsm
