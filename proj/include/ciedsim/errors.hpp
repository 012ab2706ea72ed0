#pragma once

#include <stdexcept>
#include <string>

namespace ciedsim {

enum class ErrorCode {
  ok = 0,
  config,
  parse,
  version_mismatch,
  infeasible_placement,
  out_of_bounds,
  unreachable,
  degenerate_model,
  unknown_feature_shape,
  sensor_unavailable,
  unknown_robot,
  invalid_transition,
  invalid_command,
  invalid_schedule,
  incompatible_log,
  incompatible_reports,
  io,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the core carries one of the codes above; the C API
// maps them 1:1 onto its integer status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ciedsim
