#pragma once

// Shared vocabulary types and the error type used across the toolkit.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hilltop {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// A point (x, y) in the phase plane.
using State = Eigen::Vector2d;

enum class ErrorCode {
  singular_parametrization,  // alpha + beta == 0 where lambda_Tr0 is needed
  degenerate_coupling,       // alpha*beta == 0 (or alpha == 0 for the quartic)
  no_takens_bogdanov,
  pole,
  ambiguous_orientation,
  wrong_equilibrium_type,
  no_hopf,
  out_of_model,
  seed_quality,
  singular_jacobian,
  numerical_failure,
  bad_input,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::singular_parametrization: return "singular_parametrization";
    case ErrorCode::degenerate_coupling: return "degenerate_coupling";
    case ErrorCode::no_takens_bogdanov: return "no_takens_bogdanov";
    case ErrorCode::pole: return "pole";
    case ErrorCode::ambiguous_orientation: return "ambiguous_orientation";
    case ErrorCode::wrong_equilibrium_type: return "wrong_equilibrium_type";
    case ErrorCode::no_hopf: return "no_hopf";
    case ErrorCode::out_of_model: return "out_of_model";
    case ErrorCode::seed_quality: return "seed_quality";
    case ErrorCode::singular_jacobian: return "singular_jacobian";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::bad_input: return "bad_input";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hilltop
