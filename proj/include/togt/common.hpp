#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace togt {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  SingularFlatness,
  SingularSystem,
  OutOfDomain,
  EmptyAfterShrink,
  ParseError,
  ValidationError,
  IoError,
};

inline const char *to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularFlatness: return "SingularFlatness";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::EmptyAfterShrink: return "EmptyAfterShrink";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the error-code prefix.
  const std::string &message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace togt
