// Shared vocabulary for the URSULA digital twin: error type, angle helpers,
// vector aliases.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ursula {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

enum class ErrorCode {
    NonFinite,
    OutOfRange,
    InvalidArgument,
    NotPositiveDefinite,
    Unreachable,
    ModeViolation,
    Schema,
    Validation,
};

inline std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NotPositiveDefinite: return "not_positive_definite";
    case ErrorCode::Unreachable: return "unreachable";
    case ErrorCode::ModeViolation: return "mode_violation";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Validation: return "validation";
    }
    return "unknown";
}

/// Rejection raised by the model functions. `code()` is machine-readable.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    if (a > -kPi && a <= kPi) {
        return a;
    }
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) {
        a += 2.0 * kPi;
    }
    return a;
}

inline bool all_finite(std::initializer_list<double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

inline void require_finite(std::initializer_list<double> values, const char* what) {
    if (!all_finite(values)) {
        throw Error(ErrorCode::NonFinite, std::string(what) + ": non-finite input");
    }
}

inline Mat3 rot_z(double a) {
    const double c = std::cos(a);
    const double s = std::sin(a);
    Mat3 r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

} // namespace ursula
