#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace ldpnn {

/// Extended nonnegative reals are stored as double; +inf is the INFINITE value.
inline constexpr double kInfinite = std::numeric_limits<double>::infinity();

inline bool is_infinite(double v) { return v == kInfinite; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LDPNN_ERROR(Name)                     \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(std::string(#Name ": ") + what) {} \
  }

LDPNN_ERROR(NonFiniteInput);
LDPNN_ERROR(ZeroReference);
LDPNN_ERROR(QuadratureUnstable);
LDPNN_ERROR(DimensionTooLarge);
LDPNN_ERROR(Diverged);
LDPNN_ERROR(InnerNotConverged);
LDPNN_ERROR(NonPositiveKernel);
LDPNN_ERROR(DegenerateVariance);
LDPNN_ERROR(NonFiniteGradient);
LDPNN_ERROR(InvalidArgument);
LDPNN_ERROR(UnsupportedConfiguration);
LDPNN_ERROR(ConfigError);

#undef LDPNN_ERROR

}  // namespace ldpnn
