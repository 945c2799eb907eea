#pragma once

#include <stdexcept>
#include <string>

namespace driftlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DRIFTLAB_DEFINE_ERROR(Name)                                \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

DRIFTLAB_DEFINE_ERROR(SingularSample)
DRIFTLAB_DEFINE_ERROR(InvalidParameter)
DRIFTLAB_DEFINE_ERROR(DimensionMismatch)
DRIFTLAB_DEFINE_ERROR(DegenerateTest)
DRIFTLAB_DEFINE_ERROR(UnboundedInput)
DRIFTLAB_DEFINE_ERROR(ScheduleFailure)
DRIFTLAB_DEFINE_ERROR(StabilityViolation)
DRIFTLAB_DEFINE_ERROR(RejectedSingularField)
DRIFTLAB_DEFINE_ERROR(QOutOfRange)
DRIFTLAB_DEFINE_ERROR(POutOfRange)
DRIFTLAB_DEFINE_ERROR(InsufficientSamples)
DRIFTLAB_DEFINE_ERROR(TimeUnavailable)
DRIFTLAB_DEFINE_ERROR(ConfigInvalid)

#undef DRIFTLAB_DEFINE_ERROR

}  // namespace driftlab
