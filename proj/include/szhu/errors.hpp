#ifndef SZHU_ERRORS_HPP
#define SZHU_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace szhu {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define SZHU_DEFINE_ERROR(Name)                                   \
  struct Name : Error {                                           \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

// schottky
SZHU_DEFINE_ERROR(DegenerateFixedPoints);
SZHU_DEFINE_ERROR(MultiplierOutOfRange);
SZHU_DEFINE_ERROR(NoAdmissibleRoot);
SZHU_DEFINE_ERROR(ImageOutsideParameterSpace);
SZHU_DEFINE_ERROR(InsufficientDistinctPoints);

// moments / forms
SZHU_DEFINE_ERROR(EvaluationAtBasepoint);
SZHU_DEFINE_ERROR(CoincidentPoints);
SZHU_DEFINE_ERROR(EvaluationAtCentre);
SZHU_DEFINE_ERROR(SingularResolvent);
SZHU_DEFINE_ERROR(PathThroughSingularity);

// heisenberg
SZHU_DEFINE_ERROR(ChargeNotNeutral);
SZHU_DEFINE_ERROR(UnsupportedChargeCount);
SZHU_DEFINE_ERROR(CapExceeded);
SZHU_DEFINE_ERROR(NonConvergentTheta);

// ward
SZHU_DEFINE_ERROR(PerturbationLeavesParameterSpace);
SZHU_DEFINE_ERROR(GenusTooSmall);

// genus1
SZHU_DEFINE_ERROR(PoleHit);
SZHU_DEFINE_ERROR(BranchPoint);

// cli / config
SZHU_DEFINE_ERROR(ParseError);
SZHU_DEFINE_ERROR(SchemaError);
SZHU_DEFINE_ERROR(ParameterSpaceError);

#undef SZHU_DEFINE_ERROR

}  // namespace szhu

#endif
