#ifndef QPC_ERRORS_HPP
#define QPC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qpc {

// Every failure carries a stable machine-readable kind plus the margins of
// the check that tripped, so the CLI can emit structured reasons and tests
// can assert on the failure mode rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

  Error& with_margin(const std::string& name, double value) {
    margins_.emplace_back(name, value);
    return *this;
  }
  const std::vector<std::pair<std::string, double>>& margins() const noexcept {
    return margins_;
  }

 private:
  std::string kind_;
  std::vector<std::pair<std::string, double>> margins_;
};

#define QPC_DEFINE_ERROR(NAME)                        \
  struct NAME : Error {                               \
    explicit NAME(const std::string& what)            \
        : Error(#NAME, what) {}                       \
  }

QPC_DEFINE_ERROR(DomainError);
QPC_DEFINE_ERROR(ZeroOnStrip);
QPC_DEFINE_ERROR(OverflowError);
QPC_DEFINE_ERROR(PrecisionExhausted);
QPC_DEFINE_ERROR(IllConditioned);
QPC_DEFINE_ERROR(NoConvergence);
QPC_DEFINE_ERROR(PreconditionFailed);
QPC_DEFINE_ERROR(ZeroLocationFailure);
QPC_DEFINE_ERROR(ResidualTooLarge);
QPC_DEFINE_ERROR(NotRealDirection);
QPC_DEFINE_ERROR(CondFailed);
QPC_DEFINE_ERROR(TraceNotConcentrated);
QPC_DEFINE_ERROR(DeterminantCollapse);
QPC_DEFINE_ERROR(ParityMismatch);
QPC_DEFINE_ERROR(WindingNonzero);
QPC_DEFINE_ERROR(SmallDivisorOverflow);
QPC_DEFINE_ERROR(HypothesisFailed);

#undef QPC_DEFINE_ERROR

}  // namespace qpc

#endif  // QPC_ERRORS_HPP
