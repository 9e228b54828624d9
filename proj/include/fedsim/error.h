#ifndef FEDSIM_ERROR_H_
#define FEDSIM_ERROR_H_

#include <stdexcept>
#include <string>

namespace fedsim {

// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature width, parameter layout or update shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A partition plan asks for more samples (of some label) than exist.
class InfeasiblePartition : public Error {
 public:
  using Error::Error;
};

// Both classes are needed but only one is present.
class UndefinedAuc : public Error {
 public:
  using Error::Error;
};

// The intermittency policy left no eligible participant in a round.
class PolicyStarvation : public Error {
 public:
  PolicyStarvation(int round, const std::string& detail)
      : Error("policy starvation in round " + std::to_string(round) + ": " +
              detail),
        round_(round) {}

  int round() const { return round_; }

 private:
  int round_;
};

}  // namespace fedsim

#endif  // FEDSIM_ERROR_H_
