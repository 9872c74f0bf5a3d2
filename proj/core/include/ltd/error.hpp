#pragma once

#include <stdexcept>
#include <string>

namespace ltd {

// Bad or inconsistent input data: malformed files, violated preconditions,
// unusable subsets. The CLI maps these to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fit that cannot be carried out or did not converge. CLI exit status 2.
class NumericalError : public std::runtime_error {
 public:
  enum class Kind { kSingular, kSeparation, kNonConvergence, kDimension };

  NumericalError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ltd
