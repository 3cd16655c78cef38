#pragma once

#include <stdexcept>
#include <string>

namespace simclf {

// Bad or inconsistent input data: malformed corpus lines, invalid
// arguments, precondition violations.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged or could not proceed.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two artifacts that must agree do not (checkpoint vs corpus vocab, file
// format versions).
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace simclf
