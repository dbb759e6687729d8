#pragma once

#include <stdexcept>
#include <string>

namespace cipher_icl {

// Bad file contents: wrong magic, unsupported version, truncated payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Observed (cipher, plain) pairs that no key of the assumed scheme can produce.
class InconsistentPairsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cipher_icl
