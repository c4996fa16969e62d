#pragma once

#include <stdexcept>
#include <string>

namespace ctree {

// Invalid argument or structural violation (bad vertex, mismatched sizes...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Request exceeds a configured size bound (e.g. topology depth cap).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Inconsistent data or configuration: corpus lines, vocab/checkpoint mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Joint decoding found no complete tree with finite probability.
class NoDecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctree
