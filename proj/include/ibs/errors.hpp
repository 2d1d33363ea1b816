#pragma once

#include <stdexcept>
#include <string>

namespace ibs {

// Wrong vector length, non power-of-two size, empty operator list.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid experiment or transform configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain (e.g. non-positive variance).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Dense materialization above the configured size limit.
class RefusalError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Normalization of the memory linear estimator collapsed to ~0.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric not defined for the requested prior (BER for a non-QPSK source).
class UnsupportedMetricError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ibs
