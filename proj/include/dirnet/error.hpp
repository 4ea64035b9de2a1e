#pragma once

#include <stdexcept>
#include <string>

namespace dirnet {

// Dimension disagreement between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside its mathematical domain (e.g. negative threshold).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Internal consistency violation (CSR structure, shift table, CRC).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration value or unknown key.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Filesystem / stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unparseable or wrong-version file contents.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dirnet
