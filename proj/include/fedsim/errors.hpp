#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Shape/precondition violations inside the numeric core and drivers.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed or inconsistent input data (IDX, CSV, partition preconditions).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Experiment configuration that fails to parse or validate.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

}  // namespace fedsim
