#pragma once

#include <stdexcept>
#include <string>

namespace bvae {

// Base of every error the library throws. Each subclass maps onto one CLI
// exit-code class (see experiments/cli_codes.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public IoError {
public:
    using IoError::IoError;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace bvae
