#pragma once

#include <stdexcept>
#include <string>

namespace coreg {

// Base for every error raised by the library. The CLI maps subclasses to
// exit codes (config 1, data 2, divergence 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace coreg
