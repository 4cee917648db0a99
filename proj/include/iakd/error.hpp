#pragma once

#include <stdexcept>
#include <string>

namespace iakd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or settings that cannot work together.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad labels, malformed CSV, out-of-range samples.
class DataError : public Error {
public:
    using Error::Error;
};

class InvalidBatchError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class TapeError : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    using Error::Error;
};

} // namespace iakd
