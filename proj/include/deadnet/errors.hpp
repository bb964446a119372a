#pragma once

#include <stdexcept>
#include <string>

namespace deadnet {

// Checked domain error. Everything the library throws on bad input derives
// from this, so callers (the CLI in particular) can separate domain failures
// from programming errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

}  // namespace deadnet
