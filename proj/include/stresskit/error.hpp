#pragma once

#include <stdexcept>
#include <string>

namespace stresskit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, datasets, imported tables).
class DataError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Raised when a stressor is requested from a knowledge-base cell with no occupants.
class EmptyCellError : public Error {
public:
    explicit EmptyCellError(std::size_t cell)
        : Error("EMPTY_CELL: knowledge-base cell " + std::to_string(cell) + " has no combinations"),
          cell_(cell) {}

    std::size_t cell() const noexcept { return cell_; }

private:
    std::size_t cell_;
};

}  // namespace stresskit
