#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opwg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension mismatches and malformed inputs.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Configuration that is rejected before any work is done (e.g. lambda above its bound).
class ConfigError : public Error {
public:
    using Error::Error;
};

class OrphanSampleError : public Error {
public:
    explicit OrphanSampleError(std::size_t index)
        : Error("orphan sample: every component log-density of sample " + std::to_string(index) +
                " is non-finite"),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// Every mixing coefficient was clipped to zero in the same M-step.
class TotalCollapseError : public Error {
public:
    TotalCollapseError() : Error("total collapse: all mixture components eliminated") {}
};

}  // namespace opwg
