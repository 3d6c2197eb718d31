#pragma once

#include <stdexcept>
#include <string>

namespace driftmon {

// Base class for all toolkit errors. exit_code() maps onto the CLI
// contract: 2 = data/usage-of-data error, 3 = statistical degeneracy.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const noexcept { return 2; }
};

// Statistical degeneracy: a metric or test is undefined on the given input
// (all responses equal, zero null-distribution sd, ...).
class DegeneracyError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace driftmon
