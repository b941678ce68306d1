#pragma once

#include <stdexcept>
#include <string>

namespace couplex {

/// Failure categories shared by every module. The numeric values are the
/// status codes of the C API (see couplex.h), so they must stay stable.
enum class ErrorCode : int {
    invalid_spec = 1,
    domain = 2,
    numerical_blowup = 3,
    step_size = 4,
    degraded_basis = 5,
    budget = 6,
    config = 7,
    io = 8,
    internal = 9,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace couplex
