#pragma once

#include <stdexcept>
#include <string>

namespace air {

enum class ErrorCode {
    Shape,        // dimension mismatch between operands
    Domain,       // non-finite values, non-probability marginals
    Parameter,    // out-of-range scalar parameter (epsilon, Q, ...)
    Unsupported,  // valid input outside what the routine handles
    Format,       // malformed file contents
    Io,           // file system failures
};

const char* to_string(ErrorCode code);

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

}  // namespace air
