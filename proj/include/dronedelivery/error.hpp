#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dd {

// Wire codes of the service error envelope; also used in-process.
enum class ErrorCode {
    NotFound,
    Conflict,
    Validation,
    Capacity,
    UnresolvableAddress,
    Unavailable,
    Internal,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message, std::string detail = {}) {
    throw Error(code, std::move(message), std::move(detail));
}

}  // namespace dd
